#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "splitflow/constitutive.hpp"
#include "splitflow/fields.hpp"
#include "splitflow/geometry.hpp"

namespace splitflow {

/// Pressure/flux pair on one subdomain plus the interface data the
/// domain-decomposition layer needs.
struct DarcyState {
    CellField pressure;               ///< cell values (alpha(s) for diffusion solves)
    FaceFluxField flux;               ///< canonical (+axis) normal flux per local face
    std::vector<double> mortar_flux;  ///< outward u.n per mortar face, subdomain_mortars order
    std::vector<double> mortar_trace; ///< face trace of the interface variable, same order
};

struct NewtonOptions {
    double rtol = 1e-4;
    double atol = 0.0;     ///< absolute floor on the residual norm
    int max_iter = 50;
    int max_halvings = 8;
};

/// Hybridized lowest-order Raviart-Thomas solver for the linearized total-flow
/// (global pressure) equation on one subdomain. Interior faces carry face
/// pressure unknowns; each application is one sparse SPD solve. Matrices are
/// factored once per linearization state and reused across repeated solves.
class SubdomainPressure {
public:
    SubdomainPressure(const DecomposedDomain& dd, int sub, const RockType& rock,
                      const FluidParams& fluid);

    /// Outward-flux data on outer inflow/outflow faces (local face id, u.n).
    void set_outer_flux(std::vector<std::pair<int, double>> outer);

    /// Freezes the mobility coefficients at the given saturations and factors
    /// the Dirichlet- and Neumann-mode matrices.
    void set_saturation(const CellField& s);

    /// Mixed solve with trace data on the interface, ordered like
    /// subdomain_mortars(). The boundary integral carries lambda + beta(s)
    /// when `with_beta` is set.
    DarcyState solve_dirichlet(const std::vector<double>& lambda, bool with_beta,
                               bool gravity, bool outer_data) const;

    /// Neumann-to-Dirichlet map: prescribed outward u.n on the interface,
    /// homogeneous data elsewhere; returns the trace of p with the subdomain
    /// constant pinned to zero volume mean and the output projected to zero
    /// area mean. With `strict`, data whose net flux exceeds the projection
    /// tolerance throws instead of being projected silently.
    std::vector<double> solve_neumann_trace(const std::vector<double>& mortar_flux,
                                            bool strict = false) const;

    /// Robin subdomain problem of the waveform-relaxation iteration:
    /// -u.n + gamma (p - beta) = eta on the interface.
    DarcyState solve_robin(double gamma, const std::vector<double>& eta,
                           bool gravity, bool outer_data) const;

    int n_mortar_faces() const { return static_cast<int>(mortars_.size()); }
    double beta_at_mortar(int slot) const { return beta_face_[slot]; }
    const RockType& rock() const { return *rock_; }

private:
    struct CellCache;
    struct Mode {
        std::vector<int> unknown_of_face;  ///< local face -> condensed unknown or -1
        int n_unknown = 0;
        bool regularized = false;          ///< pure-Neumann nullspace shifted out
        std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> llt;
        std::shared_ptr<CellCache> cells;
    };

    void build_mode(Mode& mode, bool mortar_prescribed, double robin_gamma) const;
    DarcyState run(const Mode& mode, const std::vector<double>& trace_data,
                   const std::vector<double>* robin_eta, double gamma,
                   bool gravity, bool outer_data,
                   const std::vector<double>* mortar_flux) const;

    const DecomposedDomain* dd_;
    int sub_;
    const StructuredMesh* mesh_;
    const RockType* rock_;
    const FluidParams* fluid_;
    CellField s_;
    std::vector<double> inv_mobility_;          ///< 1/M(s_K) per cell
    std::vector<double> beta_face_;             ///< beta(s) per mortar face
    std::vector<std::pair<int, int>> mortars_;  ///< (mortar id, local face)
    std::vector<int> mortar_slot_of_face_;      ///< local face -> slot or -1
    std::vector<std::pair<int, double>> outer_flux_;

    Mode dirichlet_;
    Mode neumann_;
    mutable std::map<double, Mode> robin_;  ///< keyed by gamma
};

/// Implicit capillary-diffusion step on one subdomain (backward Euler in
/// hybrid mixed form), solved by damped Newton on the condensed face system.
class SubdomainDiffusion {
public:
    SubdomainDiffusion(const DecomposedDomain& dd, int sub, const RockType& rock);

    /// Dirichlet saturation data on outer inflow/outflow faces.
    void set_outer_saturation(std::vector<std::pair<int, double>> ghost);

    struct Result {
        DarcyState state;  ///< flux r and cell alpha values
        CellField s_new;
        int newton_iterations = 0;
        std::vector<double> mortar_theta;  ///< face saturation per mortar face
    };

    /// Capillary-pressure Dirichlet data lambda_d per mortar face; the
    /// boundary integral carries alpha(pi^{-1}(lambda_d)).
    Result solve_dirichlet(const CellField& s_star, double tau,
                           const std::vector<double>& lambda_d,
                           const NewtonOptions& opt) const;

    /// Robin data eta per mortar face: imposes
    /// -r.n + robin_sign()*kappa*pi(theta) = eta with the face saturation
    /// theta unknown. The sign keeps the combination monotone for decreasing
    /// capillary curves.
    Result solve_robin(const CellField& s_star, double tau, double kappa,
                       const std::vector<double>& eta,
                       const NewtonOptions& opt) const;

    double robin_sign() const;

    /// Frozen linearization of the Dirichlet-to-Neumann map at (s_star,
    /// lambda0): delta_lambda -> delta(r.n) per mortar face. One
    /// factorization, cheap repeated applications.
    std::function<std::vector<double>(const std::vector<double>&)>
    make_linearized_dtn(const CellField& s_star, double tau,
                        const std::vector<double>& lambda0) const;

    int n_mortar_faces() const { return static_cast<int>(mortars_.size()); }
    const RockType& rock() const { return *rock_; }

private:
    enum class MortarMode { Dirichlet, Robin };
    Result solve(const CellField& s_star, double tau, MortarMode mode,
                 const std::vector<double>& data, double kappa,
                 const NewtonOptions& opt) const;

    const DecomposedDomain* dd_;
    int sub_;
    const StructuredMesh* mesh_;
    const RockType* rock_;
    std::vector<std::pair<int, int>> mortars_;
    std::vector<int> mortar_slot_of_face_;
    std::vector<std::pair<int, double>> outer_ghost_;
};

} // namespace splitflow
