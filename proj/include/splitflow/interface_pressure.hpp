#pragma once

#include <memory>
#include <string>
#include <vector>

#include "splitflow/fields.hpp"
#include "splitflow/krylov.hpp"
#include "splitflow/subdomain_darcy.hpp"

namespace splitflow {

struct PressureSolveReport {
    std::string method;
    int iterations = 0;
    int subdomain_solves = 0;
    double final_residual = 0.0;
    std::vector<double> residual_history;
};

struct PressureMethodOptions {
    double tol = 1e-6;
    int max_iter = 500;
    bool neumann_neumann = false;        ///< precondition CG with weighted NtD
    std::vector<double> nn_weights;      ///< per subdomain; halves by default
    std::vector<double> robin_gamma;     ///< per subdomain, for the OSWR variant
    int oswr_max_iter = 200;
};

/// Interface reduction of the multidomain total-flow problem: the
/// flux-jump operator over the mortar trace, its right-hand side, the
/// preconditioned CG driver and the Robin waveform-relaxation alternative.
class InterfacePressure {
public:
    InterfacePressure(const DecomposedDomain& dd,
                      const std::vector<RockType>& rocks,
                      const FluidParams& fluid);

    /// Prescribed outward fluxes on outer inflow/outflow faces, per subdomain.
    void set_outer_flux(int sub, std::vector<std::pair<int, double>> outer);

    /// Freezes mobilities at the given saturations (one field per subdomain).
    void set_saturation(const std::vector<CellField>& s);

    /// Flux-jump operator: lambda -> -sum_i u_i(lambda).n_i per mortar face.
    /// Homogeneous data: no beta offset, no gravity, no outer fluxes.
    InterfaceTrace sp_apply(const InterfaceTrace& lambda) const;

    /// Right-hand side from the auxiliary solves carrying the beta offsets,
    /// gravity and the outer boundary data: +sum_i u_i.n_i.
    InterfaceTrace sp_rhs(bool gravity) const;

    /// Weighted Neumann-Neumann preconditioner application.
    InterfaceTrace nn_apply(const InterfaceTrace& r,
                            const std::vector<double>& weights) const;

    std::pair<InterfaceTrace, PressureSolveReport>
    cg_solve(const PressureMethodOptions& opt, bool gravity,
             const InterfaceTrace* warm_start = nullptr) const;

    /// Robin waveform relaxation on the pressure problem. Returns converged
    /// subdomain states; the report counts sweeps. eta0 (per subdomain, per
    /// mortar slot) warm-starts the iteration.
    std::pair<std::vector<DarcyState>, PressureSolveReport>
    oswr_solve(const PressureMethodOptions& opt, bool gravity,
               const std::vector<std::vector<double>>* eta0 = nullptr,
               std::vector<std::vector<double>>* eta_out = nullptr) const;

    /// Full subdomain states for a converged lambda, with the global pressure
    /// constant pinned to zero volume mean across the whole domain (traces
    /// shifted consistently).
    std::vector<DarcyState> reconstruct(const InterfaceTrace& lambda,
                                        bool gravity) const;

    const DecomposedDomain& domain() const { return *dd_; }
    const SubdomainPressure& subdomain(int i) const { return *subs_[i]; }

    /// Per-subdomain gather of a global interface vector.
    std::vector<double> restrict_to(int sub, const InterfaceTrace& v) const;

    int solve_count() const { return solves_; }

private:
    const DecomposedDomain* dd_;
    const FluidParams* fluid_;
    std::vector<std::unique_ptr<SubdomainPressure>> subs_;
    mutable int solves_ = 0;
};

} // namespace splitflow
