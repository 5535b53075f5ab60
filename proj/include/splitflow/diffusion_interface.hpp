#pragma once

#include <memory>
#include <vector>

#include "splitflow/fields.hpp"
#include "splitflow/subdomain_darcy.hpp"

namespace splitflow {

struct DiffusionReport {
    int newton_iterations = 0;
    int gmres_iterations = 0;
    int oswr_iterations = 0;
    int subdomain_newton_iterations = 0;
    int subdomain_solves = 0;
    double final_residual = 0.0;
};

struct DiffusionMethodOptions {
    double tol_newton = 1e-4;  ///< relative reduction of the interface residual
    double tol_newton_abs = 0.0;
    int max_newton = 50;
    double tol_gmres = 1e-3;
    int max_gmres = 200;
    int gmres_restart = 30;
    bool precondition = false;  ///< frozen linearized interface operator
    NewtonOptions subdomain;    ///< inner per-subdomain Newton controls
    double oswr_tol = 1e-6;
    int oswr_max_iter = 200;
    std::vector<double> kappa;  ///< Robin parameters per subdomain
};

/// Interface reduction of the implicit capillary-diffusion step: the
/// nonlinear flux-jump operator over the capillary-pressure trace, solved by
/// matrix-free Newton-GMRes or by Robin waveform relaxation.
class DiffusionInterface {
public:
    DiffusionInterface(const DecomposedDomain& dd,
                       const std::vector<RockType>& rocks);

    void set_outer_saturation(int sub, std::vector<std::pair<int, double>> ghost);

    /// Z(lambda_d) = sum_i r_i(lambda_d).n_i per mortar face; two implicit
    /// subdomain solves per application.
    InterfaceTrace zdtn_apply(const std::vector<CellField>& s_star, double tau,
                              const InterfaceTrace& lambda_d,
                              DiffusionReport* rep = nullptr,
                              std::vector<SubdomainDiffusion::Result>* states =
                                  nullptr) const;

    struct Result {
        InterfaceTrace lambda_d;
        std::vector<SubdomainDiffusion::Result> states;
        DiffusionReport report;
    };

    /// Newton iteration on Z(lambda_d) = 0 with forward-difference
    /// Jacobian-vector products inside restarted GMRes. The preconditioned
    /// variant inverts the interface operator of the problem linearized at
    /// s_star, rebuilt once per call.
    Result newton_gmres(const std::vector<CellField>& s_star, double tau,
                        const DiffusionMethodOptions& opt,
                        const InterfaceTrace* warm = nullptr) const;

    /// Robin waveform relaxation; eta0 warm-starts, eta_out returns the
    /// converged Robin data for the next window.
    Result oswr(const std::vector<CellField>& s_star, double tau,
                const DiffusionMethodOptions& opt,
                const std::vector<std::vector<double>>* eta0 = nullptr,
                std::vector<std::vector<double>>* eta_out = nullptr) const;

    /// Face-averaged capillary trace of the current states, the default
    /// initial guess.
    InterfaceTrace initial_guess(const std::vector<CellField>& s_star) const;

    const DecomposedDomain& domain() const { return *dd_; }
    const SubdomainDiffusion& subdomain(int i) const { return *subs_[i]; }
    std::vector<double> restrict_to(int sub, const InterfaceTrace& v) const;

private:
    const DecomposedDomain* dd_;
    const std::vector<RockType>* rocks_;
    std::vector<std::unique_ptr<SubdomainDiffusion>> subs_;
};

} // namespace splitflow
