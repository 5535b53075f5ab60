#pragma once

#include <map>
#include <vector>

#include "splitflow/constitutive.hpp"
#include "splitflow/fields.hpp"
#include "splitflow/geometry.hpp"
#include "splitflow/timegrid.hpp"

namespace splitflow {

/// Directional advective flux through one face:
/// f_a(s) = f(s) * un + f_g(s) * gn along a fixed normal, together with the
/// location of its single interior extremum.
struct DirectionalFlux {
    std::function<double(double)> fa;
    double un = 0.0;  ///< frozen total normal flux
    double gn = 0.0;  ///< gravity normal component
    FluxExtremum ex;

    double operator()(double s) const { return fa(s); }
};

DirectionalFlux make_directional_flux(const RockType& rock,
                                      const FluidParams& fluid, double un,
                                      double gn);

/// Arbitrary single-extremum flux shape (synthetic profiles, reduced models).
DirectionalFlux make_directional_flux(std::function<double(double)> fa,
                                      double un = 0.0, double gn = 0.0);

/// Godunov numerical flux for a single-extremum flux function: the exact
/// Riemann extremum over the state interval in closed form.
template <class F>
double godunov_extremal_flux(F&& fa, const FluxExtremum& ex, double a, double b) {
    if (ex.kind == FluxExtremum::Kind::Maximum)
        return std::min(fa(std::min(a, ex.xi)), fa(std::max(b, ex.xi)));
    return std::max(fa(std::max(a, ex.xi)), fa(std::min(b, ex.xi)));
}

double godunov_flux(const DirectionalFlux& flux, double a, double b);

/// Per-subdomain face flux functions for one coarse window. Interior faces
/// are oriented canonically; boundary and interface faces outward.
struct SubdomainAdvection {
    std::vector<DirectionalFlux> face;
};

SubdomainAdvection build_advection(const DecomposedDomain& dd, int sub,
                                   const RockType& rock, const FluidParams& fluid,
                                   const FaceFluxField& total_flux);

/// Largest stable explicit step from the sampled Lipschitz bounds of the face
/// fluxes. Returns +infinity when every face flux is constant.
double cfl_step(const DecomposedDomain& dd, int sub, const RockType& rock,
                const SubdomainAdvection& adv, double safety);

/// One explicit Godunov step. `boundary_ghost` carries ghost saturations for
/// inflow/outflow faces (absent faces are no-flow); `mortar_outward_flux`
/// gives the interface flux per subdomain mortar slot. Throws if the update
/// leaves [0,1] beyond roundoff.
CellField explicit_step(const DecomposedDomain& dd, int sub, const RockType& rock,
                        const SubdomainAdvection& adv, const CellField& s,
                        const std::map<int, double>& boundary_ghost,
                        const std::vector<double>& mortar_outward_flux,
                        double tau);

/// Interface trace pair for one face at one time level: both side values
/// derive from the single capillary unknown q, so capillary continuity holds
/// by construction and the flux transmission is imposed exactly.
struct ConformingTrace {
    double theta_neg = 0.0;
    double theta_pos = 0.0;
    double q = 0.0;         ///< shared capillary pressure
    double flux_neg = 0.0;  ///< outward flux on the negative side (= -positive side)
};

ConformingTrace interface_conforming(const RockType& rock_neg,
                                     const RockType& rock_pos,
                                     const DirectionalFlux& flux_neg,
                                     const DirectionalFlux& flux_pos,
                                     double s_neg, double s_pos,
                                     double psi_tol = 1e-10);

struct TraceNewtonOptions {
    double rtol = 1e-4;    ///< relative residual reduction
    double atol = 1e-12;   ///< absolute floor, scaled by the transmitted-data magnitude
    int max_iter = 60;
    int max_halvings = 8;
};

/// Space-time Robin coupling of one interface face across two nonconforming
/// fine grids. Cell-state trajectories are frozen; the unknowns are the trace
/// values per fine interval on either side.
struct NonconformingTraceResult {
    std::vector<double> theta_neg;  ///< per fine interval of grid_neg
    std::vector<double> theta_pos;
    int newton_iterations = 0;
};

NonconformingTraceResult interface_nonconforming(
    const RockType& rock_neg, const RockType& rock_pos,
    const DirectionalFlux& flux_neg, const DirectionalFlux& flux_pos,
    const std::vector<double>& s_neg_path, const std::vector<double>& s_pos_path,
    const FinePartition& grid_neg, const FinePartition& grid_pos, double kappa_neg,
    double kappa_pos, const TraceNewtonOptions& opt,
    const std::vector<double>* warm_neg = nullptr,
    const std::vector<double>* warm_pos = nullptr);

enum class AdvectionMode { Conforming, Nonconforming };

struct AdvectWindowOptions {
    AdvectionMode mode = AdvectionMode::Conforming;
    double kappa_neg = 1.0;  ///< Robin parameters of the nonconforming coupling
    double kappa_pos = 1.0;
    TraceNewtonOptions trace;
    double outer_tol = 1e-10;  ///< fixed-point tolerance on trace changes
    int max_outer = 60;
    double cfl_safety = 0.9;
};

struct AdvectionWindowResult {
    std::vector<CellField> s_end;
    std::vector<std::vector<CellField>> s_path;  ///< [sub][0..N] states
    /// trace histories per mortar face: [face][interval]
    std::vector<std::vector<double>> theta_neg;
    std::vector<std::vector<double>> theta_pos;
    /// outward advected mass per mortar face and side over the window
    std::vector<double> mass_out_neg;
    std::vector<double> mass_out_pos;
    /// outward advected mass through outer inflow/outflow faces, per subdomain
    std::vector<double> boundary_mass_out;
    double max_capillary_mismatch = 0.0;  ///< pointwise (conforming) or
                                          ///< window-averaged (nonconforming)
    int trace_newton_iterations = 0;
    int outer_sweeps = 0;
};

/// Advances all subdomains over one coarse window with frozen total fluxes.
/// In nonconforming mode the per-face space-time trace systems and the
/// explicit subdomain sweeps are iterated to a fixed point (cell states
/// frozen at their latest sweep values during each trace solve).
AdvectionWindowResult advect_window(
    const DecomposedDomain& dd, const std::vector<RockType>& rocks,
    const FluidParams& fluid, const std::vector<SubdomainAdvection>& adv,
    const std::vector<CellField>& s0,
    const std::vector<std::map<int, double>>& boundary_ghost,
    const std::vector<FinePartition>& grids, const AdvectWindowOptions& opt);

} // namespace splitflow
