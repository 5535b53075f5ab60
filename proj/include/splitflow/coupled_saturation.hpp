#pragma once

#include <map>
#include <vector>

#include "splitflow/advection.hpp"
#include "splitflow/fields.hpp"
#include "splitflow/timegrid.hpp"

namespace splitflow {

/// Combined advective-diffusive face flux of the one-step saturation scheme:
/// Godunov advection plus the two-point capillary term.
/// `theta` supplies the interface trace for mortar faces, `ghost` the outer
/// Dirichlet state; interior faces use the two cell states.
double combined_flux(const DecomposedDomain& dd, int sub, const RockType& rock,
                     const SubdomainAdvection& adv, const CellField& s, int face,
                     double theta_or_ghost);

/// Explicit stability bound including the diffusive two-point coefficient:
/// safety * min_K Phi|K| / sum_faces |sigma| (L_adv + 2 K max(alpha')/d).
double combined_cfl(const DecomposedDomain& dd, int sub, const RockType& rock,
                    const SubdomainAdvection& adv, double safety);

struct Scheme2Options {
    double kappa_neg = 1.0;
    double kappa_pos = 1.0;
    double tol = 1e-6;      ///< relative change of the transmitted Robin data
    int max_sweeps = 100;
    double theta_tol = 1e-12;  ///< scalar Robin solve tolerance
    double cfl_safety = 0.9;
};

struct Scheme2WindowResult {
    std::vector<CellField> s_end;
    /// converged interface traces per mortar face and fine interval
    std::vector<std::vector<double>> theta_neg;
    std::vector<std::vector<double>> theta_pos;
    /// outward mass through each mortar face per side over the window
    std::vector<double> mass_out_neg;
    std::vector<double> mass_out_pos;
    /// outward mass through outer inflow/outflow faces, per subdomain
    std::vector<double> boundary_mass_out;
    int sweeps = 0;
    double final_change = 0.0;
    double max_capillary_mismatch = 0.0;  ///< window-averaged across faces
};

/// One coarse window of the one-step saturation solver: explicit sweeps on
/// each subdomain's fine grid, coupled through Robin transmission of the
/// combined flux, iterated as a waveform relaxation over the window.
Scheme2WindowResult oswr_saturation_window(
    const DecomposedDomain& dd, const std::vector<RockType>& rocks,
    const FluidParams& fluid, const std::vector<SubdomainAdvection>& adv,
    const std::vector<CellField>& s0,
    const std::vector<std::map<int, double>>& boundary_ghost,
    const std::vector<FinePartition>& grids, const Scheme2Options& opt);

} // namespace splitflow
