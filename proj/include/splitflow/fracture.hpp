#pragma once

#include <vector>

#include "splitflow/advection.hpp"
#include "splitflow/fields.hpp"
#include "splitflow/interface_pressure.hpp"
#include "splitflow/subdomain_darcy.hpp"
#include "splitflow/timegrid.hpp"

namespace splitflow {

/// Codimension-one fracture grid: one cell per interface face, with
/// tangential connectivity inherited from the face lattice. Effective
/// porosity and tangential permeability absorb the aperture.
class FractureGrid {
public:
    struct Edge {
        int cell_a = 0, cell_b = 0;
        double measure = 0.0;  ///< shared edge length (unit thickness in 2D)
        double dist = 0.0;     ///< centroid distance
        int axis = 0;          ///< tangential axis
    };

    FractureGrid(const DecomposedDomain& dd, const RockType& rock);

    int n_cells() const { return static_cast<int>(area_.size()); }
    double area(int c) const { return area_[c]; }  ///< face area = cell measure
    const std::vector<Edge>& edges() const { return edges_; }
    const RockType& rock() const { return *rock_; }
    const DecomposedDomain& domain() const { return *dd_; }

private:
    const DecomposedDomain* dd_;
    const RockType* rock_;
    std::vector<double> area_;
    std::vector<Edge> edges_;
};

/// Tangential pressure solve: second-order operator on the fracture plus the
/// matrix flux-jump coupling, by preconditioned deflated CG. Matrix states
/// are reconstructed from the converged fracture pressure.
struct FracturePressureResult {
    std::vector<double> p_hat;  ///< fracture cell pressures
    std::vector<DarcyState> matrix;
    std::vector<double> u_tangential;  ///< per edge, oriented cell_a -> cell_b
    int cg_iterations = 0;
};

FracturePressureResult fracture_pressure_solve(
    const FractureGrid& fg, InterfacePressure& matrix_ops,
    const FluidParams& fluid, const std::vector<CellField>& s_matrix,
    const std::vector<double>& s_hat, bool gravity, bool precondition,
    double tol, int max_iter);

/// Window advance of the coupled advection: explicit tangential sweeps on the
/// fracture grid with projected matrix exchange fluxes, matrix sweeps with
/// capillary-matched traces, iterated to a window fixed point.
struct FractureAdvectionResult {
    std::vector<CellField> s_matrix_end;
    std::vector<double> s_hat_end;
    std::vector<std::vector<double>> s_hat_path;  ///< per fracture fine interval
    double exchange_mass = 0.0;  ///< matrix mass entering the fracture
    std::vector<double> boundary_mass_out;
    int sweeps = 0;
};

FractureAdvectionResult fracture_advect_window(
    const FractureGrid& fg, const std::vector<RockType>& rocks,
    const FluidParams& fluid, const std::vector<SubdomainAdvection>& adv_matrix,
    const std::vector<DirectionalFlux>& adv_tangential,
    const std::vector<CellField>& s_matrix, const std::vector<double>& s_hat,
    const std::vector<std::map<int, double>>& boundary_ghost,
    const std::vector<FinePartition>& matrix_grids,
    const FinePartition& fracture_grid, double outer_tol, int max_outer);

/// Implicit capillary-diffusion step with the fracture saturations as the
/// interface unknowns, Newton-GMRes with the linearized tangential operator
/// as preconditioner. Matrix saturations update through the embedded solves.
struct FractureDiffusionResult {
    std::vector<double> s_hat_new;
    std::vector<CellField> s_matrix_new;
    std::vector<DarcyState> matrix_states;
    int newton_iterations = 0;
    int gmres_iterations = 0;
};

FractureDiffusionResult fracture_diffusion_solve(
    const FractureGrid& fg, const std::vector<SubdomainDiffusion*>& subs,
    const std::vector<CellField>& s_star_matrix,
    const std::vector<double>& s_hat_star, double tau,
    const NewtonOptions& subdomain_opt, double tol_newton, double tol_gmres,
    int max_newton, int max_gmres);

} // namespace splitflow
