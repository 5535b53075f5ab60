#pragma once

#include <vector>

#include "splitflow/fields.hpp"
#include "splitflow/subdomain_darcy.hpp"

namespace splitflow {

/// Fully assembled (no domain decomposition) solves over all subdomains at
/// once, with rock-interface faces carrying shared trace unknowns. Serves as
/// the reference the iterative interface methods are checked against.
class Monolithic {
public:
    Monolithic(const DecomposedDomain& dd, const std::vector<RockType>& rocks,
               const FluidParams& fluid);

    void set_outer_flux(int sub, std::vector<std::pair<int, double>> outer);
    void set_outer_saturation(int sub, std::vector<std::pair<int, double>> ghost);

    /// Global hybrid pressure solve; the trace unknown on interface faces is
    /// the beta-shifted pressure, continuous across rock boundaries. Pressure
    /// pinned to zero volume-weighted mean over the whole domain.
    struct PressureSolution {
        std::vector<DarcyState> states;
        InterfaceTrace lambda;
    };
    PressureSolution solve_pressure(const std::vector<CellField>& s,
                                    bool gravity) const;

    /// Global implicit capillary-diffusion step; interface faces carry the
    /// shared capillary-pressure trace.
    struct DiffusionSolution {
        std::vector<CellField> s_new;
        std::vector<DarcyState> states;
        InterfaceTrace lambda_d;
        int newton_iterations = 0;
    };
    DiffusionSolution solve_diffusion(const std::vector<CellField>& s_star,
                                      double tau, const NewtonOptions& opt) const;

    int max_cells() const;

private:
    const DecomposedDomain* dd_;
    const std::vector<RockType>* rocks_;
    const FluidParams* fluid_;
    std::vector<std::vector<std::pair<int, double>>> outer_flux_;
    std::vector<std::vector<std::pair<int, double>>> outer_ghost_;
};

} // namespace splitflow
