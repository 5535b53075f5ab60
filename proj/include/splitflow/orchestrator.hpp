#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "splitflow/advection.hpp"
#include "splitflow/coupled_saturation.hpp"
#include "splitflow/diffusion_interface.hpp"
#include "splitflow/interface_pressure.hpp"
#include "splitflow/monolithic.hpp"

namespace splitflow {

enum class SchemeKind { Scheme1, Scheme2 };
enum class PressureMethod { Cg, CgNN, Oswr };
enum class DiffusionMethod { NewtonGmres, NewtonGmresPrecond, Oswr };

struct RockConfig {
    double porosity = 0.25;
    double permeability = 1.0;
    double vg_n = 2.8;
    double vg_alpha = 1.0;
    double entry_pressure = -1.0;  ///< <0: use vg_alpha*sqrt(porosity/K)
    CapillaryOrientation orientation = CapillaryOrientation::Decreasing;
    int table_resolution = 4096;
    double eps_s = 1e-6;
};

struct Tolerances {
    double cg = 1e-6;
    double oswr = 1e-6;
    double newton_interface = 1e-4;
    double newton_interface_abs = 0.0;
    double gmres_interface = 1e-3;
    double newton_subdomain = 1e-4;
    double newton_subdomain_abs = 0.0;
    double advection_trace = 1e-4;
    double advection_trace_abs = 1e-12;
    double advection_outer = 1e-10;
    double scheme2 = 1e-6;
    int max_cg = 500;
    int max_oswr = 200;
    int max_newton = 50;
    int max_gmres = 200;
    int gmres_restart = 30;
    int max_scheme2_sweeps = 100;
    int max_advection_outer = 60;
};

/// Initial saturation: one value per slab; NaN entries take the saturation
/// whose capillary pressure matches the reference slab's value. An optional
/// step overrides one subdomain with `left` below `pos` along `axis`.
struct InitialSpec {
    std::vector<double> value;
    int match_reference = 0;
    int step_subdomain = -1;
    int step_axis = 0;
    double step_pos = 0.0;
    double step_left = 0.0;
};

struct FractureConfig {
    RockConfig rock;            ///< capillary/mobility curves of the fill
    double porosity_eff = 0.3;  ///< aperture absorbed
    double permeability_eff = 100.0;
    int substeps = 1;           ///< advection substeps on the fracture grid
};

struct SimulationConfig {
    std::string preset = "custom";
    DecompositionSpec domain;
    std::vector<RockConfig> rocks;
    FluidParams fluid;
    bool gravity = true;
    double total_time = 1.0;
    int n_windows = 1;
    std::vector<int> substeps;  ///< advection substeps per subdomain
    SchemeKind scheme = SchemeKind::Scheme1;
    PressureMethod pressure_method = PressureMethod::CgNN;
    DiffusionMethod diffusion_method = DiffusionMethod::NewtonGmresPrecond;
    AdvectionMode advection_mode = AdvectionMode::Conforming;
    std::vector<double> robin_gamma;       ///< empty: sqrt(M(s)) face-averaged
    std::vector<double> kappa;             ///< empty: diffusivity-scaled
    std::vector<double> kappa_advection;   ///< empty: flux-Lipschitz-scaled
    std::vector<double> nn_weights;        ///< empty: halves
    Tolerances tol;
    double cfl_safety = 0.9;
    InitialSpec initial;
    double inflow_saturation = 1.0;
    double inflow_flux = 0.0;  ///< injected total normal velocity magnitude
    std::vector<double> snapshot_times;
    std::optional<FractureConfig> fracture;
};

struct WindowRecord {
    int index = 0;
    double t_begin = 0.0, t_end = 0.0;
    PressureSolveReport pressure;
    DiffusionReport diffusion;
    int advection_outer = 0;
    int advection_trace_newton = 0;
    int scheme2_sweeps = 0;
    double mass_begin = 0.0, mass_end = 0.0;
    double boundary_net_influx = 0.0;
    double ledger_error = 0.0;  ///< |mass change - net influx|
    double max_flux_jump = 0.0;
    double rhs_norm = 0.0;  ///< interface rhs norm scaling the jump bound
    double capillary_mismatch_advection = 0.0;
    double capillary_mismatch_diffusion = 0.0;
    std::vector<std::string> call_order;
};

struct SimulationOutput {
    std::shared_ptr<const DecomposedDomain> domain;
    std::shared_ptr<const std::vector<RockType>> rocks;
    std::vector<double> coarse_times;
    std::vector<std::vector<CellField>> s_at_coarse;  ///< [window][sub], incl t=0
    std::vector<WindowRecord> windows;
    std::vector<double> snapshot_times;
    std::vector<std::vector<CellField>> snapshot_s;
    std::vector<std::vector<CellField>> snapshot_p;
    std::vector<std::vector<FaceFluxField>> snapshot_u;
    /// codim-1 fracture saturations per coarse time, when the reduced
    /// fracture model is active
    std::vector<std::vector<double>> fracture_s_at_coarse;
};

/// Owns the assembled problem and drives the split time loops.
class Simulation {
public:
    explicit Simulation(const SimulationConfig& cfg);

    SimulationOutput run() const;  ///< dispatch on scheme / fracture model
    SimulationOutput run_scheme1() const;
    SimulationOutput run_scheme2() const;

    /// Fully assembled single-system reference on the same mesh: global
    /// mixed pressure solves, conforming single-rate saturation stepping and
    /// the global implicit diffusion step. Rejects instances beyond desk
    /// scale.
    SimulationOutput monolithic_reference() const;

    const DecomposedDomain& domain() const { return *domain_; }
    const std::vector<RockType>& rocks() const { return *rocks_; }
    const SimulationConfig& config() const { return cfg_; }
    std::vector<CellField> initial_saturation() const;

private:
    friend SimulationOutput run_fracture_model(const Simulation& sim);
    std::vector<std::pair<int, double>> outer_flux_table(int sub) const;
    std::map<int, double> boundary_ghost_table(int sub,
                                               const CellField& s_begin) const;
    std::vector<double> auto_gamma(const std::vector<CellField>& s) const;
    std::vector<double> auto_kappa(const std::vector<CellField>& s,
                                   const std::vector<SubdomainAdvection>* adv) const;
    std::pair<double, double> auto_kappa_advection(
        const std::vector<SubdomainAdvection>& adv) const;
    void record_mass(WindowRecord& rec, const std::vector<CellField>& s,
                     bool begin) const;
    double total_mass(const std::vector<CellField>& s) const;

    SimulationConfig cfg_;
    std::shared_ptr<DecomposedDomain> domain_;
    std::shared_ptr<std::vector<RockType>> rocks_;
};

/// Saturation error sqrt(sum_n tau_n sum_K |K| (s_a - s_b)^2) with `b`
/// evaluated at `a`'s coarse times (b's grid must contain them).
double error_norm(const SimulationOutput& a, const SimulationOutput& b);

/// Same norm over the codim-1 fracture states.
double fracture_error_norm(const SimulationOutput& a, const SimulationOutput& b);

/// Reduced-fracture time loop (codimension-one interface flow coupled to the
/// two matrix subdomains); defined with the fracture solvers.
SimulationOutput run_fracture_model(const Simulation& sim);

} // namespace splitflow
