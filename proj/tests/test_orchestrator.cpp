#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "splitflow/orchestrator.hpp"

using namespace splitflow;

namespace {

// unit-scaled two-rock strip with injection along x
SimulationConfig base_config() {
    SimulationConfig cfg;
    cfg.domain.dim = 2;
    cfg.domain.lo = {0, 0, 0};
    cfg.domain.hi = {1.0, 0.5, 1.0};
    cfg.domain.cells = {8, 2, 1};
    cfg.domain.split_axis = 0;
    cfg.domain.splits = {0.5};
    cfg.domain.rock_of_slab = {0, 1};
    cfg.domain.side_tags = {BoundaryTag::Inflow,  BoundaryTag::Outflow,
                            BoundaryTag::NoFlow,  BoundaryTag::NoFlow,
                            BoundaryTag::NoFlow,  BoundaryTag::NoFlow};
    RockConfig r0;
    r0.porosity = 0.3;
    r0.permeability = 0.02;
    r0.vg_n = 2.0;
    r0.vg_alpha = 1.0;
    r0.entry_pressure = 1.0;
    RockConfig r1 = r0;
    r1.porosity = 0.4;
    r1.permeability = 0.004;
    r1.vg_n = 2.8;
    r1.entry_pressure = 1.2;
    cfg.rocks = {r0, r1};
    cfg.fluid.rho_w = 1.5;
    cfg.fluid.rho_n = 1.0;
    cfg.fluid.gravity = {0.0, -1.0, 0.0};
    cfg.gravity = true;
    cfg.total_time = 0.05;
    cfg.n_windows = 5;
    cfg.substeps = {2, 2};
    cfg.initial.value = {0.25, std::nan("")};
    cfg.inflow_saturation = 0.9;
    cfg.inflow_flux = 0.05;
    return cfg;
}

double max_abs_diff(const std::vector<CellField>& a,
                    const std::vector<CellField>& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t k = 0; k < a[i].size(); ++k)
            worst = std::max(worst, std::abs(a[i][k] - b[i][k]));
    return worst;
}

} // namespace

TEST_CASE("capillary-matched initial condition") {
    SimulationConfig cfg = base_config();
    Simulation sim(cfg);
    auto s = sim.initial_saturation();
    const auto& rocks = sim.rocks();
    const double q0 = rocks[0].pc(0.25);
    const double q1 = rocks[1].pc(s[1][0]);
    CHECK(q1 == doctest::Approx(q0).epsilon(1e-9));
}

TEST_CASE("equilibrium stays frozen") {
    SimulationConfig cfg = base_config();
    cfg.gravity = false;
    cfg.fluid.rho_n = cfg.fluid.rho_w;  // no density contrast
    cfg.inflow_flux = 0.0;
    cfg.domain.side_tags = {BoundaryTag::NoFlow, BoundaryTag::NoFlow,
                            BoundaryTag::NoFlow, BoundaryTag::NoFlow,
                            BoundaryTag::NoFlow, BoundaryTag::NoFlow};
    // capillary-matched initial data is the rest state
    Simulation sim(cfg);
    auto s0 = sim.initial_saturation();
    SimulationOutput out = sim.run_scheme1();
    CHECK(max_abs_diff(out.s_at_coarse.back(), s0) < 1e-9);
    for (const auto& w : out.windows) {
        CHECK(w.ledger_error < 1e-12);
        CHECK(w.max_flux_jump < 1e-12);
    }
}

TEST_CASE("scheme 1 bookkeeping on the injection problem") {
    SimulationConfig cfg = base_config();
    Simulation sim(cfg);
    SimulationOutput out = sim.run_scheme1();
    REQUIRE(out.windows.size() == 5);
    for (const auto& w : out.windows) {
        // split order is pressure, advection, diffusion
        REQUIRE(w.call_order.size() == 3);
        CHECK(w.call_order[0] == "pressure");
        CHECK(w.call_order[1] == "advection");
        CHECK(w.call_order[2] == "diffusion");
        // the ledger closes and interface physics hold
        CHECK(w.ledger_error <= 1e-10 * std::max(1.0, w.mass_end));
        CHECK(w.max_flux_jump <=
              10.0 * cfg.tol.cg * std::max(w.rhs_norm, 1e-30));
        CHECK(w.capillary_mismatch_advection < 1e-8);
    }
    // saturations stay admissible and the front moved
    for (const auto& sn : out.s_at_coarse)
        for (const auto& f : sn)
            for (double v : f) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
    CHECK(out.s_at_coarse.back()[0][0] > out.s_at_coarse.front()[0][0] + 1e-3);
}

TEST_CASE("degenerate multirate equals the single-rate window") {
    SimulationConfig cfg = base_config();
    cfg.substeps = {1, 1};
    cfg.n_windows = 3;
    Simulation sim(cfg);
    SimulationOutput conf = sim.run_scheme1();
    SimulationConfig cfg2 = cfg;
    cfg2.advection_mode = AdvectionMode::Nonconforming;
    cfg2.tol.advection_trace = 1e-12;
    cfg2.tol.advection_outer = 1e-12;
    Simulation sim2(cfg2);
    SimulationOutput nonc = sim2.run_scheme1();
    CHECK(max_abs_diff(conf.s_at_coarse.back(), nonc.s_at_coarse.back()) < 1e-8);
}

TEST_CASE("closed-box conservation over many windows, both schemes") {
    SimulationConfig cfg = base_config();
    cfg.inflow_flux = 0.0;
    cfg.domain.side_tags = {BoundaryTag::NoFlow, BoundaryTag::NoFlow,
                            BoundaryTag::NoFlow, BoundaryTag::NoFlow,
                            BoundaryTag::NoFlow, BoundaryTag::NoFlow};
    cfg.initial.value = {0.7, 0.3};  // off equilibrium; gravity drives
    cfg.n_windows = 20;
    cfg.total_time = 0.1;
    cfg.tol.newton_interface = 1e-10;
    cfg.tol.newton_subdomain = 1e-12;
    cfg.tol.cg = 1e-12;

    SUBCASE("scheme 1, nonconforming multirate advection") {
        cfg.advection_mode = AdvectionMode::Nonconforming;
        cfg.substeps = {2, 3};
        cfg.tol.advection_trace = 1e-12;
        cfg.tol.advection_trace_abs = 1e-14;
        cfg.tol.advection_outer = 1e-13;
        Simulation sim(cfg);
        SimulationOutput out = sim.run_scheme1();
        const double m0 = out.windows.front().mass_begin;
        for (const auto& w : out.windows)
            CHECK(std::abs(w.mass_end - w.mass_begin) <= 1e-10 * std::max(1.0, m0));
        CHECK(std::abs(out.windows.back().mass_end - m0) <=
              1e-8 * std::max(1.0, m0));
    }
    SUBCASE("scheme 2") {
        cfg.scheme = SchemeKind::Scheme2;
        cfg.substeps = {6, 6};
        cfg.tol.scheme2 = 1e-11;
        cfg.tol.max_scheme2_sweeps = 500;
        Simulation sim(cfg);
        SimulationOutput out = sim.run_scheme2();
        const double m0 = out.windows.front().mass_begin;
        for (const auto& w : out.windows)
            CHECK(std::abs(w.mass_end - w.mass_begin) <= 1e-10 * std::max(1.0, m0));
        CHECK(std::abs(out.windows.back().mass_end - m0) <=
              1e-8 * std::max(1.0, m0));
    }
}

TEST_CASE("domain decomposition agrees with the monolithic reference") {
    SimulationConfig cfg = base_config();
    cfg.n_windows = 2;
    cfg.substeps = {2, 2};
    cfg.tol.cg = 1e-10;
    cfg.tol.newton_interface = 1e-9;
    cfg.tol.newton_subdomain = 1e-11;

    SUBCASE("identical rocks: the same discrete system") {
        cfg.rocks[1] = cfg.rocks[0];
        Simulation sim(cfg);
        SimulationOutput dd_out = sim.run_scheme1();
        SimulationOutput mono = sim.monolithic_reference();
        CHECK(max_abs_diff(dd_out.s_at_coarse.back(), mono.s_at_coarse.back()) <
              1e-7);
    }
    SUBCASE("heterogeneous rocks within combined solver tolerances") {
        Simulation sim(cfg);
        SimulationOutput dd_out = sim.run_scheme1();
        SimulationOutput mono = sim.monolithic_reference();
        CHECK(max_abs_diff(dd_out.s_at_coarse.back(), mono.s_at_coarse.back()) <
              1e-5);
    }
}

TEST_CASE("schemes agree within discretization error on a 1D problem") {
    SimulationConfig cfg = base_config();
    cfg.domain.cells = {16, 1, 1};
    cfg.domain.hi = {1.0, 1.0, 1.0};
    cfg.fluid.gravity = {0, 0, 0};
    cfg.gravity = false;
    cfg.rocks[0].permeability = 0.01;
    cfg.rocks[1].permeability = 0.005;
    cfg.total_time = 0.4;
    cfg.n_windows = 16;
    cfg.substeps = {4, 4};
    Simulation s1(cfg);
    SimulationOutput o1 = s1.run_scheme1();
    SimulationConfig cfg2 = cfg;
    cfg2.scheme = SchemeKind::Scheme2;
    cfg2.tol.scheme2 = 1e-9;
    cfg2.tol.max_scheme2_sweeps = 300;
    Simulation s2(cfg2);
    SimulationOutput o2 = s2.run_scheme2();
    // operator-splitting difference shrinks with the window size; at this
    // resolution the states already agree to a few percent
    CHECK(max_abs_diff(o1.s_at_coarse.back(), o2.s_at_coarse.back()) < 0.05);
}

TEST_CASE("saturation error norm") {
    SimulationConfig cfg = base_config();
    cfg.n_windows = 2;
    Simulation sim(cfg);
    SimulationOutput a = sim.run_scheme1();
    SUBCASE("identical outputs have zero distance") {
        CHECK(error_norm(a, a) == 0.0);
    }
    SUBCASE("constant offset integrates to delta * sqrt(T * volume)") {
        SimulationOutput b = a;
        const double delta = 0.01;
        for (auto& sn : b.s_at_coarse)
            for (auto& f : sn)
                for (auto& v : f) v += delta;
        const double vol = a.domain->total_volume();
        CHECK(error_norm(a, b) ==
              doctest::Approx(delta * std::sqrt(cfg.total_time * vol)).epsilon(1e-12));
    }
}
