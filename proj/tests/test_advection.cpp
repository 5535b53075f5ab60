#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "oracle_utils.hpp"
#include "splitflow/advection.hpp"

using namespace splitflow;

namespace {

DecomposedDomain strip(std::array<int, 3> cells, std::array<double, 3> hi,
                       double split) {
    DecompositionSpec sp;
    sp.dim = 2;
    sp.lo = {0, 0, 0};
    sp.hi = hi;
    sp.cells = cells;
    sp.split_axis = 0;
    sp.splits = {split};
    sp.rock_of_slab = {0, 1};
    return DecomposedDomain::build(sp);
}

RockType rock_a() { return RockType(0.3, 1.0, VanGenuchtenParams::make(2.0, 1.0), 1.0); }
RockType rock_b() { return RockType(0.3, 1.0, VanGenuchtenParams::make(2.8, 1.5), 1.4); }

FluidParams fluid_g(double rho_n = 800.0) {
    FluidParams f;
    f.rho_w = 1000.0;
    f.rho_n = rho_n;
    f.gravity = {0.0, -9.81, 0.0};
    return f;
}

} // namespace

TEST_CASE("Godunov flux: consistency and worked bell values") {
    auto bell = make_directional_flux([](double s) { return s * (1.0 - s); });
    CHECK(godunov_flux(bell, 0.37, 0.37) == doctest::Approx(0.37 * 0.63));
    CHECK(godunov_flux(bell, 0.2, 0.8) == doctest::Approx(0.16).epsilon(1e-12));
    CHECK(godunov_flux(bell, 0.8, 0.2) == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("Godunov flux equals the brute-force Riemann extremum") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RockType ra = rock_a();
    FluidParams fl = fluid_g();

    std::vector<DirectionalFlux> shapes;
    shapes.push_back(make_directional_flux([](double s) { return s * (1 - s); }));
    shapes.push_back(make_directional_flux([](double s) { return -s * (1 - s); }));
    shapes.push_back(make_directional_flux([](double s) { return 0.7 * s; }));
    shapes.push_back(make_directional_flux([](double s) { return -0.4 * s; }));
    shapes.push_back(make_directional_flux(
        [](double s) { return std::sin(3.0 * s) * (1 - s) * 0.5; }));
    shapes.push_back(make_directional_flux(ra, fl, 1.0, 0.0));
    shapes.push_back(make_directional_flux(ra, fl, -1.0, 0.0));
    shapes.push_back(make_directional_flux(ra, fl, 0.05, 1.0));
    shapes.push_back(make_directional_flux(ra, fl, 0.05, -1.0));

    for (const auto& sh : shapes) {
        for (int rep = 0; rep < 1000; ++rep) {
            const double a = u(rng), b = u(rng);
            const double got = godunov_flux(sh, a, b);
            const double want = oracle::riemann_flux(sh.fa, a, b);
            CHECK(std::abs(got - want) <= 1e-8);
        }
    }
}

TEST_CASE("stable step bound") {
    DecomposedDomain dd = strip({4, 2, 1}, {1, 1, 1}, 0.5);
    RockType ra = rock_a();
    FluidParams fl = fluid_g();

    SUBCASE("zero flux everywhere is unbounded") {
        FluidParams still = fl;
        still.rho_n = still.rho_w;
        still.gravity = {0, 0, 0};
        FaceFluxField zero(dd.mesh(0).faces.size(), 0.0);
        auto adv = build_advection(dd, 0, ra, still, zero);
        CHECK(std::isinf(cfl_step(dd, 0, ra, adv, 0.9)));
    }
    SUBCASE("matches an independent enumeration of the bound") {
        FaceFluxField un(dd.mesh(0).faces.size(), 0.0);
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (auto& v : un) v = u(rng);
        auto adv = build_advection(dd, 0, ra, fl, un);
        const double got = cfl_step(dd, 0, ra, adv, 0.8);

        const StructuredMesh& m = dd.mesh(0);
        double worst = std::numeric_limits<double>::infinity();
        for (int k = 0; k < m.n_cells; ++k) {
            double denom = 0.0;
            for (int ld = 0; ld < 2 * m.dim; ++ld) {
                const int f = m.cell_faces[k][ld];
                if (m.faces[f].kind == FaceKind::Boundary &&
                    m.faces[f].tag == BoundaryTag::NoFlow)
                    continue;
                double lip = 0.0;
                for (int q = 0; q < 4096; ++q) {
                    const double s0 = q / 4096.0, s1 = (q + 1) / 4096.0;
                    lip = std::max(lip, std::abs(adv.face[f](s1) - adv.face[f](s0)) *
                                            4096.0);
                }
                denom += m.faces[f].area * lip;
            }
            if (denom > 0.0)
                worst = std::min(worst, ra.porosity() * m.cell_volume / denom);
        }
        CHECK(got == doctest::Approx(0.8 * worst).epsilon(5e-2));
    }
}

TEST_CASE("explicit step: equilibrium, exact linear transport, conservation") {
    SUBCASE("constant state with divergence-free flux is stationary") {
        DecomposedDomain dd = strip({4, 2, 1}, {1, 1, 1}, 0.5);
        RockType ra = rock_a();
        FluidParams fl = fluid_g();
        fl.gravity = {0, 0, 0};
        const StructuredMesh& m = dd.mesh(0);
        FaceFluxField un(m.faces.size(), 0.0);
        std::map<int, double> ghost;
        const double sbar = 0.42;
        for (size_t f = 0; f < m.faces.size(); ++f) {
            if (m.faces[f].axis != 0) continue;
            un[f] = 0.3;
            if (m.faces[f].kind == FaceKind::Boundary)
                ghost[static_cast<int>(f)] = sbar;
        }
        auto adv = build_advection(dd, 0, ra, fl, un);
        CellField s(m.n_cells, sbar);
        const double phi_out =
            godunov_flux(adv.face[dd.subdomain_mortars(0)[0].second], sbar, sbar);
        std::vector<double> mflux(dd.subdomain_mortars(0).size(), phi_out);
        CellField s2 = explicit_step(dd, 0, ra, adv, s, ghost, mflux, 0.01);
        for (double v : s2) CHECK(v == doctest::Approx(sbar).epsilon(1e-14));
    }
    SUBCASE("linear flux shifts a profile one cell per characteristic step") {
        DecomposedDomain dd = strip({8, 1, 1}, {8, 1, 1}, 4.0);
        RockType ra = rock_a();
        const StructuredMesh& m = dd.mesh(0);
        const double c = 0.5;
        SubdomainAdvection adv;
        adv.face.resize(m.faces.size());
        for (size_t f = 0; f < m.faces.size(); ++f) {
            const Face& fc = m.faces[f];
            double un = (fc.axis == 0) ? c : 0.0;
            if (fc.kind != FaceKind::Interior) {
                const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
                un *= fc.sign_for(k);
            }
            adv.face[f] = make_directional_flux(
                [un](double s) { return un * s; }, un, 0.0);
        }
        CellField s = {1.0, 1.0, 0.5, 0.0};  // 4 cells in the left slab
        const double tau = ra.porosity() * m.h[0] / c;
        std::map<int, double> ghost;
        for (size_t f = 0; f < m.faces.size(); ++f)
            if (m.faces[f].kind == FaceKind::Boundary && m.faces[f].axis == 0)
                ghost[static_cast<int>(f)] = 1.0;  // upstream state
        // outflow through the interface: upwind flux c * s_last
        std::vector<double> mflux = {c * s.back()};
        CellField s2 = explicit_step(dd, 0, ra, adv, s, ghost, mflux, tau);
        CHECK(s2[0] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(s2[1] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(s2[2] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(s2[3] == doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("closed box conserves mass and respects the maximum principle") {
        DecomposedDomain dd = strip({6, 4, 1}, {1, 1, 1}, 0.5);
        RockType ra = rock_a();
        FluidParams fl = fluid_g();
        const StructuredMesh& m = dd.mesh(0);
        FaceFluxField un(m.faces.size(), 0.0);  // only gravity drives
        auto adv = build_advection(dd, 0, ra, fl, un);
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> u(0.1, 0.9);
        CellField s(m.n_cells);
        for (auto& v : s) v = u(rng);
        const double smin = *std::min_element(s.begin(), s.end());
        const double smax = *std::max_element(s.begin(), s.end());
        std::vector<double> mflux(dd.subdomain_mortars(0).size(), 0.0);
        const double tau = 0.5 * cfl_step(dd, 0, ra, adv, 1.0);
        double m0 = 0.0;
        for (double v : s) m0 += v;
        CellField cur = s;
        for (int step = 0; step < 20; ++step) {
            cur = explicit_step(dd, 0, ra, adv, cur, {}, mflux, tau);
            for (double v : cur) {
                CHECK(v >= smin - 1e-12);
                CHECK(v <= smax + 1e-12);
            }
        }
        double m1 = 0.0;
        for (double v : cur) m1 += v;
        CHECK(m1 == doctest::Approx(m0).epsilon(1e-14));
    }
    SUBCASE("monotonicity: raising an input never lowers an output") {
        DecomposedDomain dd = strip({4, 2, 1}, {1, 1, 1}, 0.5);
        RockType ra = rock_a();
        FluidParams fl = fluid_g();
        const StructuredMesh& m = dd.mesh(0);
        FaceFluxField un(m.faces.size(), 0.0);
        std::mt19937 rng(8);
        std::uniform_real_distribution<double> uu(-0.5, 0.5);
        for (auto& v : un) v = uu(rng);
        auto adv = build_advection(dd, 0, ra, fl, un);
        std::uniform_real_distribution<double> us(0.2, 0.8);
        CellField s(m.n_cells);
        for (auto& v : s) v = us(rng);
        std::vector<double> mflux(dd.subdomain_mortars(0).size(), 0.0);
        const double tau = 0.8 * cfl_step(dd, 0, ra, adv, 1.0);
        CellField base = explicit_step(dd, 0, ra, adv, s, {}, mflux, tau);
        for (int k = 0; k < m.n_cells; ++k) {
            CellField sp = s;
            sp[k] = std::min(1.0, sp[k] + 0.05);
            CellField up = explicit_step(dd, 0, ra, adv, sp, {}, mflux, tau);
            for (int j = 0; j < m.n_cells; ++j) CHECK(up[j] >= base[j] - 1e-13);
        }
    }
}

TEST_CASE("conforming interface trace") {
    RockType ra = rock_a(), rb = rock_b();
    FluidParams fl = fluid_g();

    SUBCASE("identical rocks and states: trace equals the state") {
        auto f1 = make_directional_flux(ra, fl, 0.4, 0.2);
        auto f2 = make_directional_flux(ra, fl, -0.4, -0.2);
        ConformingTrace tr = interface_conforming(ra, ra, f1, f2, 0.55, 0.55);
        CHECK(tr.theta_neg == doctest::Approx(0.55).epsilon(1e-9));
        CHECK(tr.theta_pos == doctest::Approx(0.55).epsilon(1e-9));
        CHECK(std::abs(tr.flux_neg + godunov_flux(f2, 0.55, tr.theta_pos)) < 1e-10);
    }
    SUBCASE("distinct curves against a bisection oracle") {
        auto f1 = make_directional_flux(ra, fl, 0.7, 0.1);
        auto f2 = make_directional_flux(rb, fl, -0.7, -0.1);
        const double sK = 0.62, sL = 0.3;
        ConformingTrace tr = interface_conforming(ra, rb, f1, f2, sK, sL, 1e-12);
        auto psi = [&](double q) {
            return godunov_flux(f1, sK, ra.pc_inverse(q)) +
                   godunov_flux(f2, sL, rb.pc_inverse(q));
        };
        auto [lo1, hi1] = ra.pc_range();
        auto [lo2, hi2] = rb.pc_range();
        const double q_oracle =
            oracle::bisect(psi, std::max(lo1, lo2), std::min(hi1, hi2), 1e-13);
        CHECK(tr.q == doctest::Approx(q_oracle).epsilon(1e-9));
        // capillary continuity by construction
        CHECK(std::abs(ra.pc(tr.theta_neg) - rb.pc(tr.theta_pos)) < 1e-9);
        // monotone root function over the bracket
        double prev = psi(std::max(lo1, lo2) + 1e-9);
        bool monotone = true;
        for (int i = 1; i <= 100; ++i) {
            const double q = std::max(lo1, lo2) + 1e-9 +
                             (std::min(hi1, hi2) - std::max(lo1, lo2) - 2e-9) * i / 100.0;
            const double v = psi(q);
            if (v < prev - 1e-12 * std::max(1.0, std::abs(prev))) monotone = false;
            prev = v;
        }
        CHECK(monotone);
    }
}

TEST_CASE("nonconforming interface trace") {
    RockType ra = rock_a(), rb = rock_b();
    const double kap = 0.8;

    SUBCASE("constant states reproduce the conforming answer in time") {
        FluidParams fl = fluid_g();
        auto f1 = make_directional_flux(ra, fl, 0.5, 0.1);
        auto f2 = make_directional_flux(rb, fl, -0.5, -0.1);
        FinePartition g1 = FinePartition::uniform(0, 1, 2);
        FinePartition g2 = FinePartition::uniform(0, 1, 3);
        std::vector<double> sK(2, 0.6), sL(3, 0.35);
        TraceNewtonOptions opt;
        opt.rtol = 1e-12;
        auto tr = interface_nonconforming(ra, rb, f1, f2, sK, sL, g1, g2, kap,
                                          kap, opt);
        ConformingTrace ct = interface_conforming(ra, rb, f1, f2, 0.6, 0.35, 1e-12);
        for (double t : tr.theta_neg)
            CHECK(t == doctest::Approx(ct.theta_neg).epsilon(1e-7));
        for (double t : tr.theta_pos)
            CHECK(t == doctest::Approx(ct.theta_pos).epsilon(1e-7));
    }
    SUBCASE("2-vs-3 interval grids against a dense space-time Newton oracle") {
        // synthetic monotone fluxes keep the oracle independent of the rock
        // coefficient code
        auto f1 = make_directional_flux([](double s) { return 0.6 * s * s; });
        auto f2 = make_directional_flux([](double s) { return -0.5 * s; });
        FinePartition g1 = FinePartition::uniform(0, 1, 2);
        FinePartition g2 = FinePartition::uniform(0, 1, 3);
        std::vector<double> sK = {0.55, 0.65}, sL = {0.3, 0.4, 0.5};
        TraceNewtonOptions opt;
        opt.rtol = 1e-13;
        auto tr = interface_nonconforming(ra, rb, f1, f2, sK, sL, g1, g2, kap,
                                          kap, opt);

        // oracle: assemble the same Robin equations from the overlap measures
        // and solve the full 5-unknown system by damped Newton with a
        // numerical Jacobian
        const double sgn = -1.0;  // decreasing capillary curves
        auto resid = [&](const Eigen::VectorXd& x) {
            Eigen::VectorXd R(5);
            auto th1 = [&](int l) { return x(l); };
            auto th2 = [&](int m) { return x(2 + m); };
            // overlaps of uniform 2 vs 3 grids on [0,1]
            const double ov[2][3] = {{1.0 / 3.0, 1.0 / 6.0, 0.0},
                                     {0.0, 1.0 / 6.0, 1.0 / 3.0}};
            for (int l = 0; l < 2; ++l) {
                double proj = 0.0;
                for (int m = 0; m < 3; ++m)
                    proj += ov[l][m] * (godunov_flux(f2, sL[m], th2(m)) +
                                        sgn * kap * rb.pc(th2(m)));
                R(l) = -godunov_flux(f1, sK[l], th1(l)) + sgn * kap * ra.pc(th1(l)) -
                       proj / 0.5;
            }
            for (int m = 0; m < 3; ++m) {
                double proj = 0.0;
                for (int l = 0; l < 2; ++l)
                    proj += ov[l][m] * (godunov_flux(f1, sK[l], th1(l)) +
                                        sgn * kap * ra.pc(th1(l)));
                R(2 + m) = -godunov_flux(f2, sL[m], th2(m)) +
                           sgn * kap * rb.pc(th2(m)) - proj / (1.0 / 3.0);
            }
            return R;
        };
        Eigen::VectorXd x(5);
        x << 0.55, 0.65, 0.3, 0.4, 0.5;
        for (int it = 0; it < 100; ++it) {
            Eigen::VectorXd R = resid(x);
            if (R.norm() < 1e-13) break;
            Eigen::MatrixXd J(5, 5);
            for (int j = 0; j < 5; ++j) {
                Eigen::VectorXd xp = x, xm = x;
                xp(j) += 1e-7;
                xm(j) -= 1e-7;
                J.col(j) = (resid(xp) - resid(xm)) / 2e-7;
            }
            x += J.fullPivLu().solve(-R);
        }
        for (int l = 0; l < 2; ++l)
            CHECK(tr.theta_neg[l] == doctest::Approx(x(l)).epsilon(1e-7));
        for (int m = 0; m < 3; ++m)
            CHECK(tr.theta_pos[m] == doctest::Approx(x(2 + m)).epsilon(1e-7));
    }
}

TEST_CASE("window advance") {
    DecomposedDomain dd = strip({8, 2, 1}, {1, 1, 1}, 0.5);
    std::vector<RockType> rocks = {rock_a(), rock_b()};
    FluidParams fl = fluid_g();

    // gravity-driven closed box
    std::vector<SubdomainAdvection> adv;
    for (int i = 0; i < 2; ++i)
        adv.push_back(build_advection(dd, i, rocks[dd.rock_index(i)], fl,
                                      FaceFluxField(dd.mesh(i).faces.size(), 0.0)));
    std::vector<CellField> s0;
    for (int i = 0; i < 2; ++i) {
        CellField s(dd.mesh(i).n_cells, 0.3 + 0.1 * i);
        s[0] = 0.7;
        s0.push_back(s);
    }
    std::vector<std::map<int, double>> ghost(2);
    const double tau_cfl = std::min(cfl_step(dd, 0, rocks[0], adv[0], 0.5),
                                    cfl_step(dd, 1, rocks[1], adv[1], 0.5));

    SUBCASE("zero total flux and no gravity freezes the state") {
        FluidParams still = fl;
        still.gravity = {0, 0, 0};
        still.rho_n = still.rho_w;
        std::vector<SubdomainAdvection> adv0;
        for (int i = 0; i < 2; ++i)
            adv0.push_back(
                build_advection(dd, i, rocks[dd.rock_index(i)], still,
                                FaceFluxField(dd.mesh(i).faces.size(), 0.0)));
        AdvectWindowOptions opt;
        std::vector<FinePartition> grids = {FinePartition::uniform(0, 1, 2),
                                            FinePartition::uniform(0, 1, 2)};
        auto res = advect_window(dd, rocks, still, adv0, s0, ghost, grids, opt);
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < dd.mesh(i).n_cells; ++k)
                CHECK(res.s_end[i][k] == doctest::Approx(s0[i][k]).epsilon(1e-13));
    }
    SUBCASE("conforming window conserves mass and balances the interface") {
        AdvectWindowOptions opt;
        const int N = 4;
        const double T = 0.9 * N * tau_cfl;
        std::vector<FinePartition> grids = {FinePartition::uniform(0, T, N),
                                            FinePartition::uniform(0, T, N)};
        auto res = advect_window(dd, rocks, fl, adv, s0, ghost, grids, opt);
        double dm[2];
        for (int i = 0; i < 2; ++i) {
            dm[i] = 0.0;
            for (int k = 0; k < dd.mesh(i).n_cells; ++k)
                dm[i] += rocks[dd.rock_index(i)].porosity() * dd.mesh(i).cell_volume *
                         (res.s_end[i][k] - s0[i][k]);
        }
        double mout[2] = {0.0, 0.0};
        for (int m = 0; m < dd.n_mortar(); ++m) {
            mout[0] += res.mass_out_neg[m];
            mout[1] += res.mass_out_pos[m];
            CHECK(res.mass_out_neg[m] == doctest::Approx(-res.mass_out_pos[m]));
        }
        CHECK(dm[0] == doctest::Approx(-mout[0]).epsilon(1e-12));
        CHECK(dm[1] == doctest::Approx(-mout[1]).epsilon(1e-12));
        CHECK(std::abs(dm[0] + dm[1]) < 1e-14);
        CHECK(res.max_capillary_mismatch < 1e-8);
    }
    SUBCASE("nonconforming window matches conforming on equal grids") {
        AdvectWindowOptions opt;
        const int N = 3;
        const double T = 0.9 * N * tau_cfl;
        std::vector<FinePartition> grids = {FinePartition::uniform(0, T, N),
                                            FinePartition::uniform(0, T, N)};
        auto ref = advect_window(dd, rocks, fl, adv, s0, ghost, grids, opt);
        AdvectWindowOptions opt2 = opt;
        opt2.mode = AdvectionMode::Nonconforming;
        opt2.trace.rtol = 1e-12;
        opt2.outer_tol = 1e-12;
        auto res = advect_window(dd, rocks, fl, adv, s0, ghost, grids, opt2);
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < dd.mesh(i).n_cells; ++k)
                CHECK(std::abs(res.s_end[i][k] - ref.s_end[i][k]) < 1e-8);
    }
    SUBCASE("multirate nonconforming window conserves across the interface") {
        AdvectWindowOptions opt;
        opt.mode = AdvectionMode::Nonconforming;
        opt.trace.rtol = 1e-13;
        opt.trace.atol = 1e-14;
        opt.outer_tol = 1e-13;
        const double T = 0.9 * 6 * tau_cfl;
        std::vector<FinePartition> grids = {FinePartition::uniform(0, T, 8),
                                            FinePartition::uniform(0, T, 12)};
        auto res = advect_window(dd, rocks, fl, adv, s0, ghost, grids, opt);
        double dm[2];
        for (int i = 0; i < 2; ++i) {
            dm[i] = 0.0;
            for (int k = 0; k < dd.mesh(i).n_cells; ++k)
                dm[i] += rocks[dd.rock_index(i)].porosity() * dd.mesh(i).cell_volume *
                         (res.s_end[i][k] - s0[i][k]);
        }
        // windowed transmission: mass leaving one side enters the other
        double mism = 0.0;
        for (int m = 0; m < dd.n_mortar(); ++m)
            mism += res.mass_out_neg[m] + res.mass_out_pos[m];
        CHECK(std::abs(mism) < 1e-11);
        CHECK(std::abs(dm[0] + dm[1]) < 1e-11);
    }
}
