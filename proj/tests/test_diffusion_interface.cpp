#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle_utils.hpp"
#include "splitflow/diffusion_interface.hpp"

using namespace splitflow;

namespace {

DecomposedDomain split_box(std::array<int, 3> cells, std::array<double, 3> hi) {
    DecompositionSpec sp;
    sp.dim = 2;
    sp.lo = {0, 0, 0};
    sp.hi = hi;
    sp.cells = cells;
    sp.split_axis = 0;
    sp.splits = {hi[0] / 2.0};
    sp.rock_of_slab = {0, 1};
    return DecomposedDomain::build(sp);
}

std::vector<RockType> rocks_pair(double k2 = 1.0, double n2 = 2.8) {
    std::vector<RockType> rocks;
    rocks.push_back(RockType(0.3, 1.0, VanGenuchtenParams::make(2.0, 1.0), 1.0));
    rocks.push_back(RockType(0.4, k2, VanGenuchtenParams::make(n2, 1.2), 1.3));
    return rocks;
}

} // namespace

TEST_CASE("interface flux jump operator") {
    SUBCASE("steady symmetric state maps to zero") {
        DecomposedDomain dd = split_box({4, 2, 1}, {1, 1, 1});
        std::vector<RockType> rocks = {rocks_pair()[0], rocks_pair()[0]};
        DiffusionInterface di(dd, rocks);
        const double sbar = 0.55;
        std::vector<CellField> s_star = {CellField(dd.mesh(0).n_cells, sbar),
                                         CellField(dd.mesh(1).n_cells, sbar)};
        InterfaceTrace lam(dd.n_mortar(), rocks[0].pc(sbar));
        InterfaceTrace z = di.zdtn_apply(s_star, 0.1, lam);
        for (double v : z) CHECK(std::abs(v) < 1e-12);
    }
    SUBCASE("two single-cell subdomains against a scalar-root oracle") {
        DecomposedDomain dd = split_box({2, 1, 1}, {2, 1, 1});
        auto rocks = rocks_pair(0.5);
        DiffusionInterface di(dd, rocks);
        std::vector<CellField> s_star = {{0.4}, {0.7}};
        const double tau = 0.05;
        const double lam = 0.5 * (rocks[0].pc(0.4) + rocks[1].pc(0.7));
        InterfaceTrace lv(1, lam);
        InterfaceTrace z = di.zdtn_apply(s_star, tau, lv);

        // independent per-side evaluation: scalar mass balance against the
        // one-free-dof flux relation
        double want = 0.0;
        for (int i = 0; i < 2; ++i) {
            const RockType& rock = rocks[dd.rock_index(i)];
            const StructuredMesh& m = dd.mesh(i);
            const double V = m.cell_volume;
            const double ad = rock.kirchhoff_alpha(rock.pc_inverse(lam));
            auto g = [&](double w) {
                const double r = (rock.kirchhoff_alpha(w) - ad) /
                                 ((1.0 / rock.permeability()) * V / 3.0);
                return rock.porosity() * V * (w - s_star[i][0]) / tau + r;
            };
            const double w = oracle::bisect(g, 1e-9, 1.0 - 1e-9);
            want += (rock.kirchhoff_alpha(w) - ad) /
                    ((1.0 / rock.permeability()) * V / 3.0);
        }
        CHECK(z[0] == doctest::Approx(want).epsilon(1e-7));
    }
    SUBCASE("monotone response to the trace") {
        DecomposedDomain dd = split_box({4, 2, 1}, {1, 1, 1});
        auto rocks = rocks_pair();
        DiffusionInterface di(dd, rocks);
        std::vector<CellField> s_star = {CellField(dd.mesh(0).n_cells, 0.5),
                                         CellField(dd.mesh(1).n_cells, 0.6)};
        InterfaceTrace lam = di.initial_guess(s_star);
        std::vector<double> responses;
        for (double d = -0.1; d <= 0.1; d += 0.05) {
            InterfaceTrace lp = lam;
            lp[0] += d;
            responses.push_back(di.zdtn_apply(s_star, 0.05, lp)[0]);
        }
        for (size_t i = 1; i < responses.size(); ++i)
            CHECK(responses[i] >= responses[i - 1] - 1e-12);
    }
}

TEST_CASE("interface Newton-GMRes") {
    SUBCASE("steady symmetric state needs no iterations") {
        DecomposedDomain dd = split_box({4, 2, 1}, {1, 1, 1});
        std::vector<RockType> rocks = {rocks_pair()[0], rocks_pair()[0]};
        DiffusionInterface di(dd, rocks);
        const double sbar = 0.5;
        std::vector<CellField> s_star = {CellField(dd.mesh(0).n_cells, sbar),
                                         CellField(dd.mesh(1).n_cells, sbar)};
        DiffusionMethodOptions opt;
        InterfaceTrace guess(dd.n_mortar(), rocks[0].pc(sbar));
        auto res = di.newton_gmres(s_star, 0.1, opt, &guess);
        CHECK(res.report.newton_iterations == 0);
        for (int i = 0; i < 2; ++i)
            for (double v : res.states[i].s_new)
                CHECK(v == doctest::Approx(sbar).epsilon(1e-10));
    }
    SUBCASE("converges, imposes trace continuity, conserves mass") {
        DecomposedDomain dd = split_box({6, 3, 1}, {1, 1, 1});
        auto rocks = rocks_pair(0.4);
        DiffusionInterface di(dd, rocks);
        std::vector<CellField> s_star = {CellField(dd.mesh(0).n_cells, 0.7),
                                         CellField(dd.mesh(1).n_cells, 0.35)};
        DiffusionMethodOptions opt;
        opt.tol_newton = 1e-10;
        opt.subdomain.rtol = 1e-12;
        const double tau = 0.02;
        auto res = di.newton_gmres(s_star, tau, opt);
        // capillary trace equality is imposed through the shared unknown
        for (int m = 0; m < dd.n_mortar(); ++m) {
            const MortarFace& mf = dd.mortar()[m];
            int qn = -1, qp = -1;
            for (size_t t = 0; t < dd.subdomain_mortars(mf.sub_neg).size(); ++t)
                if (dd.subdomain_mortars(mf.sub_neg)[t].first == m) qn = t;
            for (size_t t = 0; t < dd.subdomain_mortars(mf.sub_pos).size(); ++t)
                if (dd.subdomain_mortars(mf.sub_pos)[t].first == m) qp = t;
            const double pn =
                rocks[dd.rock_index(mf.sub_neg)].pc(res.states[mf.sub_neg].mortar_theta[qn]);
            const double pp =
                rocks[dd.rock_index(mf.sub_pos)].pc(res.states[mf.sub_pos].mortar_theta[qp]);
            CHECK(std::abs(pn - res.lambda_d[m]) < 1e-8);
            CHECK(std::abs(pp - res.lambda_d[m]) < 1e-8);
        }
        // closed-box mass conservation at the converged interface
        double dm = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double phiV = rocks[dd.rock_index(i)].porosity() *
                                dd.mesh(i).cell_volume;
            for (int k = 0; k < dd.mesh(i).n_cells; ++k)
                dm += phiV * (res.states[i].s_new[k] - s_star[i][k]);
        }
        CHECK(std::abs(dm) < 1e-10);
        // the saturation jump across the interface is real
        CHECK(std::abs(res.states[0].mortar_theta[0] -
                       res.states[1].mortar_theta[0]) > 1e-3);
    }
    SUBCASE("preconditioning reduces the linear iteration count") {
        DecomposedDomain dd = split_box({8, 8, 1}, {1, 1, 1});
        auto rocks = rocks_pair(0.2, 2.2);
        DiffusionInterface di(dd, rocks);
        std::vector<CellField> s_star(2);
        for (int i = 0; i < 2; ++i) {
            s_star[i].assign(dd.mesh(i).n_cells, 0.0);
            for (int k = 0; k < dd.mesh(i).n_cells; ++k)
                s_star[i][k] = 0.3 + 0.4 * ((k % 5) / 4.0) + 0.05 * i;
        }
        DiffusionMethodOptions plain;
        plain.tol_newton = 1e-6;
        const double tau = 0.02;
        auto res_plain = di.newton_gmres(s_star, tau, plain);
        DiffusionMethodOptions prec = plain;
        prec.precondition = true;
        auto res_prec = di.newton_gmres(s_star, tau, prec);
        CHECK(res_prec.report.gmres_iterations < res_plain.report.gmres_iterations);
        // same converged interface trace
        for (int m = 0; m < dd.n_mortar(); ++m)
            CHECK(res_prec.lambda_d[m] ==
                  doctest::Approx(res_plain.lambda_d[m]).epsilon(1e-4));
    }
}

TEST_CASE("diffusion waveform relaxation") {
    DecomposedDomain dd = split_box({2, 2, 1}, {1, 1, 1});
    auto rocks = rocks_pair(0.6);
    DiffusionInterface di(dd, rocks);
    std::vector<CellField> s_star = {{0.65, 0.6}, {0.35, 0.3}};
    const double tau = 0.02;
    DiffusionMethodOptions opt;
    opt.kappa = {0.5, 0.5};
    opt.oswr_tol = 1e-10;
    opt.oswr_max_iter = 2000;
    opt.subdomain.rtol = 1e-12;

    std::vector<std::vector<double>> eta_final;
    auto res = di.oswr(s_star, tau, opt, nullptr, &eta_final);
    CHECK(res.report.oswr_iterations >= 1);

    SUBCASE("restart at the fixed point stops immediately") {
        auto res2 = di.oswr(s_star, tau, opt, &eta_final, nullptr);
        CHECK(res2.report.oswr_iterations <= 2);
    }
    SUBCASE("agrees with the Newton route on the 4-cell instance") {
        DiffusionMethodOptions nopt;
        nopt.tol_newton = 1e-10;
        nopt.subdomain.rtol = 1e-12;
        auto ref = di.newton_gmres(s_star, tau, nopt);
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < dd.mesh(i).n_cells; ++k)
                CHECK(std::abs(res.states[i].s_new[k] - ref.states[i].s_new[k]) <=
                      1e-4 * std::max(1.0, std::abs(ref.states[i].s_new[k])));
    }
    SUBCASE("iteration accounting is populated") {
        CHECK(res.report.subdomain_solves ==
              2 * res.report.oswr_iterations);
        CHECK(res.report.subdomain_newton_iterations > 0);
    }
}
