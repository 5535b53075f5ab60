#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "splitflow/geometry.hpp"
#include "splitflow/timegrid.hpp"

using namespace splitflow;

namespace {

DecompositionSpec unit_square_spec() {
    DecompositionSpec sp;
    sp.dim = 2;
    sp.lo = {0.0, 0.0, 0.0};
    sp.hi = {1.0, 1.0, 1.0};
    sp.cells = {4, 4, 1};
    sp.split_axis = 0;
    sp.splits = {0.5};
    sp.rock_of_slab = {0, 1};
    return sp;
}

} // namespace

TEST_CASE("two-subdomain split of the unit square") {
    DecomposedDomain dd = DecomposedDomain::build(unit_square_spec());
    CHECK(dd.n_subdomains() == 2);
    CHECK(dd.mesh(0).n_cells == 8);
    CHECK(dd.mesh(1).n_cells == 8);
    CHECK(dd.n_mortar() == 4);
    CHECK(dd.total_volume() == doctest::Approx(1.0).epsilon(1e-14));

    // matching faces: identical area and centroid on both sides
    for (const MortarFace& mf : dd.mortar()) {
        const Face& fn = dd.mesh(mf.sub_neg).faces[mf.face_neg];
        const Face& fp = dd.mesh(mf.sub_pos).faces[mf.face_pos];
        CHECK(fn.area == doctest::Approx(fp.area).epsilon(1e-14));
        for (int b = 0; b < 3; ++b)
            CHECK(fn.centroid[b] == doctest::Approx(fp.centroid[b]).epsilon(1e-14));
    }

    // deterministic lexicographic mortar order
    for (int m = 1; m < dd.n_mortar(); ++m)
        CHECK(dd.mortar()[m - 1].centroid < dd.mortar()[m].centroid);
}

TEST_CASE("three-slab box split") {
    DecompositionSpec sp;
    sp.dim = 3;
    sp.lo = {0, 0, 0};
    sp.hi = {10, 10, 10};
    sp.cells = {10, 2, 2};
    sp.split_axis = 0;
    sp.splits = {4.0, 6.0};
    sp.rock_of_slab = {0, 1, 0};
    DecomposedDomain dd = DecomposedDomain::build(sp);
    CHECK(dd.n_subdomains() == 3);
    CHECK(dd.n_mortar() == 8);  // two planes, 2x2 faces each
    CHECK(dd.mesh(1).n_cells == 2 * 2 * 2);
    CHECK(dd.total_volume() == doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("invalid splits rejected") {
    DecompositionSpec sp = unit_square_spec();
    sp.splits = {0.3};  // off the 4-cell lattice
    CHECK_THROWS_AS(DecomposedDomain::build(sp), ConfigError);
    sp.splits = {0.0};  // empty slab
    CHECK_THROWS_AS(DecomposedDomain::build(sp), ConfigError);
}

TEST_CASE("face transmissibility") {
    DecompositionSpec sp = unit_square_spec();
    sp.cells = {2, 1, 1};
    sp.hi = {2.0, 1.0, 1.0};
    sp.splits = {1.0};
    DecomposedDomain dd = DecomposedDomain::build(sp);
    const StructuredMesh& m = dd.mesh(0);
    // unit cells: interior-free mesh; mortar face has |sigma|/d = 1/0.5
    const MortarFace& mf = dd.mortar()[0];
    CHECK(face_transmissibility(dd.mesh(0), mf.face_neg) == doctest::Approx(2.0));

    // anisotropic lattice: cells 1x0.5, x-interior face |sigma|/d_KL
    DecompositionSpec sp2 = unit_square_spec();
    sp2.cells = {4, 2, 1};
    sp2.hi = {4.0, 1.0, 1.0};
    sp2.splits = {2.0};
    DecomposedDomain d2 = DecomposedDomain::build(sp2);
    const StructuredMesh& m2 = d2.mesh(0);
    bool found = false;
    for (size_t f = 0; f < m2.faces.size(); ++f) {
        if (m2.faces[f].kind == FaceKind::Interior && m2.faces[f].axis == 0) {
            CHECK(face_transmissibility(m2, static_cast<int>(f)) ==
                  doctest::Approx(0.5 / 1.0));  // area 0.5, distance 1
            found = true;
            break;
        }
    }
    CHECK(found);
    for (size_t f = 0; f < m2.faces.size(); ++f)
        if (m2.faces[f].kind == FaceKind::Boundary) {
            CHECK_THROWS_AS(face_transmissibility(m2, static_cast<int>(f)),
                            ConfigError);
            break;
        }
    (void)m;
}

TEST_CASE("fine partition overlaps") {
    FinePartition g2 = FinePartition::uniform(0.0, 1.0, 2);
    FinePartition g3 = FinePartition::uniform(0.0, 1.0, 3);
    auto ov = overlaps(g2, g3);
    REQUIRE(ov.size() == 4);
    CHECK(ov[0].l == 0);
    CHECK(ov[0].m == 0);
    CHECK(ov[0].measure == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(ov[1].l == 0);
    CHECK(ov[1].m == 1);
    CHECK(ov[1].measure == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(ov[2].l == 1);
    CHECK(ov[2].m == 1);
    CHECK(ov[2].measure == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(ov[3].l == 1);
    CHECK(ov[3].m == 2);
    CHECK(ov[3].measure == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    // identical grids: diagonal overlaps
    auto ov2 = overlaps(g3, g3);
    REQUIRE(ov2.size() == 3);
    for (const auto& o : ov2) {
        CHECK(o.l == o.m);
        CHECK(o.measure == doctest::Approx(g3.step(o.l)).epsilon(1e-15));
    }

    // single interval against anything: measures are the other grid's steps
    FinePartition g1 = FinePartition::uniform(0.0, 1.0, 1);
    auto ov3 = overlaps(g1, g3);
    REQUIRE(ov3.size() == 3);
    for (int m = 0; m < 3; ++m)
        CHECK(ov3[m].measure == doctest::Approx(g3.step(m)).epsilon(1e-15));

    // row sums reproduce the fine steps
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> cnt(1, 17);
    for (int rep = 0; rep < 50; ++rep) {
        FinePartition a = FinePartition::uniform(2.0, 5.0, cnt(rng));
        FinePartition b = FinePartition::uniform(2.0, 5.0, cnt(rng));
        std::vector<double> row(a.count(), 0.0);
        for (const auto& o : overlaps(a, b)) row[o.l] += o.measure;
        for (int l = 0; l < a.count(); ++l)
            CHECK(row[l] == doctest::Approx(a.step(l)).epsilon(1e-13));
    }
}

TEST_CASE("projection worked examples") {
    FinePartition src = FinePartition::from_breakpoints({0.0, 0.5, 1.0});
    FinePartition dst = FinePartition::uniform(0.0, 1.0, 1);
    auto out = project({1.0, 3.0}, src, dst);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-15));

    FinePartition s3 = FinePartition::uniform(0.0, 1.0, 3);
    FinePartition d2 = FinePartition::uniform(0.0, 1.0, 2);
    auto out2 = project({3.0, 6.0, 9.0}, s3, d2);
    REQUIRE(out2.size() == 2);
    CHECK(out2[0] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(out2[1] == doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("projection preserves constants and window integrals") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> cnt(1, 23);
    std::uniform_real_distribution<double> val(-4.0, 4.0);
    for (int rep = 0; rep < 1000; ++rep) {
        const int ni = cnt(rng), nj = cnt(rng);
        FinePartition gi = FinePartition::uniform(0.0, 3.0, ni);
        FinePartition gj = FinePartition::uniform(0.0, 3.0, nj);

        // constants exact
        auto pc = project(std::vector<double>(nj, 2.0), gj, gi);
        for (double v : pc) CHECK(v == doctest::Approx(2.0).epsilon(1e-14));

        std::vector<double> phi(nj);
        for (auto& v : phi) v = val(rng);
        auto proj = project(phi, gj, gi);
        double int_src = 0.0, int_dst = 0.0, nrm_src = 0.0, nrm_dst = 0.0;
        for (int m = 0; m < nj; ++m) {
            int_src += gj.step(m) * phi[m];
            nrm_src += gj.step(m) * phi[m] * phi[m];
        }
        for (int l = 0; l < ni; ++l) {
            int_dst += gi.step(l) * proj[l];
            nrm_dst += gi.step(l) * proj[l] * proj[l];
        }
        CHECK(std::abs(int_dst - int_src) <= 1e-14 * std::max(1.0, std::abs(int_src)));
        // L2 contraction
        CHECK(nrm_dst <= nrm_src * (1.0 + 1e-13));
    }
}

TEST_CASE("projection round trip on constants is the identity") {
    FinePartition gi = FinePartition::uniform(0.0, 1.0, 5);
    FinePartition gj = FinePartition::uniform(0.0, 1.0, 8);
    std::vector<double> c(8, 3.25);
    auto there = project(c, gj, gi);
    auto back = project(there, gi, gj);
    for (double v : back) CHECK(v == doctest::Approx(3.25).epsilon(1e-14));
}

TEST_CASE("time grid bookkeeping") {
    TimeGrids tg = TimeGrids::uniform(10.0, 4, {3, 5});
    CHECK(tg.n_windows() == 4);
    CHECK(tg.coarse.back() == 10.0);
    for (int n = 0; n < 4; ++n) {
        CHECK(tg.fine[n][0].count() == 3);
        CHECK(tg.fine[n][1].count() == 5);
        CHECK(tg.fine[n][0].breakpoints.front() == tg.coarse[n]);
        CHECK(tg.fine[n][0].breakpoints.back() == tg.coarse[n + 1]);
        double sum = 0.0;
        for (int l = 0; l < 5; ++l) sum += tg.fine[n][1].step(l);
        CHECK(sum == doctest::Approx(tg.window_step(n)).epsilon(1e-15));
    }
    CHECK_THROWS_AS(overlaps(tg.fine[0][0], tg.fine[1][1]), ConfigError);
}
