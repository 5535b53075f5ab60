#include "splitflow/coupled_saturation.hpp"

#include <algorithm>
#include <cmath>

#include "splitflow/scalar_solvers.hpp"

namespace splitflow {

double combined_flux(const DecomposedDomain& dd, int sub, const RockType& rock,
                     const SubdomainAdvection& adv, const CellField& s, int face,
                     double theta_or_ghost) {
    const StructuredMesh& m = dd.mesh(sub);
    const Face& fc = m.faces[face];
    const double K = rock.permeability();
    switch (fc.kind) {
    case FaceKind::Interior: {
        const double phi = godunov_flux(adv.face[face], s[fc.cell_neg], s[fc.cell_pos]);
        const double diff = K *
                            (rock.kirchhoff_alpha(s[fc.cell_neg]) -
                             rock.kirchhoff_alpha(s[fc.cell_pos])) /
                            (fc.d_neg + fc.d_pos);
        return phi + diff;  // canonical orientation
    }
    case FaceKind::Mortar: {
        const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
        const double d = fc.cell_neg >= 0 ? fc.d_neg : fc.d_pos;
        const double phi = godunov_flux(adv.face[face], s[k], theta_or_ghost);
        return phi + K *
                         (rock.kirchhoff_alpha(s[k]) -
                          rock.kirchhoff_alpha(theta_or_ghost)) /
                         d;  // outward orientation
    }
    default: {
        if (fc.tag == BoundaryTag::NoFlow) return 0.0;
        const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
        const double d = fc.cell_neg >= 0 ? fc.d_neg : fc.d_pos;
        const double phi = godunov_flux(adv.face[face], s[k], theta_or_ghost);
        return phi + K *
                         (rock.kirchhoff_alpha(s[k]) -
                          rock.kirchhoff_alpha(theta_or_ghost)) /
                         d;  // outward orientation
    }
    }
}

double combined_cfl(const DecomposedDomain& dd, int sub, const RockType& rock,
                    const SubdomainAdvection& adv, double safety) {
    const StructuredMesh& m = dd.mesh(sub);
    const int ns = 128;
    const double K = rock.permeability();
    const double amax = rock.alpha_prime_max();
    double tau = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m.n_cells; ++k) {
        double denom = 0.0;
        for (int ld = 0; ld < 2 * m.dim; ++ld) {
            const int f = m.cell_faces[k][ld];
            const Face& fc = m.faces[f];
            if (fc.kind == FaceKind::Boundary && fc.tag == BoundaryTag::NoFlow)
                continue;
            double lip = 0.0;
            double prev = adv.face[f](0.0);
            for (int q = 1; q <= ns; ++q) {
                const double v = adv.face[f](static_cast<double>(q) / ns);
                lip = std::max(lip, std::abs(v - prev) * ns);
                prev = v;
            }
            const double d = fc.cell_neg == k ? fc.d_neg : fc.d_pos;
            denom += fc.area * (lip + 2.0 * K * amax / d);
        }
        if (denom > 0.0)
            tau = std::min(tau, rock.porosity() * m.cell_volume / denom);
    }
    return safety * tau;
}

namespace {

// transmitted Robin data per face per fine interval of one side
struct SideData {
    std::vector<std::vector<double>> rhs;  // [mortar][interval]
};

} // namespace

Scheme2WindowResult oswr_saturation_window(
    const DecomposedDomain& dd, const std::vector<RockType>& rocks,
    const FluidParams& fluid, const std::vector<SubdomainAdvection>& adv,
    const std::vector<CellField>& s0,
    const std::vector<std::map<int, double>>& boundary_ghost,
    const std::vector<FinePartition>& grids, const Scheme2Options& opt) {
    (void)fluid;
    const int n_sub = dd.n_subdomains();
    const int n_mortar = dd.n_mortar();

    for (int i = 0; i < n_sub; ++i) {
        const double bound =
            combined_cfl(dd, i, rocks[dd.rock_index(i)], adv[i], opt.cfl_safety);
        for (int l = 0; l < grids[i].count(); ++l)
            if (grids[i].step(l) > bound * (1.0 + 1e-12))
                throw SolverError(
                    "saturation fine step exceeds the stability bound; need " +
                    std::to_string(static_cast<int>(
                        std::ceil((grids[i].t1 - grids[i].t0) / bound))) +
                    " substeps in subdomain " + std::to_string(i));
    }

    struct FaceCtx {
        int sub_n = 0, face_n = 0, sub_p = 0, face_p = 0;
        int slot_n = 0, slot_p = 0, cell_n = 0, cell_p = 0;
        double area = 0.0;
    };
    std::vector<FaceCtx> faces(n_mortar);
    for (int m = 0; m < n_mortar; ++m) {
        const MortarFace& mf = dd.mortar()[m];
        FaceCtx& fx = faces[m];
        fx.sub_n = mf.sub_neg;
        fx.face_n = mf.face_neg;
        fx.sub_p = mf.sub_pos;
        fx.face_p = mf.face_pos;
        fx.area = mf.area;
        const auto& sn = dd.subdomain_mortars(mf.sub_neg);
        const auto& sp = dd.subdomain_mortars(mf.sub_pos);
        for (size_t t = 0; t < sn.size(); ++t)
            if (sn[t].first == m) fx.slot_n = static_cast<int>(t);
        for (size_t t = 0; t < sp.size(); ++t)
            if (sp[t].first == m) fx.slot_p = static_cast<int>(t);
        const Face& fn = dd.mesh(fx.sub_n).faces[fx.face_n];
        const Face& fp = dd.mesh(fx.sub_p).faces[fx.face_p];
        fx.cell_n = fn.cell_neg >= 0 ? fn.cell_neg : fn.cell_pos;
        fx.cell_p = fp.cell_neg >= 0 ? fp.cell_neg : fp.cell_pos;
    }

    Scheme2WindowResult res;
    res.theta_neg.resize(n_mortar);
    res.theta_pos.resize(n_mortar);
    res.mass_out_neg.assign(n_mortar, 0.0);
    res.mass_out_pos.assign(n_mortar, 0.0);
    res.boundary_mass_out.assign(n_sub, 0.0);
    for (int m = 0; m < n_mortar; ++m) {
        res.theta_neg[m].assign(grids[faces[m].sub_n].count(),
                                s0[faces[m].sub_n][faces[m].cell_n]);
        res.theta_pos[m].assign(grids[faces[m].sub_p].count(),
                                s0[faces[m].sub_p][faces[m].cell_p]);
    }

    // initial transmitted data: zero flux, capillary trace of the lagged state
    std::vector<SideData> rhs_for(2);  // [0] data consumed by sub_n, [1] by sub_p
    rhs_for[0].rhs.resize(n_mortar);
    rhs_for[1].rhs.resize(n_mortar);
    for (int m = 0; m < n_mortar; ++m) {
        const FaceCtx& fx = faces[m];
        const RockType& rn = rocks[dd.rock_index(fx.sub_n)];
        const RockType& rp = rocks[dd.rock_index(fx.sub_p)];
        const double sgn =
            rn.vg().orientation == CapillaryOrientation::Decreasing ? -1.0 : 1.0;
        rhs_for[0].rhs[m].assign(grids[fx.sub_n].count(),
                                 sgn * opt.kappa_neg *
                                     rp.pc(s0[fx.sub_p][fx.cell_p]));
        rhs_for[1].rhs[m].assign(grids[fx.sub_p].count(),
                                 sgn * opt.kappa_pos *
                                     rn.pc(s0[fx.sub_n][fx.cell_n]));
    }

    // per-sweep storage of the interface flux and capillary trajectories
    std::vector<std::vector<std::vector<double>>> flux_hist(2), pc_hist(2);
    for (int side = 0; side < 2; ++side) {
        flux_hist[side].resize(n_mortar);
        pc_hist[side].resize(n_mortar);
    }
    std::vector<std::vector<CellField>> path(n_sub);

    auto sweep_subdomain = [&](int i) {
        const RockType& rock = rocks[dd.rock_index(i)];
        const double sgn =
            rock.vg().orientation == CapillaryOrientation::Decreasing ? -1.0 : 1.0;
        const double kappa = opt.kappa_neg;  // per-face value chosen below
        (void)kappa;
        const StructuredMesh& m = dd.mesh(i);
        const auto& slots = dd.subdomain_mortars(i);
        path[i].clear();
        path[i].push_back(s0[i]);
        res.boundary_mass_out[i] = 0.0;
        CellField s = s0[i];
        for (int l = 0; l < grids[i].count(); ++l) {
            const double dt = grids[i].step(l);
            // interface traces from the scalar Robin relation per face
            std::vector<double> mflux(slots.size(), 0.0);
            for (size_t q = 0; q < slots.size(); ++q) {
                const int mid = slots[q].first;
                const FaceCtx& fx = faces[mid];
                const bool neg = (fx.sub_n == i);
                const int lf = neg ? fx.face_n : fx.face_p;
                const double kap = neg ? opt.kappa_neg : opt.kappa_pos;
                const double rhs = rhs_for[neg ? 0 : 1].rhs[mid][l];
                auto g = [&](double th) {
                    return -combined_flux(dd, i, rock, adv[i], s, lf, th) +
                           sgn * kap * rock.pc(th) - rhs;
                };
                double theta;
                const double g0 = g(0.0), g1 = g(1.0);
                // tolerance scales with the transmitted data, not with the
                // singular capillary endpoint values of the bracket
                const double ftol = opt.theta_tol * std::max(1.0, std::abs(rhs));
                if (g0 == 0.0)
                    theta = 0.0;
                else if (g1 == 0.0)
                    theta = 1.0;
                else if (g0 * g1 > 0.0)
                    theta = std::abs(g0) < std::abs(g1) ? 0.0 : 1.0;
                else
                    theta = illinois_root(g, 0.0, 1.0, g0, g1, ftol, 1e-15).x;
                (neg ? res.theta_neg : res.theta_pos)[mid][l] = theta;
                mflux[q] = combined_flux(dd, i, rock, adv[i], s, lf, theta);
                auto& fh = flux_hist[neg ? 0 : 1][mid];
                auto& ph = pc_hist[neg ? 0 : 1][mid];
                if (l == 0) {
                    fh.assign(grids[i].count(), 0.0);
                    ph.assign(grids[i].count(), 0.0);
                }
                fh[l] = mflux[q];
                ph[l] = rock.pc(theta);
            }
            // explicit update with the combined fluxes
            CellField next(m.n_cells);
            const double coef = dt / (rock.porosity() * m.cell_volume);
            std::vector<int> slot_of_face(m.faces.size(), -1);
            for (size_t q = 0; q < slots.size(); ++q)
                slot_of_face[slots[q].second] = static_cast<int>(q);
            for (int k = 0; k < m.n_cells; ++k) {
                double div = 0.0;
                for (int ld = 0; ld < 2 * m.dim; ++ld) {
                    const int f = m.cell_faces[k][ld];
                    const Face& fc = m.faces[f];
                    double F = 0.0;
                    if (fc.kind == FaceKind::Interior)
                        F = fc.sign_for(k) *
                            combined_flux(dd, i, rock, adv[i], s, f, 0.0);
                    else if (fc.kind == FaceKind::Mortar)
                        F = mflux[slot_of_face[f]];
                    else if (boundary_ghost[i].count(f)) {
                        F = combined_flux(dd, i, rock, adv[i], s, f,
                                          boundary_ghost[i].at(f));
                        res.boundary_mass_out[i] += dt * fc.area * F;
                    }
                    div += fc.area * F;
                }
                double v = s[k] - coef * div;
                if (v < -1e-10 || v > 1.0 + 1e-10)
                    throw SolverError(
                        "combined explicit step left [0,1]: stability violated");
                next[k] = std::min(1.0, std::max(0.0, v));
            }
            s = std::move(next);
            path[i].push_back(s);
        }
    };

    int sweep = 0;
    for (; sweep < opt.max_sweeps; ++sweep) {
        for (int i = 0; i < n_sub; ++i) sweep_subdomain(i);
        if (n_mortar == 0) {
            res.sweeps = 1;
            break;
        }
        // rebuild the transmitted data from the fresh trajectories and
        // measure its relative change
        double change = 0.0, base = 0.0;
        for (int m = 0; m < n_mortar; ++m) {
            const FaceCtx& fx = faces[m];
            const RockType& rn = rocks[dd.rock_index(fx.sub_n)];
            const double sgn =
                rn.vg().orientation == CapillaryOrientation::Decreasing ? -1.0
                                                                        : 1.0;
            // data for the negative side: projection of (F_pos + kap*pc_pos)
            std::vector<double> src_n(grids[fx.sub_p].count());
            for (int l = 0; l < grids[fx.sub_p].count(); ++l)
                src_n[l] = flux_hist[1][m][l] +
                           sgn * opt.kappa_neg * pc_hist[1][m][l];
            std::vector<double> new_n =
                project(src_n, grids[fx.sub_p], grids[fx.sub_n]);
            std::vector<double> src_p(grids[fx.sub_n].count());
            for (int l = 0; l < grids[fx.sub_n].count(); ++l)
                src_p[l] = flux_hist[0][m][l] +
                           sgn * opt.kappa_pos * pc_hist[0][m][l];
            std::vector<double> new_p =
                project(src_p, grids[fx.sub_n], grids[fx.sub_p]);
            for (int l = 0; l < grids[fx.sub_n].count(); ++l) {
                change += grids[fx.sub_n].step(l) *
                          std::pow(new_n[l] - rhs_for[0].rhs[m][l], 2);
                base += grids[fx.sub_n].step(l) * new_n[l] * new_n[l];
            }
            for (int l = 0; l < grids[fx.sub_p].count(); ++l) {
                change += grids[fx.sub_p].step(l) *
                          std::pow(new_p[l] - rhs_for[1].rhs[m][l], 2);
                base += grids[fx.sub_p].step(l) * new_p[l] * new_p[l];
            }
            rhs_for[0].rhs[m] = std::move(new_n);
            rhs_for[1].rhs[m] = std::move(new_p);
        }
        res.final_change = base > 0.0 ? std::sqrt(change / base) : std::sqrt(change);
        res.sweeps = sweep + 1;
#ifdef SPLITFLOW_DEBUG_OSWR
        if (n_mortar > 0)
            fprintf(stderr,
                    "sw %d chg %.3e rhsN %.8g rhsP %.8g thN %.6f thP %.6f fN %.8g fP %.8g\n",
                    sweep, res.final_change, rhs_for[0].rhs[0][0], rhs_for[1].rhs[0][0],
                    res.theta_neg[0][0], res.theta_pos[0][0], flux_hist[0][0][0],
                    flux_hist[1][0][0]);
#endif
        if (res.final_change < opt.tol) break;
        if (sweep + 1 == opt.max_sweeps)
            throw SolverError(
                "saturation waveform relaxation did not converge within " +
                std::to_string(opt.max_sweeps) + " sweeps");
    }

    res.s_end.resize(n_sub);
    for (int i = 0; i < n_sub; ++i) res.s_end[i] = path[i].back();

    // interface bookkeeping and window-averaged capillary mismatch
    for (int m = 0; m < n_mortar; ++m) {
        const FaceCtx& fx = faces[m];
        const FinePartition& gn = grids[fx.sub_n];
        const FinePartition& gp = grids[fx.sub_p];
        double int_pi_n = 0.0, int_pi_p = 0.0;
        for (int l = 0; l < gn.count(); ++l) {
            res.mass_out_neg[m] += gn.step(l) * fx.area * flux_hist[0][m][l];
            int_pi_n += gn.step(l) * pc_hist[0][m][l];
        }
        for (int l = 0; l < gp.count(); ++l) {
            res.mass_out_pos[m] += gp.step(l) * fx.area * flux_hist[1][m][l];
            int_pi_p += gp.step(l) * pc_hist[1][m][l];
        }
        res.max_capillary_mismatch =
            std::max(res.max_capillary_mismatch,
                     std::abs(int_pi_n - int_pi_p) / (gn.t1 - gn.t0));
    }
    return res;
}

} // namespace splitflow
