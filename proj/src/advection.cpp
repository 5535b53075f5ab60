#include "splitflow/advection.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "splitflow/scalar_solvers.hpp"

namespace splitflow {

DirectionalFlux make_directional_flux(const RockType& rock,
                                      const FluidParams& fluid, double un,
                                      double gn) {
    DirectionalFlux fl;
    fl.fa = [&rock, &fluid, un, gn](double s) {
        Coefficients c = rock.coefficients(fluid, s);
        return c.f * un + c.f_g * gn;
    };
    fl.un = un;
    fl.gn = gn;
    fl.ex = flux_extremum(rock, fluid, un, gn);
    return fl;
}

DirectionalFlux make_directional_flux(std::function<double(double)> fa, double un,
                                      double gn) {
    DirectionalFlux fl;
    fl.ex = flux_extremum_of(fa);
    fl.fa = std::move(fa);
    fl.un = un;
    fl.gn = gn;
    return fl;
}

double godunov_flux(const DirectionalFlux& flux, double a, double b) {
    return godunov_extremal_flux(flux.fa, flux.ex, a, b);
}

SubdomainAdvection build_advection(const DecomposedDomain& dd, int sub,
                                   const RockType& rock, const FluidParams& fluid,
                                   const FaceFluxField& total_flux) {
    const StructuredMesh& m = dd.mesh(sub);
    SubdomainAdvection adv;
    adv.face.resize(m.faces.size());
    for (size_t f = 0; f < m.faces.size(); ++f) {
        const Face& fc = m.faces[f];
        double un = total_flux[f];
        double gn = fluid.gravity[fc.axis];
        if (fc.kind != FaceKind::Interior) {
            // outward orientation for boundary and interface faces
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            un *= fc.sign_for(k);
            gn *= fc.sign_for(k);
        }
        adv.face[f] = make_directional_flux(rock, fluid, un, gn);
    }
    return adv;
}

double cfl_step(const DecomposedDomain& dd, int sub, const RockType& rock,
                const SubdomainAdvection& adv, double safety) {
    const StructuredMesh& m = dd.mesh(sub);
    const int ns = 128;
    std::vector<double> lip(m.faces.size(), 0.0);
    for (size_t f = 0; f < m.faces.size(); ++f) {
        if (m.faces[f].kind == FaceKind::Boundary &&
            m.faces[f].tag == BoundaryTag::NoFlow)
            continue;  // closed face, no flux
        const DirectionalFlux& fl = adv.face[f];
        double prev = fl(0.0);
        for (int k = 1; k <= ns; ++k) {
            const double s = static_cast<double>(k) / ns;
            const double v = fl(s);
            lip[f] = std::max(lip[f], std::abs(v - prev) * ns);
            prev = v;
        }
    }
    double tau = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m.n_cells; ++k) {
        double denom = 0.0;
        for (int ld = 0; ld < 2 * m.dim; ++ld) {
            const int f = m.cell_faces[k][ld];
            denom += m.faces[f].area * lip[f];
        }
        if (denom > 0.0)
            tau = std::min(tau, rock.porosity() * m.cell_volume / denom);
    }
    return safety * tau;
}

CellField explicit_step(const DecomposedDomain& dd, int sub, const RockType& rock,
                        const SubdomainAdvection& adv, const CellField& s,
                        const std::map<int, double>& boundary_ghost,
                        const std::vector<double>& mortar_outward_flux,
                        double tau) {
    const StructuredMesh& m = dd.mesh(sub);
    const auto& slots = dd.subdomain_mortars(sub);
    std::vector<int> slot_of_face(m.faces.size(), -1);
    for (size_t q = 0; q < slots.size(); ++q)
        slot_of_face[slots[q].second] = static_cast<int>(q);

    // one flux value per face, oriented like the flux function on that face
    std::vector<double> phi(m.faces.size(), 0.0);
    for (size_t f = 0; f < m.faces.size(); ++f) {
        const Face& fc = m.faces[f];
        switch (fc.kind) {
        case FaceKind::Interior:
            phi[f] = godunov_flux(adv.face[f], s[fc.cell_neg], s[fc.cell_pos]);
            break;
        case FaceKind::Mortar:
            phi[f] = mortar_outward_flux[slot_of_face[f]];
            break;
        case FaceKind::Boundary: {
            auto it = boundary_ghost.find(static_cast<int>(f));
            if (it == boundary_ghost.end()) break;  // no-flow
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            phi[f] = godunov_flux(adv.face[f], s[k], it->second);
            break;
        }
        }
    }

    CellField out(m.n_cells);
    const double coef = tau / (rock.porosity() * m.cell_volume);
    for (int k = 0; k < m.n_cells; ++k) {
        double div = 0.0;
        for (int ld = 0; ld < 2 * m.dim; ++ld) {
            const int f = m.cell_faces[k][ld];
            const Face& fc = m.faces[f];
            // interior fluxes are canonical; the rest already outward
            const double out_flux =
                fc.kind == FaceKind::Interior ? fc.sign_for(k) * phi[f] : phi[f];
            div += fc.area * out_flux;
        }
        double v = s[k] - coef * div;
        if (v < -1e-10 || v > 1.0 + 1e-10)
            throw SolverError("explicit advection step left [0,1]: CFL violated");
        out[k] = std::min(1.0, std::max(0.0, v));
    }
    return out;
}

ConformingTrace interface_conforming(const RockType& rock_neg,
                                     const RockType& rock_pos,
                                     const DirectionalFlux& flux_neg,
                                     const DirectionalFlux& flux_pos,
                                     double s_neg, double s_pos, double psi_tol) {
    auto [lo_n, hi_n] = rock_neg.pc_range();
    auto [lo_p, hi_p] = rock_pos.pc_range();
    const double qlo = std::max(lo_n, lo_p);
    const double qhi = std::min(hi_n, hi_p);
    if (!(qlo < qhi))
        throw SolverError("interface trace solve: disjoint capillary ranges");

    auto psi = [&](double q) {
        return godunov_flux(flux_neg, s_neg, rock_neg.pc_inverse(q)) +
               godunov_flux(flux_pos, s_pos, rock_pos.pc_inverse(q));
    };
    const double flo = psi(qlo), fhi = psi(qhi);
    const double scale = std::max(
        {std::abs(flo), std::abs(fhi), std::abs(flux_neg.un), std::abs(flux_pos.un)});
    const double ftol = psi_tol * std::max(1.0, scale);

    ConformingTrace tr;
    if (std::abs(flo) <= ftol && std::abs(fhi) <= ftol) {
        // degenerate zero-flux face: keep the capillary trace of the cell state
        tr.q = std::min(qhi, std::max(qlo, rock_neg.pc(s_neg)));
    } else {
        if (flo * fhi > 0.0)
            throw SolverError("interface trace solve: no bracketing root "
                              "(incompatible capillary curves)");
        RootResult r = illinois_root(psi, qlo, qhi, flo, fhi, ftol, 0.0, 300);
        if (std::abs(r.residual) > ftol)
            throw SolverError("interface trace solve did not converge");
        tr.q = r.x;
    }
    tr.theta_neg = rock_neg.pc_inverse(tr.q);
    tr.theta_pos = rock_pos.pc_inverse(tr.q);
    tr.flux_neg = godunov_flux(flux_neg, s_neg, tr.theta_neg);
    return tr;
}

NonconformingTraceResult interface_nonconforming(
    const RockType& rock_neg, const RockType& rock_pos,
    const DirectionalFlux& flux_neg, const DirectionalFlux& flux_pos,
    const std::vector<double>& s_neg_path, const std::vector<double>& s_pos_path,
    const FinePartition& grid_neg, const FinePartition& grid_pos,
    double kappa_neg, double kappa_pos, const TraceNewtonOptions& opt,
    const std::vector<double>* warm_neg, const std::vector<double>* warm_pos) {
    const int nn = grid_neg.count();
    const int np = grid_pos.count();
    if (rock_neg.vg().orientation != rock_pos.vg().orientation)
        throw ConfigError("interface coupling requires one capillary orientation");
    const double sgn =
        rock_neg.vg().orientation == CapillaryOrientation::Decreasing ? -1.0 : 1.0;
    const auto ov = overlaps(grid_neg, grid_pos);

    NonconformingTraceResult res;
    res.theta_neg = warm_neg ? *warm_neg : std::vector<double>(nn, s_neg_path[0]);
    res.theta_pos = warm_pos ? *warm_pos : std::vector<double>(np, s_pos_path[0]);

    const int n = nn + np;
    auto residual = [&](const std::vector<double>& tn,
                        const std::vector<double>& tp, Eigen::VectorXd& R) {
        R = Eigen::VectorXd::Zero(n);
        // interval-local Robin terms, time-averaged per interval
        for (int l = 0; l < nn; ++l)
            R(l) = -godunov_flux(flux_neg, s_neg_path[l], tn[l]) +
                   sgn * kappa_neg * rock_neg.pc(tn[l]);
        for (int mI = 0; mI < np; ++mI)
            R(nn + mI) = -godunov_flux(flux_pos, s_pos_path[mI], tp[mI]) +
                         sgn * kappa_pos * rock_pos.pc(tp[mI]);
        // projected neighbor data
        for (const Overlap& o : ov) {
            const double phi_pos = godunov_flux(flux_pos, s_pos_path[o.m], tp[o.m]);
            const double phi_neg = godunov_flux(flux_neg, s_neg_path[o.l], tn[o.l]);
            R(o.l) -= (o.measure / grid_neg.step(o.l)) *
                      (phi_pos + sgn * kappa_neg * rock_pos.pc(tp[o.m]));
            R(nn + o.m) -= (o.measure / grid_pos.step(o.m)) *
                           (phi_neg + sgn * kappa_pos * rock_neg.pc(tn[o.l]));
        }
    };

    Eigen::VectorXd R;
    residual(res.theta_neg, res.theta_pos, R);
    double rnorm = R.norm();
    // the natural residual magnitude: transmitted Robin data at the initial
    // traces; absolute floors scale with it
    double data_scale = 1e-300;
    for (int l = 0; l < nn; ++l)
        data_scale = std::max(
            data_scale,
            std::abs(godunov_flux(flux_neg, s_neg_path[l], res.theta_neg[l])) +
                kappa_neg * std::abs(rock_neg.pc(res.theta_neg[l])));
    for (int mI = 0; mI < np; ++mI)
        data_scale = std::max(
            data_scale,
            std::abs(godunov_flux(flux_pos, s_pos_path[mI], res.theta_pos[mI])) +
                kappa_pos * std::abs(rock_pos.pc(res.theta_pos[mI])));
    const double target = std::max(opt.rtol * rnorm, opt.atol * data_scale);

    for (int it = 0; it < opt.max_iter && rnorm > target; ++it) {
        // dense finite-difference Jacobian; the system is small and face-local
        Eigen::MatrixXd J(n, n);
        const double h = 1e-7;
        std::vector<double> tn = res.theta_neg, tp = res.theta_pos;
        for (int j = 0; j < n; ++j) {
            double* v = (j < nn) ? &tn[j] : &tp[j - nn];
            const double save = *v;
            const double vp = std::min(1.0, save + h);
            const double vm = std::max(0.0, save - h);
            *v = vp;
            Eigen::VectorXd Rp;
            residual(tn, tp, Rp);
            *v = vm;
            Eigen::VectorXd Rm;
            residual(tn, tp, Rm);
            *v = save;
            J.col(j) = (Rp - Rm) / (vp - vm);
        }
        Eigen::VectorXd dx = J.fullPivLu().solve(-R);
        // flux kinks can produce wild directions; keep steps trust-region
        // sized so iterates stay interior
        const double dmax = dx.lpNorm<Eigen::Infinity>();
        if (dmax > 0.25) dx *= 0.25 / dmax;
        double step = 1.0;
        bool accepted = false;
        for (int hv = 0; hv <= opt.max_halvings; ++hv) {
            std::vector<double> tn2 = res.theta_neg, tp2 = res.theta_pos;
            for (int l = 0; l < nn; ++l)
                tn2[l] = std::min(1.0, std::max(0.0, tn2[l] + step * dx(l)));
            for (int mI = 0; mI < np; ++mI)
                tp2[mI] = std::min(1.0, std::max(0.0, tp2[mI] + step * dx(nn + mI)));
            Eigen::VectorXd R2;
            residual(tn2, tp2, R2);
            if (R2.norm() < rnorm || R2.norm() <= target) {
                res.theta_neg = std::move(tn2);
                res.theta_pos = std::move(tp2);
                R = R2;
                rnorm = R.norm();
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // Newton direction blocked by a flux kink: nonlinear Gauss-Seidel
            // sweep; every row is strictly monotone in its own unknown.
            auto sweep_row = [&](auto eval, double lo_guess) {
                auto flo = eval(0.0);
                auto fhi = eval(1.0);
                if (flo == 0.0) return 0.0;
                if (fhi == 0.0) return 1.0;
                if (flo * fhi > 0.0)
                    return std::abs(flo) < std::abs(fhi) ? 0.0 : 1.0;
                return illinois_root(eval, 0.0, 1.0, flo, fhi,
                                     1e-13 * std::max(1.0, std::abs(flo)), 1e-14)
                    .x;
                (void)lo_guess;
            };
            std::vector<double> tn2 = res.theta_neg, tp2 = res.theta_pos;
            for (int l = 0; l < nn; ++l) {
                auto row = [&](double th) {
                    std::vector<double> t = tn2;
                    t[l] = th;
                    Eigen::VectorXd Rr;
                    residual(t, tp2, Rr);
                    return Rr(l);
                };
                tn2[l] = sweep_row(row, tn2[l]);
            }
            for (int mI = 0; mI < np; ++mI) {
                auto row = [&](double th) {
                    std::vector<double> t = tp2;
                    t[mI] = th;
                    Eigen::VectorXd Rr;
                    residual(tn2, t, Rr);
                    return Rr(nn + mI);
                };
                tp2[mI] = sweep_row(row, tp2[mI]);
            }
            Eigen::VectorXd R2;
            residual(tn2, tp2, R2);
            if (R2.norm() >= rnorm && R2.norm() > target) {
                // finite-difference noise floor: accept iterates that are
                // already far below the transmitted-data scale
                if (rnorm <= 1e-7 * data_scale) break;
                throw SolverError("interface trace iteration stalled at residual " +
                                  std::to_string(rnorm));
            }
            res.theta_neg = std::move(tn2);
            res.theta_pos = std::move(tp2);
            R = R2;
            rnorm = R.norm();
        }
        ++res.newton_iterations;
    }
    if (rnorm > target)
        throw SolverError("interface trace Newton did not converge; residual " +
                          std::to_string(rnorm));
    return res;
}

namespace {

// outward advected mass through ghost faces, recomputed from the stored
// states exactly as the sweeps evaluated it
std::vector<double> boundary_mass(const DecomposedDomain& dd,
                                  const std::vector<SubdomainAdvection>& adv,
                                  const std::vector<std::vector<CellField>>& path,
                                  const std::vector<std::map<int, double>>& ghost,
                                  const std::vector<FinePartition>& grids) {
    std::vector<double> out(dd.n_subdomains(), 0.0);
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const StructuredMesh& m = dd.mesh(i);
        for (const auto& [f, gval] : ghost[i]) {
            const Face& fc = m.faces[f];
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            for (int l = 0; l < grids[i].count(); ++l)
                out[i] += grids[i].step(l) * fc.area *
                          godunov_flux(adv[i].face[f], path[i][l][k], gval);
        }
    }
    return out;
}

} // namespace

AdvectionWindowResult advect_window(
    const DecomposedDomain& dd, const std::vector<RockType>& rocks,
    const FluidParams& fluid, const std::vector<SubdomainAdvection>& adv,
    const std::vector<CellField>& s0,
    const std::vector<std::map<int, double>>& boundary_ghost,
    const std::vector<FinePartition>& grids, const AdvectWindowOptions& opt) {
    const int n_sub = dd.n_subdomains();
    const int n_mortar = dd.n_mortar();
    AdvectionWindowResult res;
    res.theta_neg.resize(n_mortar);
    res.theta_pos.resize(n_mortar);
    res.mass_out_neg.assign(n_mortar, 0.0);
    res.mass_out_pos.assign(n_mortar, 0.0);

    // validate the configured steps against the stability bound
    for (int i = 0; i < n_sub; ++i) {
        const double bound =
            cfl_step(dd, i, rocks[dd.rock_index(i)], adv[i], opt.cfl_safety);
        for (int l = 0; l < grids[i].count(); ++l)
            if (grids[i].step(l) > bound * (1.0 + 1e-12))
                throw SolverError(
                    "advection fine step exceeds the stability bound; need " +
                    std::to_string(static_cast<int>(
                        std::ceil((grids[i].t1 - grids[i].t0) / bound))) +
                    " substeps in subdomain " + std::to_string(i));
    }

    struct FaceCtx {
        int sub_n = 0, face_n = 0, sub_p = 0, face_p = 0;
        int slot_n = 0, slot_p = 0;
        int cell_n = 0, cell_p = 0;
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

    if (opt.mode == AdvectionMode::Conforming) {
        for (int i = 1; i < n_sub; ++i)
            if (grids[i].count() != grids[0].count())
                throw ConfigError("conforming advection requires matching fine grids");
        const int N = grids[0].count();
        for (int m = 0; m < n_mortar; ++m) {
            res.theta_neg[m].assign(N, 0.0);
            res.theta_pos[m].assign(N, 0.0);
        }
        res.s_path.resize(n_sub);
        for (int i = 0; i < n_sub; ++i) res.s_path[i].push_back(s0[i]);

        std::vector<CellField> s = s0;
        for (int l = 0; l < N; ++l) {
            // per-face trace systems decouple; solve then step both sides
            std::vector<std::vector<double>> mortar_flux(n_sub);
            for (int i = 0; i < n_sub; ++i)
                mortar_flux[i].assign(dd.subdomain_mortars(i).size(), 0.0);
            for (int m = 0; m < n_mortar; ++m) {
                const FaceCtx& fx = faces[m];
                ConformingTrace tr = interface_conforming(
                    rocks[dd.rock_index(fx.sub_n)], rocks[dd.rock_index(fx.sub_p)],
                    adv[fx.sub_n].face[fx.face_n], adv[fx.sub_p].face[fx.face_p],
                    s[fx.sub_n][fx.cell_n], s[fx.sub_p][fx.cell_p]);
                res.theta_neg[m][l] = tr.theta_neg;
                res.theta_pos[m][l] = tr.theta_pos;
                mortar_flux[fx.sub_n][fx.slot_n] = tr.flux_neg;
                mortar_flux[fx.sub_p][fx.slot_p] = -tr.flux_neg;  // exact transmission
                const double mism =
                    std::abs(rocks[dd.rock_index(fx.sub_n)].pc(tr.theta_neg) -
                             rocks[dd.rock_index(fx.sub_p)].pc(tr.theta_pos));
                res.max_capillary_mismatch =
                    std::max(res.max_capillary_mismatch, mism);
                const double dt = grids[0].step(l);
                res.mass_out_neg[m] += dt * fx.area * tr.flux_neg;
                res.mass_out_pos[m] += dt * fx.area * (-tr.flux_neg);
            }
            for (int i = 0; i < n_sub; ++i) {
                s[i] = explicit_step(dd, i, rocks[dd.rock_index(i)], adv[i], s[i],
                                     boundary_ghost[i], mortar_flux[i],
                                     grids[i].step(l));
                res.s_path[i].push_back(s[i]);
            }
        }
        res.s_end = std::move(s);
        res.outer_sweeps = 1;
        res.boundary_mass_out = boundary_mass(dd, adv, res.s_path, boundary_ghost, grids);
        return res;
    }

    // Nonconforming mode: alternate subdomain sweeps (traces frozen) with
    // per-face space-time trace solves (cell paths frozen) until the traces
    // settle, then one final sweep.
    for (int m = 0; m < n_mortar; ++m) {
        const FaceCtx& fx = faces[m];
        // constant-in-time initial traces from the window-start states
        ConformingTrace tr = interface_conforming(
            rocks[dd.rock_index(fx.sub_n)], rocks[dd.rock_index(fx.sub_p)],
            adv[fx.sub_n].face[fx.face_n], adv[fx.sub_p].face[fx.face_p],
            s0[fx.sub_n][fx.cell_n], s0[fx.sub_p][fx.cell_p]);
        res.theta_neg[m].assign(grids[fx.sub_n].count(), tr.theta_neg);
        res.theta_pos[m].assign(grids[fx.sub_p].count(), tr.theta_pos);
    }

    auto sweep = [&](std::vector<std::vector<CellField>>& path) {
        path.assign(n_sub, {});
        for (int i = 0; i < n_sub; ++i) {
            path[i].push_back(s0[i]);
            CellField s = s0[i];
            const auto& slots = dd.subdomain_mortars(i);
            for (int l = 0; l < grids[i].count(); ++l) {
                std::vector<double> mflux(slots.size(), 0.0);
                for (size_t q = 0; q < slots.size(); ++q) {
                    const int m = slots[q].first;
                    const FaceCtx& fx = faces[m];
                    const bool neg = (fx.sub_n == i);
                    const double theta =
                        neg ? res.theta_neg[m][l] : res.theta_pos[m][l];
                    const int lf = neg ? fx.face_n : fx.face_p;
                    const int cell = neg ? fx.cell_n : fx.cell_p;
                    mflux[q] = godunov_flux(adv[i].face[lf], s[cell], theta);
                }
                s = explicit_step(dd, i, rocks[dd.rock_index(i)], adv[i], s,
                                  boundary_ghost[i], mflux, grids[i].step(l));
                path[i].push_back(s);
            }
        }
    };

    for (int sweep_it = 0; sweep_it < opt.max_outer; ++sweep_it) {
        sweep(res.s_path);
        double change = 0.0;
        for (int m = 0; m < n_mortar; ++m) {
            const FaceCtx& fx = faces[m];
            std::vector<double> sn(grids[fx.sub_n].count());
            std::vector<double> sp(grids[fx.sub_p].count());
            for (int l = 0; l < grids[fx.sub_n].count(); ++l)
                sn[l] = res.s_path[fx.sub_n][l][fx.cell_n];
            for (int l = 0; l < grids[fx.sub_p].count(); ++l)
                sp[l] = res.s_path[fx.sub_p][l][fx.cell_p];
            NonconformingTraceResult tr = interface_nonconforming(
                rocks[dd.rock_index(fx.sub_n)], rocks[dd.rock_index(fx.sub_p)],
                adv[fx.sub_n].face[fx.face_n], adv[fx.sub_p].face[fx.face_p], sn,
                sp, grids[fx.sub_n], grids[fx.sub_p], opt.kappa_neg, opt.kappa_pos,
                opt.trace, &res.theta_neg[m], &res.theta_pos[m]);
            res.trace_newton_iterations += tr.newton_iterations;
            for (size_t l = 0; l < tr.theta_neg.size(); ++l)
                change = std::max(change,
                                  std::abs(tr.theta_neg[l] - res.theta_neg[m][l]));
            for (size_t l = 0; l < tr.theta_pos.size(); ++l)
                change = std::max(change,
                                  std::abs(tr.theta_pos[l] - res.theta_pos[m][l]));
            res.theta_neg[m] = std::move(tr.theta_neg);
            res.theta_pos[m] = std::move(tr.theta_pos);
        }
        res.outer_sweeps = sweep_it + 1;
        if (change <= opt.outer_tol) break;
        if (sweep_it + 1 == opt.max_outer)
            throw SolverError("nonconforming advection window did not settle");
    }
    sweep(res.s_path);
    res.s_end.resize(n_sub);
    for (int i = 0; i < n_sub; ++i) res.s_end[i] = res.s_path[i].back();
    res.boundary_mass_out = boundary_mass(dd, adv, res.s_path, boundary_ghost, grids);

    // interface bookkeeping and the window-averaged capillary mismatch
    for (int m = 0; m < n_mortar; ++m) {
        const FaceCtx& fx = faces[m];
        const FinePartition& gn = grids[fx.sub_n];
        const FinePartition& gp = grids[fx.sub_p];
        double int_pi_n = 0.0, int_pi_p = 0.0;
        for (int l = 0; l < gn.count(); ++l) {
            const double phi =
                godunov_flux(adv[fx.sub_n].face[fx.face_n],
                             res.s_path[fx.sub_n][l][fx.cell_n], res.theta_neg[m][l]);
            res.mass_out_neg[m] += gn.step(l) * fx.area * phi;
            int_pi_n +=
                gn.step(l) * rocks[dd.rock_index(fx.sub_n)].pc(res.theta_neg[m][l]);
        }
        for (int l = 0; l < gp.count(); ++l) {
            const double phi =
                godunov_flux(adv[fx.sub_p].face[fx.face_p],
                             res.s_path[fx.sub_p][l][fx.cell_p], res.theta_pos[m][l]);
            res.mass_out_pos[m] += gp.step(l) * fx.area * phi;
            int_pi_p +=
                gp.step(l) * rocks[dd.rock_index(fx.sub_p)].pc(res.theta_pos[m][l]);
        }
        const double tau_w = gn.t1 - gn.t0;
        res.max_capillary_mismatch = std::max(
            res.max_capillary_mismatch, std::abs(int_pi_n - int_pi_p) / tau_w);
    }
    return res;
}

} // namespace splitflow
