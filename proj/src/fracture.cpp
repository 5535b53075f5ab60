#include "splitflow/fracture.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "splitflow/krylov.hpp"
#include "splitflow/orchestrator.hpp"

namespace splitflow {

FractureGrid::FractureGrid(const DecomposedDomain& dd, const RockType& rock)
    : dd_(&dd), rock_(&rock) {
    const int n = dd.n_mortar();
    if (n == 0) throw ConfigError("fracture grid requires interface faces");
    area_.resize(n);
    for (int m = 0; m < n; ++m) area_[m] = dd.mortar()[m].area;

    // lattice indices of each face within the interface plane
    const int split_axis = dd.spec().split_axis;
    const StructuredMesh& m0 = dd.mesh(dd.mortar()[0].sub_neg);
    std::vector<std::array<int, 3>> idx(n);
    for (int m = 0; m < n; ++m)
        for (int a = 0; a < 3; ++a) {
            if (a == split_axis || a >= dd.spec().dim) {
                idx[m][a] = 0;
                continue;
            }
            idx[m][a] = static_cast<int>(std::lround(
                (dd.mortar()[m].centroid[a] - m0.origin[a]) / m0.h[a] - 0.5));
        }
    for (int a = 0; a < dd.spec().dim; ++a) {
        if (a == split_axis) continue;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                int diff = 0, dsum = 0;
                for (int b = 0; b < 3; ++b) {
                    const int d = std::abs(idx[p][b] - idx[q][b]);
                    dsum += d;
                    if (b == a) diff = d;
                }
                if (dsum == 1 && diff == 1) {
                    Edge e;
                    e.cell_a = p;
                    e.cell_b = q;
                    e.axis = a;
                    e.dist = m0.h[a];
                    e.measure = 1.0;
                    for (int b = 0; b < dd.spec().dim; ++b)
                        if (b != a && b != split_axis) e.measure *= m0.h[b];
                    edges_.push_back(e);
                }
            }
    }
}

FracturePressureResult fracture_pressure_solve(
    const FractureGrid& fg, InterfacePressure& matrix_ops,
    const FluidParams& fluid, const std::vector<CellField>& s_matrix,
    const std::vector<double>& s_hat, bool gravity, bool precondition,
    double tol, int max_iter) {
    const DecomposedDomain& dd = fg.domain();
    const RockType& frock = fg.rock();
    const int n = fg.n_cells();
    matrix_ops.set_saturation(s_matrix);

    std::vector<double> mob_e(fg.edges().size());
    std::vector<double> grav_e(fg.edges().size());
    for (size_t e = 0; e < fg.edges().size(); ++e) {
        const auto& ed = fg.edges()[e];
        const double ma = frock.coefficients(fluid, s_hat[ed.cell_a]).M;
        const double mb = frock.coefficients(fluid, s_hat[ed.cell_b]).M;
        mob_e[e] = 2.0 * ma * mb / (ma + mb);
        const double rho =
            0.5 * (frock.coefficients(fluid, s_hat[ed.cell_a]).rho_mix +
                   frock.coefficients(fluid, s_hat[ed.cell_b]).rho_mix);
        grav_e[e] = gravity ? rho * fluid.gravity[ed.axis] : 0.0;
    }

    // integrated-form operator: tangential two-point part plus the matrix
    // flux-jump coupling
    LinearOp A = [&](const Vec& p) {
        Vec out(n, 0.0);
        for (size_t e = 0; e < fg.edges().size(); ++e) {
            const auto& ed = fg.edges()[e];
            const double t = ed.measure * mob_e[e] / ed.dist;
            const double f = t * (p[ed.cell_a] - p[ed.cell_b]);
            out[ed.cell_a] += f;
            out[ed.cell_b] -= f;
        }
        InterfaceTrace sp = matrix_ops.sp_apply(p);
        for (int c = 0; c < n; ++c) out[c] += fg.area(c) * sp[c];
        return out;
    };

    // right-hand side: matrix auxiliary solves carry the beta offsets,
    // gravity and outer data; the trace variable is lambda = p_hat - beta_f
    Vec rhs(n, 0.0);
    {
        std::vector<double> beta_f(n);
        for (int c = 0; c < n; ++c) beta_f[c] = frock.beta(s_hat[c]);
        InterfaceTrace s_beta = matrix_ops.sp_apply(beta_f);
        InterfaceTrace g = matrix_ops.sp_rhs(gravity);
        for (int c = 0; c < n; ++c) rhs[c] = fg.area(c) * (g[c] + s_beta[c]);
        for (size_t e = 0; e < fg.edges().size(); ++e) {
            const auto& ed = fg.edges()[e];
            const double f = ed.measure * mob_e[e] * grav_e[e];
            rhs[ed.cell_a] -= f;
            rhs[ed.cell_b] += f;
        }
    }

    // preconditioner: pinned tangential operator
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (size_t e = 0; e < fg.edges().size(); ++e) {
        const auto& ed = fg.edges()[e];
        const double t = ed.measure * mob_e[e] / ed.dist;
        L(ed.cell_a, ed.cell_a) += t;
        L(ed.cell_b, ed.cell_b) += t;
        L(ed.cell_a, ed.cell_b) -= t;
        L(ed.cell_b, ed.cell_a) -= t;
    }
    for (int c = 0; c < n; ++c) L(0, c) = 0.0;
    L(0, 0) = 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> Llu(L);
    LinearOp M = [&](const Vec& r) {
        Eigen::VectorXd b(n);
        for (int c = 0; c < n; ++c) b(c) = r[c];
        b(0) = 0.0;
        Eigen::VectorXd z = Llu.solve(b);
        return Vec(z.data(), z.data() + n);
    };

    InnerProduct dot = [](const Vec& a, const Vec& b) {
        double s = 0.0;
        for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };
    CgOptions copt;
    copt.tol = tol;
    copt.max_iter = max_iter;
    copt.deflate_constants = true;
    KrylovResult kr = pcg(A, rhs, dot, copt, precondition ? &M : nullptr);
    if (!kr.converged)
        throw SolverError("fracture pressure CG did not converge; residual " +
                          std::to_string(kr.residual));

    FracturePressureResult res;
    res.p_hat = kr.x;
    res.cg_iterations = kr.iterations;

    std::vector<double> lam(n);
    for (int c = 0; c < n; ++c) lam[c] = res.p_hat[c] - frock.beta(s_hat[c]);
    res.matrix = matrix_ops.reconstruct(lam, gravity);
    // reconstruct() pins the global constant; shift the fracture pressure by
    // the same amount
    {
        int qn = -1;
        const auto& slots = dd.subdomain_mortars(dd.mortar()[0].sub_neg);
        for (size_t t = 0; t < slots.size(); ++t)
            if (slots[t].first == 0) qn = static_cast<int>(t);
        const double shift =
            lam[0] - res.matrix[dd.mortar()[0].sub_neg].mortar_trace[qn];
        for (auto& p : res.p_hat) p -= shift;
    }

    res.u_tangential.resize(fg.edges().size());
    for (size_t e = 0; e < fg.edges().size(); ++e) {
        const auto& ed = fg.edges()[e];
        res.u_tangential[e] =
            mob_e[e] * ((res.p_hat[ed.cell_a] - res.p_hat[ed.cell_b]) / ed.dist +
                        grav_e[e]);
    }
    return res;
}

FractureAdvectionResult fracture_advect_window(
    const FractureGrid& fg, const std::vector<RockType>& rocks,
    const FluidParams& fluid, const std::vector<SubdomainAdvection>& adv_matrix,
    const std::vector<DirectionalFlux>& adv_tangential,
    const std::vector<CellField>& s_matrix, const std::vector<double>& s_hat,
    const std::vector<std::map<int, double>>& boundary_ghost,
    const std::vector<FinePartition>& matrix_grids,
    const FinePartition& fracture_grid, double outer_tol, int max_outer) {
    const DecomposedDomain& dd = fg.domain();
    const RockType& frock = fg.rock();
    const int n = fg.n_cells();
    const int nf_steps = fracture_grid.count();
    (void)fluid;

    // tangential stability check
    {
        std::vector<double> lip(fg.edges().size(), 0.0);
        for (size_t e = 0; e < fg.edges().size(); ++e) {
            double prev = adv_tangential[e](0.0);
            for (int q = 1; q <= 128; ++q) {
                const double v = adv_tangential[e](q / 128.0);
                lip[e] = std::max(lip[e], std::abs(v - prev) * 128.0);
                prev = v;
            }
        }
        for (int c = 0; c < n; ++c) {
            double denom = 0.0;
            for (size_t e = 0; e < fg.edges().size(); ++e)
                if (fg.edges()[e].cell_a == c || fg.edges()[e].cell_b == c)
                    denom += fg.edges()[e].measure * lip[e];
            if (denom > 0.0) {
                const double bound = frock.porosity() * fg.area(c) / denom;
                for (int l = 0; l < nf_steps; ++l)
                    if (fracture_grid.step(l) > bound)
                        throw SolverError(
                            "fracture advection step exceeds the stability bound");
            }
        }
    }

    FractureAdvectionResult res;
    res.s_hat_path.assign(nf_steps + 1, s_hat);

    std::vector<std::vector<CellField>> mpath(dd.n_subdomains());
    std::vector<std::vector<std::vector<double>>> mflux_hist(dd.n_subdomains());

    for (int sweep = 0; sweep < max_outer; ++sweep) {
        // capillary trajectory of the fracture per fracture interval
        std::vector<std::vector<double>> pc_f(nf_steps, std::vector<double>(n));
        for (int l = 0; l < nf_steps; ++l)
            for (int c = 0; c < n; ++c)
                pc_f[l][c] = frock.pc(res.s_hat_path[l][c]);

        // matrix sweeps with capillary-matched traces
        for (int i = 0; i < dd.n_subdomains(); ++i) {
            const RockType& rock = rocks[dd.rock_index(i)];
            const auto& slots = dd.subdomain_mortars(i);
            const FinePartition& g = matrix_grids[i];
            std::vector<std::vector<double>> pc_i =
                project_vectors(pc_f, fracture_grid, g);
            mpath[i].assign(1, s_matrix[i]);
            mflux_hist[i].assign(g.count(),
                                 std::vector<double>(slots.size(), 0.0));
            CellField s = s_matrix[i];
            for (int l = 0; l < g.count(); ++l) {
                std::vector<double> mflux(slots.size(), 0.0);
                for (size_t q = 0; q < slots.size(); ++q) {
                    const int mid = slots[q].first;
                    const int lf = slots[q].second;
                    const Face& fc = dd.mesh(i).faces[lf];
                    const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
                    const double theta = rock.pc_inverse(pc_i[l][mid]);
                    mflux[q] = godunov_flux(adv_matrix[i].face[lf], s[k], theta);
                    mflux_hist[i][l][q] = mflux[q];
                }
                s = explicit_step(dd, i, rock, adv_matrix[i], s,
                                  boundary_ghost[i], mflux, g.step(l));
                mpath[i].push_back(s);
            }
        }

        // fracture sources: time-projected matrix outward fluxes
        std::vector<std::vector<double>> source(nf_steps,
                                                std::vector<double>(n, 0.0));
        for (int i = 0; i < dd.n_subdomains(); ++i) {
            const auto& slots = dd.subdomain_mortars(i);
            std::vector<std::vector<double>> by_face(
                matrix_grids[i].count(), std::vector<double>(n, 0.0));
            for (int l = 0; l < matrix_grids[i].count(); ++l)
                for (size_t q = 0; q < slots.size(); ++q)
                    by_face[l][slots[q].first] = mflux_hist[i][l][q];
            std::vector<std::vector<double>> proj =
                project_vectors(by_face, matrix_grids[i], fracture_grid);
            for (int l = 0; l < nf_steps; ++l)
                for (int c = 0; c < n; ++c) source[l][c] += proj[l][c];
        }

        // fracture sweep
        std::vector<std::vector<double>> new_path(nf_steps + 1, s_hat);
        for (int l = 0; l < nf_steps; ++l) {
            const std::vector<double>& cur = new_path[l];
            std::vector<double>& nxt = new_path[l + 1];
            std::vector<double> div(n, 0.0);
            for (size_t e = 0; e < fg.edges().size(); ++e) {
                const auto& ed = fg.edges()[e];
                const double phi = godunov_flux(adv_tangential[e], cur[ed.cell_a],
                                                cur[ed.cell_b]);
                div[ed.cell_a] += ed.measure * phi;
                div[ed.cell_b] -= ed.measure * phi;
            }
            const double dt = fracture_grid.step(l);
            for (int c = 0; c < n; ++c) {
                const double coef = dt / (frock.porosity() * fg.area(c));
                double v = cur[c] - coef * (div[c] - fg.area(c) * source[l][c]);
                if (v < -1e-10 || v > 1.0 + 1e-10)
                    throw SolverError("fracture advection left [0,1]");
                nxt[c] = std::min(1.0, std::max(0.0, v));
            }
        }

        double change = 0.0;
        for (int l = 0; l <= nf_steps; ++l)
            for (int c = 0; c < n; ++c)
                change = std::max(
                    change, std::abs(new_path[l][c] - res.s_hat_path[l][c]));
        res.s_hat_path = std::move(new_path);
        res.sweeps = sweep + 1;
        if (change <= outer_tol) break;
        if (sweep + 1 == max_outer)
            throw SolverError("fracture advection window did not settle");
    }

    res.s_hat_end = res.s_hat_path.back();
    res.s_matrix_end.resize(dd.n_subdomains());
    res.boundary_mass_out.assign(dd.n_subdomains(), 0.0);
    res.exchange_mass = 0.0;
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        res.s_matrix_end[i] = mpath[i].back();
        const StructuredMesh& m = dd.mesh(i);
        for (const auto& [f, gval] : boundary_ghost[i]) {
            const Face& fc = m.faces[f];
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            for (int l = 0; l < matrix_grids[i].count(); ++l)
                res.boundary_mass_out[i] +=
                    matrix_grids[i].step(l) * fc.area *
                    godunov_flux(adv_matrix[i].face[f], mpath[i][l][k], gval);
        }
        const auto& slots = dd.subdomain_mortars(i);
        for (int l = 0; l < matrix_grids[i].count(); ++l)
            for (size_t q = 0; q < slots.size(); ++q)
                res.exchange_mass += matrix_grids[i].step(l) *
                                     dd.mortar()[slots[q].first].area *
                                     mflux_hist[i][l][q];
    }
    return res;
}

FractureDiffusionResult fracture_diffusion_solve(
    const FractureGrid& fg, const std::vector<SubdomainDiffusion*>& subs,
    const std::vector<CellField>& s_star_matrix,
    const std::vector<double>& s_hat_star, double tau,
    const NewtonOptions& subdomain_opt, double tol_newton, double tol_gmres,
    int max_newton, int max_gmres) {
    const DecomposedDomain& dd = fg.domain();
    const RockType& frock = fg.rock();
    const int n = fg.n_cells();

    FractureDiffusionResult res;
    std::vector<double> theta = s_hat_star;

    auto apply_residual = [&](const std::vector<double>& th,
                              std::vector<SubdomainDiffusion::Result>* states) {
        Vec R(n, 0.0);
        if (states) states->resize(dd.n_subdomains());
        for (int i = 0; i < dd.n_subdomains(); ++i) {
            const auto& slots = dd.subdomain_mortars(i);
            std::vector<double> lam(slots.size());
            for (size_t q = 0; q < slots.size(); ++q)
                lam[q] = frock.pc(th[slots[q].first]);
            SubdomainDiffusion::Result r = subs[i]->solve_dirichlet(
                s_star_matrix[i], tau, lam, subdomain_opt);
            for (size_t q = 0; q < slots.size(); ++q)
                R[slots[q].first] -=
                    fg.area(slots[q].first) * r.state.mortar_flux[q];
            if (states) (*states)[i] = std::move(r);
        }
        for (int c = 0; c < n; ++c)
            R[c] += frock.porosity() * fg.area(c) * (th[c] - s_hat_star[c]) / tau;
        for (const auto& ed : fg.edges()) {
            const double t = ed.measure * frock.permeability() / ed.dist;
            const double f = t * (frock.kirchhoff_alpha(th[ed.cell_a]) -
                                  frock.kirchhoff_alpha(th[ed.cell_b]));
            R[ed.cell_a] += f;
            R[ed.cell_b] -= f;
        }
        return R;
    };

    auto norm = [&](const Vec& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };

    std::vector<SubdomainDiffusion::Result> states;
    Vec F = apply_residual(theta, &states);
    double fnorm = norm(F);
    const double f0 = fnorm;
    const double floor_scale =
        1e-13 * frock.porosity() * fg.area(0) / tau * std::sqrt(n + 1.0);
    const double target = std::max(tol_newton * f0, floor_scale);

    InnerProduct dot = [](const Vec& a, const Vec& b) {
        double s = 0.0;
        for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };

    while (fnorm > target) {
        if (res.newton_iterations >= max_newton)
            throw SolverError("fracture diffusion Newton exceeded its budget");
        // preconditioner: accumulation plus the linearized tangential operator
        Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
        for (int c = 0; c < n; ++c)
            P(c, c) = frock.porosity() * fg.area(c) / tau;
        for (const auto& ed : fg.edges()) {
            const double ap = 0.5 * (frock.alpha_prime(theta[ed.cell_a]) +
                                     frock.alpha_prime(theta[ed.cell_b]));
            const double t = ed.measure * frock.permeability() * ap / ed.dist;
            P(ed.cell_a, ed.cell_a) += t;
            P(ed.cell_b, ed.cell_b) += t;
            P(ed.cell_a, ed.cell_b) -= t;
            P(ed.cell_b, ed.cell_a) -= t;
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> Plu(P);
        LinearOp M = [&](const Vec& v) {
            Eigen::Map<const Eigen::VectorXd> mv(v.data(), n);
            Eigen::VectorXd z = Plu.solve(mv);
            return Vec(z.data(), z.data() + n);
        };
        const double th_norm = norm(theta);
        LinearOp J = [&](const Vec& v) {
            const double vn = norm(v);
            if (vn == 0.0) return Vec(v.size(), 0.0);
            const double h = std::sqrt(std::numeric_limits<double>::epsilon()) *
                             (1.0 + th_norm) / vn;
            std::vector<double> th2 = theta;
            for (int c = 0; c < n; ++c)
                th2[c] = std::min(1.0, std::max(0.0, th2[c] + h * v[c]));
            Vec F2 = apply_residual(th2, nullptr);
            Vec out(n);
            for (int c = 0; c < n; ++c) out[c] = (F2[c] - F[c]) / h;
            return out;
        };
        Vec rhs(n);
        for (int c = 0; c < n; ++c) rhs[c] = -F[c];
        GmresOptions gopt;
        gopt.tol = tol_gmres;
        gopt.max_iter = max_gmres;
        gopt.restart = std::min(30, n);
        KrylovResult kr = gmres(J, rhs, dot, gopt, &M);
        res.gmres_iterations += kr.iterations;

        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h <= 10; ++h) {
            std::vector<double> th2 = theta;
            for (int c = 0; c < n; ++c)
                th2[c] = std::min(1.0 - frock.eps_s(),
                                  std::max(frock.eps_s(), th2[c] + step * kr.x[c]));
            std::vector<SubdomainDiffusion::Result> st2;
            Vec F2 = apply_residual(th2, &st2);
            if (norm(F2) < fnorm || norm(F2) <= target) {
                theta = std::move(th2);
                states = std::move(st2);
                F = std::move(F2);
                fnorm = norm(F);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        ++res.newton_iterations;
        if (!accepted)
            throw SolverError("fracture diffusion Newton stalled at residual " +
                              std::to_string(fnorm));
    }

    res.s_hat_new = theta;
    res.s_matrix_new.resize(dd.n_subdomains());
    res.matrix_states.resize(dd.n_subdomains());
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        res.s_matrix_new[i] = states[i].s_new;
        res.matrix_states[i] = states[i].state;
    }
    return res;
}

// ---------------------------------------------------------------------------
// window loop

SimulationOutput run_fracture_model(const Simulation& sim) {
    const SimulationConfig& cfg = sim.config();
    const DecomposedDomain& dd = sim.domain();
    const std::vector<RockType>& rocks = sim.rocks();
    const FractureConfig& fc = *cfg.fracture;
    const int n_sub = dd.n_subdomains();

    RockType frock(fc.porosity_eff, fc.permeability_eff,
                   VanGenuchtenParams::make(fc.rock.vg_n, fc.rock.vg_alpha,
                                            fc.rock.orientation),
                   fc.rock.entry_pressure, fc.rock.table_resolution,
                   fc.rock.eps_s);
    FractureGrid fg(dd, frock);

    InterfacePressure pressure(dd, rocks, cfg.fluid);
    std::vector<std::unique_ptr<SubdomainDiffusion>> diff_owned;
    std::vector<SubdomainDiffusion*> diff;
    for (int i = 0; i < n_sub; ++i) {
        diff_owned.push_back(
            std::make_unique<SubdomainDiffusion>(dd, i, rocks[dd.rock_index(i)]));
        diff.push_back(diff_owned.back().get());
    }
    for (int i = 0; i < n_sub; ++i)
        pressure.set_outer_flux(i, sim.outer_flux_table(i));

    SimulationOutput out;
    out.domain = sim.domain_;
    out.rocks = sim.rocks_;

    std::vector<CellField> s = sim.initial_saturation();
    // the fracture starts in capillary equilibrium with the adjacent matrix
    std::vector<double> s_hat(fg.n_cells());
    for (int c = 0; c < fg.n_cells(); ++c) {
        const MortarFace& mf = dd.mortar()[c];
        const Face& fn = dd.mesh(mf.sub_neg).faces[mf.face_neg];
        const int k = fn.cell_neg >= 0 ? fn.cell_neg : fn.cell_pos;
        s_hat[c] = frock.pc_inverse(
            rocks[dd.rock_index(mf.sub_neg)].pc(s[mf.sub_neg][k]));
    }

    out.coarse_times.push_back(0.0);
    out.s_at_coarse.push_back(s);
    out.fracture_s_at_coarse.push_back(s_hat);

    TimeGrids grids =
        TimeGrids::uniform(cfg.total_time, cfg.n_windows, cfg.substeps);

    for (int n = 0; n < cfg.n_windows; ++n) {
        WindowRecord rec;
        rec.index = n;
        rec.t_begin = grids.coarse[n];
        rec.t_end = grids.coarse[n + 1];
        const double tau = grids.window_step(n);
        auto total_mass = [&](const std::vector<CellField>& sm,
                              const std::vector<double>& sf) {
            double acc = 0.0;
            for (int i = 0; i < n_sub; ++i) {
                const double phiV = rocks[dd.rock_index(i)].porosity() *
                                    dd.mesh(i).cell_volume;
                for (double v : sm[i]) acc += phiV * v;
            }
            for (int c = 0; c < fg.n_cells(); ++c)
                acc += frock.porosity() * fg.area(c) * sf[c];
            return acc;
        };
        rec.mass_begin = total_mass(s, s_hat);

        rec.call_order.push_back("pressure");
        FracturePressureResult ps = fracture_pressure_solve(
            fg, pressure, cfg.fluid, s, s_hat, cfg.gravity,
            /*precondition=*/true, cfg.tol.cg, cfg.tol.max_cg);
        rec.pressure.method = "fracture-cg";
        rec.pressure.iterations = ps.cg_iterations;
        rec.rhs_norm = trace_norm(dd, pressure.sp_rhs(cfg.gravity));

        rec.call_order.push_back("advection");
        std::vector<SubdomainAdvection> adv;
        std::vector<std::map<int, double>> ghost(n_sub);
        for (int i = 0; i < n_sub; ++i) {
            adv.push_back(build_advection(dd, i, rocks[dd.rock_index(i)],
                                          cfg.fluid, ps.matrix[i].flux));
            ghost[i] = sim.boundary_ghost_table(i, s[i]);
        }
        std::vector<DirectionalFlux> adv_t;
        for (size_t e = 0; e < fg.edges().size(); ++e)
            adv_t.push_back(make_directional_flux(
                frock, cfg.fluid, ps.u_tangential[e],
                cfg.gravity ? cfg.fluid.gravity[fg.edges()[e].axis] : 0.0));
        FinePartition fgrid = FinePartition::uniform(
            grids.coarse[n], grids.coarse[n + 1], fc.substeps);
        FractureAdvectionResult aw = fracture_advect_window(
            fg, rocks, cfg.fluid, adv, adv_t, s, s_hat, ghost, grids.fine[n],
            fgrid, cfg.tol.advection_outer, cfg.tol.max_advection_outer);
        rec.advection_outer = aw.sweeps;

        rec.call_order.push_back("diffusion");
        NewtonOptions nopt;
        nopt.rtol = cfg.tol.newton_subdomain;
        nopt.atol = cfg.tol.newton_subdomain_abs;
        for (int i = 0; i < n_sub; ++i) {
            std::vector<std::pair<int, double>> g(ghost[i].begin(),
                                                  ghost[i].end());
            diff[i]->set_outer_saturation(std::move(g));
        }
        FractureDiffusionResult dres = fracture_diffusion_solve(
            fg, diff, aw.s_matrix_end, aw.s_hat_end, tau, nopt,
            cfg.tol.newton_interface, cfg.tol.gmres_interface,
            cfg.tol.max_newton, cfg.tol.max_gmres);
        rec.diffusion.newton_iterations = dres.newton_iterations;
        rec.diffusion.gmres_iterations = dres.gmres_iterations;
        s = dres.s_matrix_new;
        s_hat = dres.s_hat_new;

        rec.mass_end = total_mass(s, s_hat);
        double boundary_out = 0.0;
        for (int i = 0; i < n_sub; ++i) {
            boundary_out += aw.boundary_mass_out[i];
            for (const auto& [f, gval] : ghost[i]) {
                const Face& fcm = dd.mesh(i).faces[f];
                const int k = fcm.cell_neg >= 0 ? fcm.cell_neg : fcm.cell_pos;
                boundary_out += tau * fcm.area * dres.matrix_states[i].flux[f] *
                                fcm.sign_for(k);
            }
        }
        rec.boundary_net_influx = -boundary_out;
        rec.ledger_error =
            std::abs(rec.mass_end - rec.mass_begin - rec.boundary_net_influx);
        out.windows.push_back(std::move(rec));
        out.coarse_times.push_back(grids.coarse[n + 1]);
        out.s_at_coarse.push_back(s);
        out.fracture_s_at_coarse.push_back(s_hat);
    }
    return out;
}

} // namespace splitflow
