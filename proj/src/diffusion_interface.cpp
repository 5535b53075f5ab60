#include "splitflow/diffusion_interface.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "splitflow/krylov.hpp"

namespace splitflow {

DiffusionInterface::DiffusionInterface(const DecomposedDomain& dd,
                                       const std::vector<RockType>& rocks)
    : dd_(&dd), rocks_(&rocks) {
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const RockType& rock = rocks[dd.rock_index(i)];
        if (!rock.diffusive())
            throw ConfigError(
                "capillary orientation gives a negative diffusivity; the "
                "implicit diffusion step requires decreasing curves");
        subs_.push_back(std::make_unique<SubdomainDiffusion>(dd, i, rock));
    }
}

void DiffusionInterface::set_outer_saturation(
    int sub, std::vector<std::pair<int, double>> ghost) {
    subs_[sub]->set_outer_saturation(std::move(ghost));
}

std::vector<double> DiffusionInterface::restrict_to(int sub,
                                                    const InterfaceTrace& v) const {
    const auto& slots = dd_->subdomain_mortars(sub);
    std::vector<double> out(slots.size());
    for (size_t q = 0; q < slots.size(); ++q) out[q] = v[slots[q].first];
    return out;
}

InterfaceTrace DiffusionInterface::zdtn_apply(
    const std::vector<CellField>& s_star, double tau,
    const InterfaceTrace& lambda_d, DiffusionReport* rep,
    std::vector<SubdomainDiffusion::Result>* states) const {
    InterfaceTrace out = zero_trace(*dd_);
    if (states) states->resize(dd_->n_subdomains());
    for (int i = 0; i < dd_->n_subdomains(); ++i) {
        SubdomainDiffusion::Result r = subs_[i]->solve_dirichlet(
            s_star[i], tau, restrict_to(i, lambda_d), NewtonOptions{});
        if (rep) {
            rep->subdomain_newton_iterations += r.newton_iterations;
            ++rep->subdomain_solves;
        }
        const auto& slots = dd_->subdomain_mortars(i);
        for (size_t q = 0; q < slots.size(); ++q)
            out[slots[q].first] += r.state.mortar_flux[q];
        if (states) (*states)[i] = std::move(r);
    }
    return out;
}

InterfaceTrace
DiffusionInterface::initial_guess(const std::vector<CellField>& s_star) const {
    InterfaceTrace lam = zero_trace(*dd_);
    for (int m = 0; m < dd_->n_mortar(); ++m) {
        const MortarFace& mf = dd_->mortar()[m];
        const Face& fn = dd_->mesh(mf.sub_neg).faces[mf.face_neg];
        const Face& fp = dd_->mesh(mf.sub_pos).faces[mf.face_pos];
        const int kn = fn.cell_neg >= 0 ? fn.cell_neg : fn.cell_pos;
        const int kp = fp.cell_neg >= 0 ? fp.cell_neg : fp.cell_pos;
        const double pn =
            (*rocks_)[dd_->rock_index(mf.sub_neg)].pc(s_star[mf.sub_neg][kn]);
        const double pp =
            (*rocks_)[dd_->rock_index(mf.sub_pos)].pc(s_star[mf.sub_pos][kp]);
        lam[m] = 0.5 * (pn + pp);
    }
    return lam;
}

DiffusionInterface::Result
DiffusionInterface::newton_gmres(const std::vector<CellField>& s_star, double tau,
                                 const DiffusionMethodOptions& opt,
                                 const InterfaceTrace* warm) const {
    Result res;
    res.lambda_d = warm ? *warm : initial_guess(s_star);

    // admissible capillary range per face: iterates outside it hit the
    // clamped branch of the inverse curve where the operator goes flat
    std::vector<std::pair<double, double>> qrange(dd_->n_mortar());
    for (int m = 0; m < dd_->n_mortar(); ++m) {
        const MortarFace& mf = dd_->mortar()[m];
        auto [lo_n, hi_n] = (*rocks_)[dd_->rock_index(mf.sub_neg)].pc_range();
        auto [lo_p, hi_p] = (*rocks_)[dd_->rock_index(mf.sub_pos)].pc_range();
        const double lo = std::max(lo_n, lo_p), hi = std::min(hi_n, hi_p);
        if (!(lo < hi))
            throw SolverError("disjoint capillary ranges across the interface");
        qrange[m] = {lo, hi};
    }
    auto clamp_trace = [&](InterfaceTrace& lam) {
        for (int m = 0; m < dd_->n_mortar(); ++m)
            lam[m] = std::min(qrange[m].second,
                              std::max(qrange[m].first, lam[m]));
    };
    clamp_trace(res.lambda_d);

    auto apply_Z = [&](const InterfaceTrace& lam,
                       std::vector<SubdomainDiffusion::Result>* st) {
        InterfaceTrace out = zero_trace(*dd_);
        if (st) st->resize(dd_->n_subdomains());
        for (int i = 0; i < dd_->n_subdomains(); ++i) {
            SubdomainDiffusion::Result r = subs_[i]->solve_dirichlet(
                s_star[i], tau, restrict_to(i, lam), opt.subdomain);
            res.report.subdomain_newton_iterations += r.newton_iterations;
            ++res.report.subdomain_solves;
            const auto& slots = dd_->subdomain_mortars(i);
            for (size_t q = 0; q < slots.size(); ++q)
                out[slots[q].first] += r.state.mortar_flux[q];
            if (st) (*st)[i] = std::move(r);
        }
        return out;
    };

    InnerProduct dot = [this](const Vec& a, const Vec& b) {
        return trace_dot(*dd_, a, b);
    };

    // frozen left preconditioner: dense interface operator of the problem
    // linearized at s_star, factored once per call
    std::unique_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> Plu;
    if (opt.precondition) {
        const int n = dd_->n_mortar();
        Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
        std::vector<std::function<std::vector<double>(const std::vector<double>&)>>
            lin;
        for (int i = 0; i < dd_->n_subdomains(); ++i)
            lin.push_back(subs_[i]->make_linearized_dtn(
                s_star[i], tau, restrict_to(i, res.lambda_d)));
        for (int c = 0; c < n; ++c) {
            InterfaceTrace e = zero_trace(*dd_);
            e[c] = 1.0;
            for (int i = 0; i < dd_->n_subdomains(); ++i) {
                const std::vector<double> de = lin[i](restrict_to(i, e));
                const auto& slots = dd_->subdomain_mortars(i);
                for (size_t q = 0; q < slots.size(); ++q)
                    P(slots[q].first, c) += de[q];
            }
        }
        Plu = std::make_unique<Eigen::PartialPivLU<Eigen::MatrixXd>>(P);
    }
    LinearOp M = [&](const Vec& v) {
        Eigen::Map<const Eigen::VectorXd> mv(v.data(), v.size());
        Eigen::VectorXd out = Plu->solve(mv);
        return Vec(out.data(), out.data() + out.size());
    };

    InterfaceTrace F = apply_Z(res.lambda_d, &res.states);
    double fnorm = trace_norm(*dd_, F);
    const double f0 = fnorm;
    const double target = std::max(opt.tol_newton * f0, opt.tol_newton_abs);

    while (fnorm > target && fnorm > 0.0) {
        if (res.report.newton_iterations >= opt.max_newton)
            throw SolverError("interface diffusion Newton exceeded " +
                              std::to_string(opt.max_newton) + " iterations");
        const double lam_norm = trace_norm(*dd_, res.lambda_d);
        LinearOp J = [&](const Vec& v) {
            const double vnorm = trace_norm(*dd_, v);
            if (vnorm == 0.0) return Vec(v.size(), 0.0);
            // forward-difference directional derivative of Z
            const double h = std::sqrt(std::numeric_limits<double>::epsilon()) *
                             (1.0 + lam_norm) / vnorm;
            InterfaceTrace lam2 = res.lambda_d;
            for (size_t q = 0; q < lam2.size(); ++q) lam2[q] += h * v[q];
            InterfaceTrace F2 = apply_Z(lam2, nullptr);
            Vec out(v.size());
            for (size_t q = 0; q < out.size(); ++q) out[q] = (F2[q] - F[q]) / h;
            return out;
        };
        Vec rhs(F.size());
        for (size_t q = 0; q < F.size(); ++q) rhs[q] = -F[q];
        GmresOptions gopt;
        gopt.tol = opt.tol_gmres;
        gopt.max_iter = opt.max_gmres;
        gopt.restart = opt.gmres_restart;
        KrylovResult kr = gmres(J, rhs, dot, gopt, Plu ? &M : nullptr);
        res.report.gmres_iterations += kr.iterations;

        auto try_direction = [&](const Vec& dir, int halvings) {
            double step = 1.0;
            for (int h = 0; h <= halvings; ++h) {
                InterfaceTrace lam2 = res.lambda_d;
                for (size_t q = 0; q < lam2.size(); ++q) lam2[q] += step * dir[q];
                clamp_trace(lam2);
                std::vector<SubdomainDiffusion::Result> st2;
                InterfaceTrace F2 = apply_Z(lam2, &st2);
                const double fn2 = trace_norm(*dd_, F2);
                if (fn2 < fnorm || fn2 <= target) {
                    res.lambda_d = std::move(lam2);
                    res.states = std::move(st2);
                    F = std::move(F2);
                    fnorm = fn2;
                    return true;
                }
                step *= 0.5;
            }
            return false;
        };
        bool accepted = try_direction(kr.x, 10);
#ifdef SPLITFLOW_DEBUG_DIFF
        fprintf(stderr, "newton it=%d fnorm=%.6g |dx|=%.6g gmres_res=%.3g\n",
                res.report.newton_iterations, fnorm,
                std::sqrt(trace_dot(*dd_, kr.x, kr.x)), kr.residual);
        for (size_t q = 0; q < F.size(); ++q)
            fprintf(stderr, "  face %zu lam=%.6g F=%.6g dx=%.6g qlo=%.3g qhi=%.3g\n",
                    q, res.lambda_d[q], F[q], kr.x[q], qrange[q].first,
                    qrange[q].second);
#endif
        if (!accepted) {
            // steepest-descent fallback: the flux-jump operator has a
            // positive-definite derivative, so -F descends 1/2 |F|^2
            const double scale =
                trace_norm(*dd_, kr.x) / std::max(trace_norm(*dd_, F), 1e-300);
            Vec dir(F.size());
            for (size_t q = 0; q < F.size(); ++q) dir[q] = -scale * F[q];
            accepted = try_direction(dir, 30);
        }
        ++res.report.newton_iterations;
        if (!accepted)
            throw SolverError("interface diffusion Newton stalled at residual " +
                              std::to_string(fnorm));
    }
    res.report.final_residual = fnorm;
    return res;
}

DiffusionInterface::Result
DiffusionInterface::oswr(const std::vector<CellField>& s_star, double tau,
                         const DiffusionMethodOptions& opt,
                         const std::vector<std::vector<double>>* eta0,
                         std::vector<std::vector<double>>* eta_out) const {
    const int n_sub = dd_->n_subdomains();
    if (static_cast<int>(opt.kappa.size()) != n_sub)
        throw ConfigError("one Robin parameter per subdomain required");

    Result res;
    res.states.resize(n_sub);

    // zero-flux initial Robin data from the lagged saturations
    std::vector<std::vector<double>> eta(n_sub);
    for (int i = 0; i < n_sub; ++i) {
        if (eta0) {
            eta[i] = (*eta0)[i];
            continue;
        }
        const auto& slots = dd_->subdomain_mortars(i);
        const RockType& rock = (*rocks_)[dd_->rock_index(i)];
        eta[i].resize(slots.size());
        for (size_t q = 0; q < slots.size(); ++q) {
            const Face& fc = dd_->mesh(i).faces[slots[q].second];
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            eta[i][q] =
                subs_[i]->robin_sign() * opt.kappa[i] * rock.pc(s_star[i][k]);
        }
    }

    auto eta_norm = [&](const std::vector<std::vector<double>>& e) {
        double s = 0.0;
        for (int i = 0; i < n_sub; ++i) {
            const auto& slots = dd_->subdomain_mortars(i);
            for (size_t q = 0; q < slots.size(); ++q)
                s += dd_->mortar()[slots[q].first].area * e[i][q] * e[i][q];
        }
        return std::sqrt(s);
    };

    for (int k = 0; k < opt.oswr_max_iter; ++k) {
        for (int i = 0; i < n_sub; ++i) {
            res.states[i] = subs_[i]->solve_robin(s_star[i], tau, opt.kappa[i],
                                                  eta[i], opt.subdomain);
            res.report.subdomain_newton_iterations +=
                res.states[i].newton_iterations;
            ++res.report.subdomain_solves;
        }
        std::vector<std::vector<double>> eta_new(n_sub);
        for (int i = 0; i < n_sub; ++i) {
            const auto& slots = dd_->subdomain_mortars(i);
            eta_new[i].resize(slots.size());
            for (size_t q = 0; q < slots.size(); ++q) {
                const int mid = slots[q].first;
                const MortarFace& mf = dd_->mortar()[mid];
                const int j = (mf.sub_neg == i) ? mf.sub_pos : mf.sub_neg;
                const auto& jslots = dd_->subdomain_mortars(j);
                int qj = -1;
                for (size_t t = 0; t < jslots.size(); ++t)
                    if (jslots[t].first == mid) qj = static_cast<int>(t);
                const RockType& rock_j = (*rocks_)[dd_->rock_index(j)];
                eta_new[i][q] = res.states[j].state.mortar_flux[qj] +
                                subs_[i]->robin_sign() * opt.kappa[i] *
                                    rock_j.pc(res.states[j].mortar_theta[qj]);
            }
        }
        double dn = 0.0;
        const double base = eta_norm(eta);
        {
            std::vector<std::vector<double>> diff(n_sub);
            for (int i = 0; i < n_sub; ++i) {
                diff[i].resize(eta[i].size());
                for (size_t q = 0; q < eta[i].size(); ++q)
                    diff[i][q] = eta_new[i][q] - eta[i][q];
            }
            dn = eta_norm(diff);
        }
        eta = std::move(eta_new);
        const double rel = base > 0.0 ? dn / base : dn;
        res.report.oswr_iterations = k + 1;
        res.report.final_residual = rel;
        if (rel < opt.oswr_tol) {
            // capillary trace from the converged face saturations
            res.lambda_d = zero_trace(*dd_);
            for (int m = 0; m < dd_->n_mortar(); ++m) {
                const MortarFace& mf = dd_->mortar()[m];
                const auto& slots = dd_->subdomain_mortars(mf.sub_neg);
                int qn = -1;
                for (size_t t = 0; t < slots.size(); ++t)
                    if (slots[t].first == m) qn = static_cast<int>(t);
                const RockType& rock_n = (*rocks_)[dd_->rock_index(mf.sub_neg)];
                res.lambda_d[m] =
                    rock_n.pc(res.states[mf.sub_neg].mortar_theta[qn]);
            }
            if (eta_out) *eta_out = eta;
            return res;
        }
    }
    throw SolverError("diffusion waveform relaxation did not converge within " +
                      std::to_string(opt.oswr_max_iter) + " sweeps");
}

} // namespace splitflow
