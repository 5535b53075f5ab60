#include "splitflow/interface_pressure.hpp"

#include <cmath>

namespace splitflow {

InterfacePressure::InterfacePressure(const DecomposedDomain& dd,
                                     const std::vector<RockType>& rocks,
                                     const FluidParams& fluid)
    : dd_(&dd), fluid_(&fluid) {
    for (int i = 0; i < dd.n_subdomains(); ++i)
        subs_.push_back(std::make_unique<SubdomainPressure>(
            dd, i, rocks[dd.rock_index(i)], fluid));
}

void InterfacePressure::set_outer_flux(int sub,
                                       std::vector<std::pair<int, double>> outer) {
    subs_[sub]->set_outer_flux(std::move(outer));
}

void InterfacePressure::set_saturation(const std::vector<CellField>& s) {
    for (int i = 0; i < dd_->n_subdomains(); ++i) subs_[i]->set_saturation(s[i]);
}

std::vector<double> InterfacePressure::restrict_to(int sub,
                                                   const InterfaceTrace& v) const {
    const auto& slots = dd_->subdomain_mortars(sub);
    std::vector<double> out(slots.size());
    for (size_t q = 0; q < slots.size(); ++q) out[q] = v[slots[q].first];
    return out;
}

InterfaceTrace InterfacePressure::sp_apply(const InterfaceTrace& lambda) const {
    InterfaceTrace out = zero_trace(*dd_);
    for (int i = 0; i < dd_->n_subdomains(); ++i) {
        DarcyState st = subs_[i]->solve_dirichlet(restrict_to(i, lambda),
                                                  /*with_beta=*/false,
                                                  /*gravity=*/false,
                                                  /*outer_data=*/false);
        ++solves_;
        const auto& slots = dd_->subdomain_mortars(i);
        for (size_t q = 0; q < slots.size(); ++q)
            out[slots[q].first] -= st.mortar_flux[q];
    }
    return out;
}

InterfaceTrace InterfacePressure::sp_rhs(bool gravity) const {
    InterfaceTrace out = zero_trace(*dd_);
    for (int i = 0; i < dd_->n_subdomains(); ++i) {
        const std::vector<double> zero(dd_->subdomain_mortars(i).size(), 0.0);
        DarcyState st = subs_[i]->solve_dirichlet(zero, /*with_beta=*/true, gravity,
                                                  /*outer_data=*/true);
        ++solves_;
        const auto& slots = dd_->subdomain_mortars(i);
        for (size_t q = 0; q < slots.size(); ++q)
            out[slots[q].first] += st.mortar_flux[q];
    }
    return out;
}

InterfaceTrace InterfacePressure::nn_apply(const InterfaceTrace& r,
                                           const std::vector<double>& weights) const {
    // sign convention: the flux-jump operator maps lambda to -u(lambda).n, so
    // composing with the Neumann-to-Dirichlet traces needs a minus to make
    // the preconditioner positive definite
    InterfaceTrace out = zero_trace(*dd_);
    for (int i = 0; i < dd_->n_subdomains(); ++i) {
        const std::vector<double> tr =
            subs_[i]->solve_neumann_trace(restrict_to(i, r));
        ++solves_;
        const auto& slots = dd_->subdomain_mortars(i);
        for (size_t q = 0; q < slots.size(); ++q)
            out[slots[q].first] -= weights[i] * tr[q];
    }
    return out;
}

std::pair<InterfaceTrace, PressureSolveReport>
InterfacePressure::cg_solve(const PressureMethodOptions& opt, bool gravity,
                            const InterfaceTrace* warm_start) const {
    const int solves_before = solves_;
    InterfaceTrace g = sp_rhs(gravity);

    std::vector<double> weights = opt.nn_weights;
    if (weights.empty())
        weights.assign(dd_->n_subdomains(), 0.5);

    LinearOp A = [this](const Vec& v) { return sp_apply(v); };
    InnerProduct dot = [this](const Vec& a, const Vec& b) {
        return trace_dot(*dd_, a, b);
    };
    LinearOp M = [this, &weights](const Vec& v) { return nn_apply(v, weights); };

    CgOptions copt;
    copt.tol = opt.tol;
    copt.max_iter = opt.max_iter;
    copt.deflate_constants = true;
    KrylovResult kr = pcg(A, g, dot, copt, opt.neumann_neumann ? &M : nullptr,
                          warm_start);
    if (!kr.converged)
        throw SolverError("interface pressure CG did not converge; residual " +
                          std::to_string(kr.residual));

    PressureSolveReport rep;
    rep.method = opt.neumann_neumann ? "cg-nn" : "cg";
    rep.iterations = kr.iterations;
    rep.subdomain_solves = solves_ - solves_before;
    rep.final_residual = kr.residual;
    rep.residual_history = kr.history;
    return {std::move(kr.x), std::move(rep)};
}

std::pair<std::vector<DarcyState>, PressureSolveReport>
InterfacePressure::oswr_solve(const PressureMethodOptions& opt, bool gravity,
                              const std::vector<std::vector<double>>* eta0,
                              std::vector<std::vector<double>>* eta_out) const {
    const int n_sub = dd_->n_subdomains();
    const int solves_before = solves_;
    if (static_cast<int>(opt.robin_gamma.size()) != n_sub)
        throw ConfigError("one Robin parameter per subdomain required");

    std::vector<std::vector<double>> eta(n_sub);
    for (int i = 0; i < n_sub; ++i)
        eta[i] = eta0 ? (*eta0)[i]
                      : std::vector<double>(dd_->subdomain_mortars(i).size(), 0.0);

    std::vector<DarcyState> states(n_sub);
    PressureSolveReport rep;
    rep.method = "oswr";

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
            states[i] = subs_[i]->solve_robin(opt.robin_gamma[i], eta[i], gravity,
                                              /*outer_data=*/true);
            ++solves_;
        }
        // eta_i <- u_j.n_j + gamma_i (p_j - beta_j) from the fresh states
        std::vector<std::vector<double>> eta_new(n_sub);
        for (int i = 0; i < n_sub; ++i) {
            const auto& slots = dd_->subdomain_mortars(i);
            eta_new[i].resize(slots.size());
            for (size_t q = 0; q < slots.size(); ++q) {
                const int mid = slots[q].first;
                const MortarFace& mf = dd_->mortar()[mid];
                const int j = (mf.sub_neg == i) ? mf.sub_pos : mf.sub_neg;
                // locate the slot on the other side
                const auto& jslots = dd_->subdomain_mortars(j);
                int qj = -1;
                for (size_t t = 0; t < jslots.size(); ++t)
                    if (jslots[t].first == mid) qj = static_cast<int>(t);
                eta_new[i][q] = states[j].mortar_flux[qj] +
                                opt.robin_gamma[i] * states[j].mortar_trace[qj];
            }
        }
        rep.iterations = k + 1;
        double dn = 0.0, base = eta_norm(eta);
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
        rep.residual_history.push_back(rel);
        rep.final_residual = rel;
        if (rel < opt.tol) {
            rep.subdomain_solves = solves_ - solves_before;
            if (eta_out) *eta_out = eta;
            return {std::move(states), std::move(rep)};
        }
    }
    throw SolverError("pressure waveform relaxation did not converge within " +
                      std::to_string(opt.oswr_max_iter) + " sweeps");
}

std::vector<DarcyState>
InterfacePressure::reconstruct(const InterfaceTrace& lambda, bool gravity) const {
    std::vector<DarcyState> states(dd_->n_subdomains());
    for (int i = 0; i < dd_->n_subdomains(); ++i) {
        states[i] = subs_[i]->solve_dirichlet(restrict_to(i, lambda),
                                              /*with_beta=*/true, gravity,
                                              /*outer_data=*/true);
        ++solves_;
    }
    // pin the global constant: zero volume-weighted mean over the whole domain
    double vol = 0.0, mean = 0.0;
    for (int i = 0; i < dd_->n_subdomains(); ++i) {
        const StructuredMesh& m = dd_->mesh(i);
        for (int k = 0; k < m.n_cells; ++k) mean += m.cell_volume * states[i].pressure[k];
        vol += m.volume();
    }
    mean /= vol;
    for (int i = 0; i < dd_->n_subdomains(); ++i) {
        for (auto& p : states[i].pressure) p -= mean;
        for (auto& t : states[i].mortar_trace) t -= mean;
    }
    return states;
}

} // namespace splitflow
