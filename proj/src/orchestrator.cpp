#include "splitflow/orchestrator.hpp"

#include <algorithm>
#include <cmath>

namespace splitflow {

Simulation::Simulation(const SimulationConfig& cfg) : cfg_(cfg) {
    if (cfg.rocks.empty()) throw ConfigError("no rocks configured");
    for (int r : cfg.domain.rock_of_slab)
        if (r < 0 || r >= static_cast<int>(cfg.rocks.size()))
            throw ConfigError("slab references an undefined rock");
    domain_ = std::make_shared<DecomposedDomain>(DecomposedDomain::build(cfg.domain));
    rocks_ = std::make_shared<std::vector<RockType>>();
    for (const RockConfig& rc : cfg.rocks)
        rocks_->emplace_back(rc.porosity, rc.permeability,
                             VanGenuchtenParams::make(rc.vg_n, rc.vg_alpha,
                                                      rc.orientation),
                             rc.entry_pressure, rc.table_resolution, rc.eps_s);
    const int n_sub = domain_->n_subdomains();
    if (static_cast<int>(cfg.substeps.size()) != n_sub)
        throw ConfigError("need one advection substep count per subdomain");
    for (int c : cfg.substeps)
        if (c < 1) throw ConfigError("substep counts must be positive");
    if (cfg.n_windows < 1 || !(cfg.total_time > 0.0))
        throw ConfigError("time grid must be nonempty");
    if (!cfg.nn_weights.empty()) {
        if (static_cast<int>(cfg.nn_weights.size()) != n_sub)
            throw ConfigError("need one weight per subdomain");
        if (n_sub == 2 &&
            std::abs(cfg.nn_weights[0] + cfg.nn_weights[1] - 1.0) > 1e-12)
            throw ConfigError("preconditioner weights must sum to one");
    }
    for (double t : cfg.snapshot_times)
        if (t < 0.0 || t > cfg.total_time * (1 + 1e-12))
            throw ConfigError("snapshot time outside the simulated interval");
    if (cfg.inflow_flux < 0.0) throw ConfigError("inflow flux must be >= 0");
    if (cfg.fracture && domain_->n_subdomains() != 2)
        throw ConfigError("the reduced fracture model couples exactly two subdomains");
}

std::vector<CellField> Simulation::initial_saturation() const {
    const DecomposedDomain& dd = *domain_;
    const InitialSpec& in = cfg_.initial;
    if (static_cast<int>(in.value.size()) != dd.n_subdomains())
        throw ConfigError("need one initial saturation entry per subdomain");
    const int ref = in.match_reference;
    std::vector<CellField> s(dd.n_subdomains());
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        double v = in.value[i];
        if (std::isnan(v)) {
            // capillary-pressure continuity with the reference slab
            const double q =
                (*rocks_)[dd.rock_index(ref)].pc(in.value[ref]);
            v = (*rocks_)[dd.rock_index(i)].pc_inverse(q);
        }
        s[i].assign(dd.mesh(i).n_cells, v);
        if (in.step_subdomain == i) {
            for (int k = 0; k < dd.mesh(i).n_cells; ++k)
                if (dd.mesh(i).cell_center(k)[in.step_axis] < in.step_pos)
                    s[i][k] = in.step_left;
        }
    }
    return s;
}

std::vector<std::pair<int, double>> Simulation::outer_flux_table(int sub) const {
    // compatibility: injected volume leaves uniformly through the outflow
    double a_in = 0.0, a_out = 0.0;
    for (int i = 0; i < domain_->n_subdomains(); ++i)
        for (const Face& fc : domain_->mesh(i).faces) {
            if (fc.kind != FaceKind::Boundary) continue;
            if (fc.tag == BoundaryTag::Inflow) a_in += fc.area;
            if (fc.tag == BoundaryTag::Outflow) a_out += fc.area;
        }
    std::vector<std::pair<int, double>> out;
    if (cfg_.inflow_flux <= 0.0 || a_in == 0.0) return out;
    if (a_out == 0.0)
        throw ConfigError("injection requires an outflow boundary");
    const StructuredMesh& m = domain_->mesh(sub);
    for (size_t f = 0; f < m.faces.size(); ++f) {
        const Face& fc = m.faces[f];
        if (fc.kind != FaceKind::Boundary) continue;
        if (fc.tag == BoundaryTag::Inflow)
            out.push_back({static_cast<int>(f), -cfg_.inflow_flux});
        else if (fc.tag == BoundaryTag::Outflow)
            out.push_back({static_cast<int>(f), cfg_.inflow_flux * a_in / a_out});
    }
    return out;
}

std::map<int, double> Simulation::boundary_ghost_table(
    int sub, const CellField& s_begin) const {
    // inflow carries the injected saturation; outflow copies the adjacent
    // cell value frozen at the window start
    std::map<int, double> ghost;
    const StructuredMesh& m = domain_->mesh(sub);
    for (size_t f = 0; f < m.faces.size(); ++f) {
        const Face& fc = m.faces[f];
        if (fc.kind != FaceKind::Boundary) continue;
        if (fc.tag == BoundaryTag::Inflow)
            ghost[static_cast<int>(f)] = cfg_.inflow_saturation;
        else if (fc.tag == BoundaryTag::Outflow) {
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            ghost[static_cast<int>(f)] = s_begin[k];
        }
    }
    return ghost;
}

std::vector<double> Simulation::auto_gamma(const std::vector<CellField>& s) const {
    if (!cfg_.robin_gamma.empty()) return cfg_.robin_gamma;
    const DecomposedDomain& dd = *domain_;
    std::vector<double> g(dd.n_subdomains(), 1.0);
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const RockType& rock = (*rocks_)[dd.rock_index(i)];
        const auto& slots = dd.subdomain_mortars(i);
        if (slots.empty()) continue;
        double acc = 0.0;
        for (const auto& [mid, lf] : slots) {
            const Face& fc = dd.mesh(i).faces[lf];
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            acc += std::sqrt(rock.coefficients(cfg_.fluid, s[i][k]).M);
        }
        g[i] = acc / slots.size();
    }
    return g;
}

std::vector<double> Simulation::auto_kappa(
    const std::vector<CellField>& s,
    const std::vector<SubdomainAdvection>* adv) const {
    if (!cfg_.kappa.empty()) return cfg_.kappa;
    // each side's Robin parameter matches the neighbor's interface impedance
    // (theta-derivative of the transmitted flux over the capillary slope),
    // evaluated at the current interface saturations so the degenerate
    // low-mobility regime gets correspondingly small parameters
    const DecomposedDomain& dd = *domain_;
    std::vector<double> impedance(dd.n_subdomains(), 0.0);
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const RockType& rock = (*rocks_)[dd.rock_index(i)];
        const auto& slots = dd.subdomain_mortars(i);
        if (slots.empty()) continue;
        double acc = 0.0;
        for (auto [mid, lf] : slots) {
            const Face& fc = dd.mesh(i).faces[lf];
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            const double d = fc.cell_neg >= 0 ? fc.d_neg : fc.d_pos;
            const double th = std::min(0.99, std::max(0.01, s[i][k]));
            double lip = 0.0;
            if (adv) {
                const double h = 0.01;
                lip = std::abs(godunov_flux((*adv)[i].face[lf], s[i][k], th + h) -
                               godunov_flux((*adv)[i].face[lf], s[i][k], th - h)) /
                      (2.0 * h);
            }
            const double ap = std::max(rock.alpha_prime(th),
                                       1e-4 * rock.alpha_prime_max());
            acc += (lip + rock.permeability() * ap / d) /
                   std::max(std::abs(rock.pc_derivative(th)), 1e-30);
        }
        impedance[i] = acc / slots.size();
    }
    std::vector<double> kap(dd.n_subdomains(), 1.0);
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        double acc = 0.0;
        int cnt = 0;
        for (auto [mid, lf] : dd.subdomain_mortars(i)) {
            const MortarFace& mf = dd.mortar()[mid];
            const int j = (mf.sub_neg == i) ? mf.sub_pos : mf.sub_neg;
            acc += impedance[j];
            ++cnt;
        }
        if (cnt > 0) kap[i] = std::max(1e-30, acc / cnt);
    }
    return kap;
}

std::pair<double, double> Simulation::auto_kappa_advection(
    const std::vector<SubdomainAdvection>& adv) const {
    if (cfg_.kappa_advection.size() >= 2)
        return {cfg_.kappa_advection[0], cfg_.kappa_advection[1]};
    // flux-Lipschitz over capillary scale, averaged over interface faces
    const DecomposedDomain& dd = *domain_;
    double kap[2] = {1.0, 1.0};
    for (int side = 0; side < 2; ++side) {
        double acc = 0.0;
        int cnt = 0;
        for (int m = 0; m < dd.n_mortar(); ++m) {
            const MortarFace& mf = dd.mortar()[m];
            const int i = side == 0 ? mf.sub_neg : mf.sub_pos;
            const int lf = side == 0 ? mf.face_neg : mf.face_pos;
            const RockType& rock = (*rocks_)[dd.rock_index(i)];
            double lip = 0.0, prev = adv[i].face[lf](0.0);
            for (int q = 1; q <= 64; ++q) {
                const double v = adv[i].face[lf](q / 64.0);
                lip = std::max(lip, std::abs(v - prev) * 64.0);
                prev = v;
            }
            const double pc_scale =
                std::abs(rock.pc(0.25) - rock.pc(0.75)) + 1e-30;
            acc += lip / pc_scale;
            ++cnt;
        }
        if (cnt > 0) kap[side] = std::max(1e-12, acc / cnt);
    }
    return {kap[0], kap[1]};
}

double Simulation::total_mass(const std::vector<CellField>& s) const {
    double m = 0.0;
    for (int i = 0; i < domain_->n_subdomains(); ++i) {
        const double phiV = (*rocks_)[domain_->rock_index(i)].porosity() *
                            domain_->mesh(i).cell_volume;
        for (double v : s[i]) m += phiV * v;
    }
    return m;
}

void Simulation::record_mass(WindowRecord& rec, const std::vector<CellField>& s,
                             bool begin) const {
    (begin ? rec.mass_begin : rec.mass_end) = total_mass(s);
}

namespace {

struct SnapshotSink {
    const SimulationConfig* cfg;
    SimulationOutput* out;
    void maybe_store(double t, const std::vector<CellField>& s,
                     const std::vector<DarcyState>* darcy) {
        for (double want : cfg->snapshot_times) {
            if (std::abs(want - t) >
                1e-9 * std::max(1.0, cfg->total_time))
                continue;
            out->snapshot_times.push_back(t);
            out->snapshot_s.push_back(s);
            if (darcy) {
                std::vector<CellField> p;
                std::vector<FaceFluxField> u;
                for (const DarcyState& st : *darcy) {
                    p.push_back(st.pressure);
                    u.push_back(st.flux);
                }
                out->snapshot_p.push_back(std::move(p));
                out->snapshot_u.push_back(std::move(u));
            } else {
                out->snapshot_p.push_back({});
                out->snapshot_u.push_back({});
            }
            return;
        }
    }
};

double flux_jump_max(const DecomposedDomain& dd,
                     const std::vector<DarcyState>& states) {
    double worst = 0.0;
    for (int m = 0; m < dd.n_mortar(); ++m) {
        const MortarFace& mf = dd.mortar()[m];
        int qn = -1, qp = -1;
        const auto& sn = dd.subdomain_mortars(mf.sub_neg);
        const auto& sp = dd.subdomain_mortars(mf.sub_pos);
        for (size_t t = 0; t < sn.size(); ++t)
            if (sn[t].first == m) qn = static_cast<int>(t);
        for (size_t t = 0; t < sp.size(); ++t)
            if (sp[t].first == m) qp = static_cast<int>(t);
        worst = std::max(worst, std::abs(states[mf.sub_neg].mortar_flux[qn] +
                                         states[mf.sub_pos].mortar_flux[qp]));
    }
    return worst;
}

} // namespace

SimulationOutput Simulation::run() const {
    if (cfg_.fracture) return run_fracture_model(*this);
    return cfg_.scheme == SchemeKind::Scheme1 ? run_scheme1() : run_scheme2();
}

SimulationOutput Simulation::run_scheme1() const {
    const DecomposedDomain& dd = *domain_;
    const int n_sub = dd.n_subdomains();
    SimulationOutput out;
    out.domain = domain_;
    out.rocks = rocks_;

    InterfacePressure pressure(dd, *rocks_, cfg_.fluid);
    DiffusionInterface diffusion(dd, *rocks_);
    for (int i = 0; i < n_sub; ++i) pressure.set_outer_flux(i, outer_flux_table(i));

    std::vector<CellField> s = initial_saturation();
    out.coarse_times.push_back(0.0);
    out.s_at_coarse.push_back(s);
    SnapshotSink sink{&cfg_, &out};
    sink.maybe_store(0.0, s, nullptr);

    TimeGrids grids = TimeGrids::uniform(cfg_.total_time, cfg_.n_windows,
                                         cfg_.substeps);
    InterfaceTrace lambda_warm;
    InterfaceTrace lambda_d_warm;
    bool have_lambda_d = false;
    std::vector<std::vector<double>> eta_pressure, eta_diffusion;
    bool have_eta_p = false, have_eta_d = false;

    for (int n = 0; n < cfg_.n_windows; ++n) {
        WindowRecord rec;
        rec.index = n;
        rec.t_begin = grids.coarse[n];
        rec.t_end = grids.coarse[n + 1];
        record_mass(rec, s, true);
        const double tau = grids.window_step(n);

        // (a) pressure at the window start with the lagged saturation
        rec.call_order.push_back("pressure");
        pressure.set_saturation(s);
        std::vector<DarcyState> darcy;
        {
            PressureMethodOptions popt;
            popt.tol = cfg_.pressure_method == PressureMethod::Oswr ? cfg_.tol.oswr
                                                                    : cfg_.tol.cg;
            popt.max_iter = cfg_.tol.max_cg;
            popt.oswr_max_iter = cfg_.tol.max_oswr;
            popt.neumann_neumann = cfg_.pressure_method == PressureMethod::CgNN;
            popt.nn_weights = cfg_.nn_weights;
            if (cfg_.pressure_method == PressureMethod::Oswr) {
                popt.robin_gamma = auto_gamma(s);
                auto [st, rep] = pressure.oswr_solve(
                    popt, cfg_.gravity, have_eta_p ? &eta_pressure : nullptr,
                    &eta_pressure);
                have_eta_p = true;
                darcy = std::move(st);
                rec.pressure = std::move(rep);
            } else {
                auto [lam, rep] = pressure.cg_solve(
                    popt, cfg_.gravity,
                    lambda_warm.empty() ? nullptr : &lambda_warm);
                lambda_warm = lam;
                darcy = pressure.reconstruct(lam, cfg_.gravity);
                rec.pressure = std::move(rep);
            }
            rec.max_flux_jump = flux_jump_max(dd, darcy);
            rec.rhs_norm = trace_norm(dd, pressure.sp_rhs(cfg_.gravity));
        }

        // (b) advection on the fine grids with frozen total flux
        rec.call_order.push_back("advection");
        std::vector<SubdomainAdvection> adv;
        std::vector<std::map<int, double>> ghost(n_sub);
        std::vector<FinePartition> fine = grids.fine[n];
        for (int i = 0; i < n_sub; ++i) {
            adv.push_back(build_advection(dd, i, (*rocks_)[dd.rock_index(i)],
                                          cfg_.fluid, darcy[i].flux));
            ghost[i] = boundary_ghost_table(i, s[i]);
        }
        AdvectWindowOptions aopt;
        aopt.mode = cfg_.advection_mode;
        auto [kan, kap] = auto_kappa_advection(adv);
        aopt.kappa_neg = kan;
        aopt.kappa_pos = kap;
        aopt.trace.rtol = cfg_.tol.advection_trace;
        aopt.trace.atol = cfg_.tol.advection_trace_abs;
        aopt.outer_tol = cfg_.tol.advection_outer;
        aopt.max_outer = cfg_.tol.max_advection_outer;
        aopt.cfl_safety = cfg_.cfl_safety;
        AdvectionWindowResult aw =
            advect_window(dd, *rocks_, cfg_.fluid, adv, s, ghost, fine, aopt);
        rec.advection_outer = aw.outer_sweeps;
        rec.advection_trace_newton = aw.trace_newton_iterations;
        rec.capillary_mismatch_advection = aw.max_capillary_mismatch;

        // (c) implicit capillary diffusion over the coarse step
        rec.call_order.push_back("diffusion");
        for (int i = 0; i < n_sub; ++i) {
            std::vector<std::pair<int, double>> g(ghost[i].begin(), ghost[i].end());
            diffusion.set_outer_saturation(i, std::move(g));
        }
        DiffusionMethodOptions dopt;
        dopt.tol_newton = cfg_.tol.newton_interface;
        dopt.tol_newton_abs = cfg_.tol.newton_interface_abs;
        dopt.max_newton = cfg_.tol.max_newton;
        dopt.tol_gmres = cfg_.tol.gmres_interface;
        dopt.max_gmres = cfg_.tol.max_gmres;
        dopt.gmres_restart = cfg_.tol.gmres_restart;
        dopt.precondition =
            cfg_.diffusion_method == DiffusionMethod::NewtonGmresPrecond;
        dopt.subdomain.rtol = cfg_.tol.newton_subdomain;
        dopt.subdomain.atol = cfg_.tol.newton_subdomain_abs;
        dopt.oswr_tol = cfg_.tol.oswr;
        dopt.oswr_max_iter = cfg_.tol.max_oswr;
        dopt.kappa = auto_kappa(aw.s_end, nullptr);

        DiffusionInterface::Result dres;
        if (cfg_.diffusion_method == DiffusionMethod::Oswr) {
            dres = diffusion.oswr(aw.s_end, tau, dopt,
                                  have_eta_d ? &eta_diffusion : nullptr,
                                  &eta_diffusion);
            have_eta_d = true;
        } else {
            InterfaceTrace guess;
            if (have_lambda_d) {
                guess = lambda_d_warm;
            } else {
                // first window: capillary trace of the advected state on the
                // upwind side of each interface face
                guess = zero_trace(dd);
                for (int m = 0; m < dd.n_mortar(); ++m) {
                    const MortarFace& mf = dd.mortar()[m];
                    int qn = -1;
                    const auto& sn = dd.subdomain_mortars(mf.sub_neg);
                    for (size_t t = 0; t < sn.size(); ++t)
                        if (sn[t].first == m) qn = static_cast<int>(t);
                    const bool neg_upwind =
                        darcy[mf.sub_neg].mortar_flux[qn] >= 0.0;
                    const int i = neg_upwind ? mf.sub_neg : mf.sub_pos;
                    const Face& fc =
                        dd.mesh(i).faces[neg_upwind ? mf.face_neg : mf.face_pos];
                    const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
                    guess[m] = (*rocks_)[dd.rock_index(i)].pc(aw.s_end[i][k]);
                }
            }
            dres = diffusion.newton_gmres(aw.s_end, tau, dopt, &guess);
            lambda_d_warm = dres.lambda_d;
            have_lambda_d = true;
        }
        rec.diffusion = dres.report;
        for (int i = 0; i < n_sub; ++i) s[i] = dres.states[i].s_new;

        // trace continuity of the diffusion step across each interface face
        for (int m = 0; m < dd.n_mortar(); ++m) {
            const MortarFace& mf = dd.mortar()[m];
            int qn = -1, qp = -1;
            const auto& snn = dd.subdomain_mortars(mf.sub_neg);
            const auto& spp = dd.subdomain_mortars(mf.sub_pos);
            for (size_t t = 0; t < snn.size(); ++t)
                if (snn[t].first == m) qn = static_cast<int>(t);
            for (size_t t = 0; t < spp.size(); ++t)
                if (spp[t].first == m) qp = static_cast<int>(t);
            const double pn = (*rocks_)[dd.rock_index(mf.sub_neg)].pc(
                dres.states[mf.sub_neg].mortar_theta[qn]);
            const double pp = (*rocks_)[dd.rock_index(mf.sub_pos)].pc(
                dres.states[mf.sub_pos].mortar_theta[qp]);
            rec.capillary_mismatch_diffusion =
                std::max(rec.capillary_mismatch_diffusion, std::abs(pn - pp));
        }

        // ledger: mass change against the net boundary influx
        record_mass(rec, s, false);
        double boundary_out = 0.0;
        for (int i = 0; i < n_sub; ++i) {
            boundary_out += aw.boundary_mass_out[i];
            for (const auto& [f, gval] : ghost[i]) {
                const Face& fc = dd.mesh(i).faces[f];
                const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
                boundary_out += tau * fc.area * dres.states[i].state.flux[f] *
                                fc.sign_for(k);
            }
        }
        rec.boundary_net_influx = -boundary_out;
        rec.ledger_error =
            std::abs(rec.mass_end - rec.mass_begin - rec.boundary_net_influx);
        out.windows.push_back(std::move(rec));
        out.coarse_times.push_back(grids.coarse[n + 1]);
        out.s_at_coarse.push_back(s);
        sink.maybe_store(grids.coarse[n + 1], s, &darcy);
    }
    return out;
}

SimulationOutput Simulation::run_scheme2() const {
    const DecomposedDomain& dd = *domain_;
    const int n_sub = dd.n_subdomains();
    SimulationOutput out;
    out.domain = domain_;
    out.rocks = rocks_;

    InterfacePressure pressure(dd, *rocks_, cfg_.fluid);
    for (int i = 0; i < n_sub; ++i) pressure.set_outer_flux(i, outer_flux_table(i));

    std::vector<CellField> s = initial_saturation();
    out.coarse_times.push_back(0.0);
    out.s_at_coarse.push_back(s);
    SnapshotSink sink{&cfg_, &out};
    sink.maybe_store(0.0, s, nullptr);

    TimeGrids grids = TimeGrids::uniform(cfg_.total_time, cfg_.n_windows,
                                         cfg_.substeps);
    InterfaceTrace lambda_warm;
    std::vector<std::vector<double>> eta_pressure;
    bool have_eta_p = false;

    for (int n = 0; n < cfg_.n_windows; ++n) {
        WindowRecord rec;
        rec.index = n;
        rec.t_begin = grids.coarse[n];
        rec.t_end = grids.coarse[n + 1];
        record_mass(rec, s, true);
        const double tau = grids.window_step(n);
        (void)tau;

        rec.call_order.push_back("pressure");
        pressure.set_saturation(s);
        std::vector<DarcyState> darcy;
        {
            PressureMethodOptions popt;
            popt.tol = cfg_.pressure_method == PressureMethod::Oswr ? cfg_.tol.oswr
                                                                    : cfg_.tol.cg;
            popt.max_iter = cfg_.tol.max_cg;
            popt.oswr_max_iter = cfg_.tol.max_oswr;
            popt.neumann_neumann = cfg_.pressure_method == PressureMethod::CgNN;
            popt.nn_weights = cfg_.nn_weights;
            if (cfg_.pressure_method == PressureMethod::Oswr) {
                popt.robin_gamma = auto_gamma(s);
                auto [st, rep] = pressure.oswr_solve(
                    popt, cfg_.gravity, have_eta_p ? &eta_pressure : nullptr,
                    &eta_pressure);
                have_eta_p = true;
                darcy = std::move(st);
                rec.pressure = std::move(rep);
            } else {
                auto [lam, rep] = pressure.cg_solve(
                    popt, cfg_.gravity,
                    lambda_warm.empty() ? nullptr : &lambda_warm);
                lambda_warm = lam;
                darcy = pressure.reconstruct(lam, cfg_.gravity);
                rec.pressure = std::move(rep);
            }
            rec.max_flux_jump = flux_jump_max(dd, darcy);
            rec.rhs_norm = trace_norm(dd, pressure.sp_rhs(cfg_.gravity));
        }

        rec.call_order.push_back("saturation");
        std::vector<SubdomainAdvection> adv;
        std::vector<std::map<int, double>> ghost(n_sub);
        for (int i = 0; i < n_sub; ++i) {
            adv.push_back(build_advection(dd, i, (*rocks_)[dd.rock_index(i)],
                                          cfg_.fluid, darcy[i].flux));
            ghost[i] = boundary_ghost_table(i, s[i]);
        }
        Scheme2Options sopt;
        auto kap = auto_kappa(s, &adv);
        sopt.kappa_neg = kap.front();
        sopt.kappa_pos = kap.back();
        sopt.tol = cfg_.tol.scheme2;
        sopt.max_sweeps = cfg_.tol.max_scheme2_sweeps;
        sopt.cfl_safety = cfg_.cfl_safety;
        Scheme2WindowResult sw = oswr_saturation_window(
            dd, *rocks_, cfg_.fluid, adv, s, ghost, grids.fine[n], sopt);
        rec.scheme2_sweeps = sw.sweeps;
        rec.capillary_mismatch_advection = sw.max_capillary_mismatch;
        s = sw.s_end;

        record_mass(rec, s, false);
        double boundary_out = 0.0;
        for (int i = 0; i < n_sub; ++i) boundary_out += sw.boundary_mass_out[i];
        rec.boundary_net_influx = -boundary_out;
        rec.ledger_error =
            std::abs(rec.mass_end - rec.mass_begin - rec.boundary_net_influx);
        out.windows.push_back(std::move(rec));
        out.coarse_times.push_back(grids.coarse[n + 1]);
        out.s_at_coarse.push_back(s);
        sink.maybe_store(grids.coarse[n + 1], s, &darcy);
    }
    return out;
}

SimulationOutput Simulation::monolithic_reference() const {
    const DecomposedDomain& dd = *domain_;
    const int n_sub = dd.n_subdomains();
    Monolithic mono(dd, *rocks_, cfg_.fluid);
    if (mono.max_cells() > 4096)
        throw ConfigError("monolithic reference limited to desk-scale instances");
    for (int i = 0; i < n_sub; ++i) mono.set_outer_flux(i, outer_flux_table(i));

    SimulationOutput out;
    out.domain = domain_;
    out.rocks = rocks_;
    std::vector<CellField> s = initial_saturation();
    out.coarse_times.push_back(0.0);
    out.s_at_coarse.push_back(s);
    SnapshotSink sink{&cfg_, &out};
    sink.maybe_store(0.0, s, nullptr);

    // single-rate stepping: every subdomain uses the finest configured grid
    const int substeps =
        *std::max_element(cfg_.substeps.begin(), cfg_.substeps.end());
    TimeGrids grids = TimeGrids::uniform(cfg_.total_time, cfg_.n_windows,
                                         std::vector<int>(n_sub, substeps));

    for (int n = 0; n < cfg_.n_windows; ++n) {
        WindowRecord rec;
        rec.index = n;
        rec.t_begin = grids.coarse[n];
        rec.t_end = grids.coarse[n + 1];
        record_mass(rec, s, true);
        const double tau = grids.window_step(n);

        rec.call_order.push_back("pressure");
        Monolithic::PressureSolution ps = mono.solve_pressure(s, cfg_.gravity);
        rec.max_flux_jump = flux_jump_max(dd, ps.states);

        rec.call_order.push_back("advection");
        std::vector<SubdomainAdvection> adv;
        std::vector<std::map<int, double>> ghost(n_sub);
        for (int i = 0; i < n_sub; ++i) {
            adv.push_back(build_advection(dd, i, (*rocks_)[dd.rock_index(i)],
                                          cfg_.fluid, ps.states[i].flux));
            ghost[i] = boundary_ghost_table(i, s[i]);
        }
        AdvectWindowOptions aopt;
        aopt.mode = AdvectionMode::Conforming;
        aopt.cfl_safety = cfg_.cfl_safety;
        AdvectionWindowResult aw = advect_window(dd, *rocks_, cfg_.fluid, adv, s,
                                                 ghost, grids.fine[n], aopt);
        rec.capillary_mismatch_advection = aw.max_capillary_mismatch;

        rec.call_order.push_back("diffusion");
        for (int i = 0; i < n_sub; ++i) {
            std::vector<std::pair<int, double>> g(ghost[i].begin(), ghost[i].end());
            mono.set_outer_saturation(i, std::move(g));
        }
        NewtonOptions nopt;
        nopt.rtol = cfg_.tol.newton_subdomain;
        nopt.atol = cfg_.tol.newton_subdomain_abs;
        Monolithic::DiffusionSolution dsol =
            mono.solve_diffusion(aw.s_end, tau, nopt);
        s = dsol.s_new;

        record_mass(rec, s, false);
        double boundary_out = 0.0;
        for (int i = 0; i < n_sub; ++i) {
            boundary_out += aw.boundary_mass_out[i];
            for (const auto& [f, gval] : ghost[i]) {
                const Face& fc = dd.mesh(i).faces[f];
                const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
                boundary_out += tau * fc.area * dsol.states[i].flux[f] *
                                fc.sign_for(k);
            }
        }
        rec.boundary_net_influx = -boundary_out;
        rec.ledger_error =
            std::abs(rec.mass_end - rec.mass_begin - rec.boundary_net_influx);
        out.windows.push_back(std::move(rec));
        out.coarse_times.push_back(grids.coarse[n + 1]);
        out.s_at_coarse.push_back(s);
        sink.maybe_store(grids.coarse[n + 1], s, &ps.states);
    }
    return out;
}

namespace {

double norm_sq_between(const SimulationOutput& a, const SimulationOutput& b,
                       int na, int nb) {
    double acc = 0.0;
    const DecomposedDomain& dd = *a.domain;
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const StructuredMesh& m = dd.mesh(i);
        for (int k = 0; k < m.n_cells; ++k) {
            const double d = a.s_at_coarse[na][i][k] - b.s_at_coarse[nb][i][k];
            acc += m.cell_volume * d * d;
        }
    }
    return acc;
}

} // namespace

double error_norm(const SimulationOutput& a, const SimulationOutput& b) {
    if (a.domain->n_subdomains() != b.domain->n_subdomains())
        throw ConfigError("error norm requires matching decompositions");
    for (int i = 0; i < a.domain->n_subdomains(); ++i)
        if (a.domain->mesh(i).n_cells != b.domain->mesh(i).n_cells)
            throw ConfigError("error norm requires matching meshes");
    const double T = a.coarse_times.back();
    double acc = 0.0;
    for (size_t n = 1; n < a.coarse_times.size(); ++n) {
        const double t = a.coarse_times[n];
        const double tau = t - a.coarse_times[n - 1];
        int nb = -1;
        for (size_t m = 0; m < b.coarse_times.size(); ++m)
            if (std::abs(b.coarse_times[m] - t) <= 1e-9 * std::max(1.0, T)) {
                nb = static_cast<int>(m);
                break;
            }
        if (nb < 0)
            throw ConfigError("reference time grid does not contain the coarse times");
        acc += tau * norm_sq_between(a, b, static_cast<int>(n), nb);
    }
    return std::sqrt(acc);
}

double fracture_error_norm(const SimulationOutput& a, const SimulationOutput& b) {
    if (a.fracture_s_at_coarse.empty() || b.fracture_s_at_coarse.empty())
        throw ConfigError("no fracture states recorded");
    const double T = a.coarse_times.back();
    const DecomposedDomain& dd = *a.domain;
    double acc = 0.0;
    for (size_t n = 1; n < a.coarse_times.size(); ++n) {
        const double t = a.coarse_times[n];
        const double tau = t - a.coarse_times[n - 1];
        int nb = -1;
        for (size_t m = 0; m < b.coarse_times.size(); ++m)
            if (std::abs(b.coarse_times[m] - t) <= 1e-9 * std::max(1.0, T)) {
                nb = static_cast<int>(m);
                break;
            }
        if (nb < 0)
            throw ConfigError("reference time grid does not contain the coarse times");
        double sq = 0.0;
        for (int m = 0; m < dd.n_mortar(); ++m) {
            const double d =
                a.fracture_s_at_coarse[n][m] - b.fracture_s_at_coarse[nb][m];
            sq += dd.mortar()[m].area * d * d;
        }
        acc += tau * sq;
    }
    return std::sqrt(acc);
}

} // namespace splitflow
