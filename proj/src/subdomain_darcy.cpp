#include "splitflow/subdomain_darcy.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <map>

namespace splitflow {

namespace {

// Geometric RTN0 mass matrix on a box, outward-normal face dofs ordered like
// cell_faces (2*axis = lower face, 2*axis+1 = upper). Identical for every
// cell of a uniform lattice.
Eigen::MatrixXd geometric_mass(const StructuredMesh& m) {
    const int nf = 2 * m.dim;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nf, nf);
    const double V = m.cell_volume;
    for (int a = 0; a < m.dim; ++a) {
        M(2 * a, 2 * a) = V / 3.0;
        M(2 * a + 1, 2 * a + 1) = V / 3.0;
        M(2 * a, 2 * a + 1) = -V / 6.0;
        M(2 * a + 1, 2 * a) = -V / 6.0;
    }
    return M;
}

// Outward-normal component of a constant vector at local dof ld.
inline double outward_component(const std::array<double, 3>& v, int ld) {
    return (ld % 2 == 0) ? -v[ld / 2] : v[ld / 2];
}

} // namespace

// ---------------------------------------------------------------------------
// SubdomainPressure

struct SubdomainPressure::CellCache {
    Eigen::MatrixXd Mgeo;
    std::vector<Eigen::MatrixXd> E;   // T - c c^T / d on the free dofs
    std::vector<Eigen::VectorXd> c;   // T * area vector
    std::vector<double> d;
    std::vector<std::vector<int>> free_faces;  // face ids
    std::vector<std::vector<int>> free_lds;    // their local dof indices
    std::vector<std::vector<int>> pres_faces;
    std::vector<std::vector<int>> pres_lds;
};

SubdomainPressure::SubdomainPressure(const DecomposedDomain& dd, int sub,
                                     const RockType& rock, const FluidParams& fluid)
    : dd_(&dd), sub_(sub), mesh_(&dd.mesh(sub)), rock_(&rock), fluid_(&fluid) {
    mortars_ = dd.subdomain_mortars(sub);
    mortar_slot_of_face_.assign(mesh_->faces.size(), -1);
    for (int q = 0; q < static_cast<int>(mortars_.size()); ++q)
        mortar_slot_of_face_[mortars_[q].second] = q;
}

void SubdomainPressure::set_outer_flux(std::vector<std::pair<int, double>> outer) {
    outer_flux_ = std::move(outer);
}

void SubdomainPressure::build_mode(Mode& mode, bool mortar_prescribed,
                                   double robin_gamma) const {
    const StructuredMesh& m = *mesh_;
    const int nf = 2 * m.dim;
    mode.unknown_of_face.assign(m.faces.size(), -1);
    mode.n_unknown = 0;
    bool has_trace_bc = false;
    for (size_t f = 0; f < m.faces.size(); ++f) {
        const Face& fc = m.faces[f];
        if (fc.kind == FaceKind::Interior)
            mode.unknown_of_face[f] = mode.n_unknown++;
        else if (fc.kind == FaceKind::Mortar && !mortar_prescribed)
            has_trace_bc = true;  // Dirichlet data or Robin term anchors p
    }
    mode.regularized = !has_trace_bc;

    auto cc = std::make_shared<CellCache>();
    cc->Mgeo = geometric_mass(m);
    cc->E.resize(m.n_cells);
    cc->c.resize(m.n_cells);
    cc->d.resize(m.n_cells);
    cc->free_faces.resize(m.n_cells);
    cc->free_lds.resize(m.n_cells);
    cc->pres_faces.resize(m.n_cells);
    cc->pres_lds.resize(m.n_cells);

    std::vector<Eigen::Triplet<double>> trip;

    for (int k = 0; k < m.n_cells; ++k) {
        for (int ld = 0; ld < nf; ++ld) {
            const int f = m.cell_faces[k][ld];
            const Face& fc = m.faces[f];
            const bool prescribed =
                fc.kind == FaceKind::Boundary ||
                (fc.kind == FaceKind::Mortar && mortar_prescribed);
            if (prescribed) {
                cc->pres_faces[k].push_back(f);
                cc->pres_lds[k].push_back(ld);
            } else {
                cc->free_faces[k].push_back(f);
                cc->free_lds[k].push_back(ld);
            }
        }
        const auto& F = cc->free_faces[k];
        const auto& lds = cc->free_lds[k];
        const int nF = static_cast<int>(F.size());
        Eigen::MatrixXd Ahat(nF, nF);
        Eigen::VectorXd sa(nF);
        for (int a = 0; a < nF; ++a) {
            sa(a) = m.faces[F[a]].area;
            for (int b = 0; b < nF; ++b)
                Ahat(a, b) = inv_mobility_[k] * cc->Mgeo(lds[a], lds[b]);
            if (robin_gamma > 0.0 && m.faces[F[a]].kind == FaceKind::Mortar)
                Ahat(a, a) += m.faces[F[a]].area / robin_gamma;
        }
        const Eigen::MatrixXd T = Ahat.inverse();
        const Eigen::VectorXd c = T * sa;
        const double d = sa.dot(c);
        cc->E[k] = T - c * c.transpose() / d;
        cc->c[k] = c;
        cc->d[k] = d;
        for (int a = 0; a < nF; ++a) {
            const int ia = mode.unknown_of_face[F[a]];
            if (ia < 0) continue;
            for (int b = 0; b < nF; ++b) {
                const int ib = mode.unknown_of_face[F[b]];
                if (ib < 0) continue;
                // pin the first unknown when the mode is otherwise singular
                if (mode.regularized && (ia == 0 || ib == 0)) continue;
                trip.emplace_back(
                    ia, ib, m.faces[F[a]].area * cc->E[k](a, b) * m.faces[F[b]].area);
            }
        }
    }
    if (mode.regularized && mode.n_unknown > 0) trip.emplace_back(0, 0, 1.0);

    Eigen::SparseMatrix<double> A(mode.n_unknown, mode.n_unknown);
    A.setFromTriplets(trip.begin(), trip.end());
    mode.llt = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    if (mode.n_unknown > 0) {
        mode.llt->compute(A);
        if (mode.llt->info() != Eigen::Success)
            throw SolverError("subdomain pressure factorization failed");
    }
    mode.cells = cc;
}

void SubdomainPressure::set_saturation(const CellField& s) {
    if (static_cast<int>(s.size()) != mesh_->n_cells)
        throw ConfigError("saturation field size mismatch");
    s_ = s;
    inv_mobility_.resize(mesh_->n_cells);
    for (int k = 0; k < mesh_->n_cells; ++k)
        inv_mobility_[k] = 1.0 / rock_->coefficients(*fluid_, s[k]).M;
    beta_face_.assign(mortars_.size(), 0.0);
    for (size_t q = 0; q < mortars_.size(); ++q) {
        const Face& fc = mesh_->faces[mortars_[q].second];
        beta_face_[q] = rock_->beta(s_[fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos]);
    }
    build_mode(dirichlet_, /*mortar_prescribed=*/false, 0.0);
    build_mode(neumann_, /*mortar_prescribed=*/true, 0.0);
    robin_.clear();
}

DarcyState SubdomainPressure::run(const Mode& mode,
                                  const std::vector<double>& trace_data,
                                  const std::vector<double>* robin_eta,
                                  double gamma, bool gravity, bool outer_data,
                                  const std::vector<double>* mortar_flux) const {
    const StructuredMesh& m = *mesh_;
    const CellCache& cc = *mode.cells;

    // prescribed outward flux per face
    std::vector<double> pres_value(m.faces.size(), 0.0);
    if (outer_data)
        for (const auto& [f, v] : outer_flux_) pres_value[f] = v;
    if (mortar_flux)
        for (size_t q = 0; q < mortars_.size(); ++q)
            pres_value[mortars_[q].second] = (*mortar_flux)[q];

    // boundary trace data per free mortar face
    auto face_data = [&](int f) -> double {
        const Face& fc = m.faces[f];
        if (fc.kind != FaceKind::Mortar || mortar_flux) return 0.0;
        const int slot = mortar_slot_of_face_[f];
        if (robin_eta) return beta_face_[slot] + (*robin_eta)[slot] / gamma;
        return trace_data[slot];
    };

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(std::max(mode.n_unknown, 1));
    std::vector<Eigen::VectorXd> cell_r(m.n_cells);
    std::vector<double> cell_qt(m.n_cells, 0.0);

    for (int k = 0; k < m.n_cells; ++k) {
        const auto& F = cc.free_faces[k];
        const auto& lds = cc.free_lds[k];
        const auto& P = cc.pres_faces[k];
        const auto& plds = cc.pres_lds[k];
        const int nF = static_cast<int>(F.size());
        Eigen::VectorXd r(nF);
        const double rho =
            gravity ? rock_->coefficients(*fluid_, s_[k]).rho_mix : 0.0;
        double qt = 0.0;
        for (size_t pi = 0; pi < P.size(); ++pi)
            qt -= m.faces[P[pi]].area * pres_value[P[pi]];
        for (int a = 0; a < nF; ++a) {
            const int f = F[a];
            double grav = 0.0;
            if (gravity)
                grav = rho * outward_component(fluid_->gravity, lds[a]) *
                       m.cell_volume / 2.0;
            double apu = 0.0;
            for (size_t pi = 0; pi < P.size(); ++pi)
                apu += inv_mobility_[k] * cc.Mgeo(lds[a], plds[pi]) *
                       pres_value[P[pi]];
            r(a) = grav - m.faces[f].area * face_data(f) - apu;
        }
        cell_r[k] = r;
        cell_qt[k] = qt;
        const Eigen::VectorXd u_part = (qt / cc.d[k]) * cc.c[k] + cc.E[k] * r;
        for (int a = 0; a < nF; ++a) {
            const int id = mode.unknown_of_face[F[a]];
            if (id >= 0) rhs(id) += m.faces[F[a]].area * u_part(a);
        }
    }
    if (mode.regularized && mode.n_unknown > 0) rhs(0) = 0.0;

    Eigen::VectorXd lambda;
    if (mode.n_unknown > 0) {
        lambda = mode.llt->solve(rhs.head(mode.n_unknown));
        if (mode.llt->info() != Eigen::Success)
            throw SolverError("subdomain pressure solve failed");
    }

    DarcyState st;
    st.pressure.assign(m.n_cells, 0.0);
    st.flux.assign(m.faces.size(), 0.0);
    st.mortar_flux.assign(mortars_.size(), 0.0);
    st.mortar_trace.assign(mortars_.size(), 0.0);

    for (int k = 0; k < m.n_cells; ++k) {
        const auto& F = cc.free_faces[k];
        const int nF = static_cast<int>(F.size());
        Eigen::VectorXd lam = Eigen::VectorXd::Zero(nF);
        for (int a = 0; a < nF; ++a) {
            const int id = mode.unknown_of_face[F[a]];
            if (id >= 0) lam(a) = m.faces[F[a]].area * lambda(id);
        }
        const Eigen::VectorXd u =
            (cell_qt[k] / cc.d[k]) * cc.c[k] + cc.E[k] * (cell_r[k] - lam);
        st.pressure[k] = (cell_qt[k] + cc.c[k].dot(lam - cell_r[k])) / cc.d[k];
        for (int a = 0; a < nF; ++a) {
            const Face& fc = m.faces[F[a]];
            st.flux[F[a]] = fc.sign_for(k) * u(a);
        }
    }
    for (size_t f = 0; f < m.faces.size(); ++f) {
        const Face& fc = m.faces[f];
        const bool prescribed = fc.kind == FaceKind::Boundary ||
                                (fc.kind == FaceKind::Mortar && mortar_flux);
        if (!prescribed) continue;
        const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
        st.flux[f] = fc.sign_for(k) * pres_value[f];
    }

    if (mode.regularized) {
        double mean = 0.0;
        for (int k = 0; k < m.n_cells; ++k) mean += st.pressure[k];
        mean /= m.n_cells;
        for (auto& p : st.pressure) p -= mean;
    }

    for (size_t q = 0; q < mortars_.size(); ++q) {
        const int f = mortars_[q].second;
        const Face& fc = m.faces[f];
        const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
        const double u_out = st.flux[f] * fc.sign_for(k);
        st.mortar_flux[q] = u_out;
        if (mortar_flux) {
            // natural trace of p from the untested momentum row
            const int nf = 2 * m.dim;
            int ld = -1;
            for (int l = 0; l < nf; ++l)
                if (m.cell_faces[k][l] == f) ld = l;
            double au = 0.0;
            for (int l = 0; l < nf; ++l) {
                const int f2 = m.cell_faces[k][l];
                au += inv_mobility_[k] * cc.Mgeo(ld, l) * st.flux[f2] *
                      m.faces[f2].sign_for(k);
            }
            st.mortar_trace[q] = st.pressure[k] - au / fc.area;
        } else if (robin_eta) {
            st.mortar_trace[q] = ((*robin_eta)[q] + u_out) / gamma;
        } else {
            st.mortar_trace[q] = trace_data[q];
        }
    }
    return st;
}

DarcyState SubdomainPressure::solve_dirichlet(const std::vector<double>& lambda,
                                              bool with_beta, bool gravity,
                                              bool outer_data) const {
    std::vector<double> data(mortars_.size());
    for (size_t q = 0; q < mortars_.size(); ++q)
        data[q] = lambda[q] + (with_beta ? beta_face_[q] : 0.0);
    DarcyState st = run(dirichlet_, data, nullptr, 0.0, gravity, outer_data, nullptr);
    for (size_t q = 0; q < mortars_.size(); ++q) st.mortar_trace[q] = lambda[q];
    return st;
}

std::vector<double>
SubdomainPressure::solve_neumann_trace(const std::vector<double>& mortar_flux,
                                       bool strict) const {
    double area = 0.0, net = 0.0, scale = 0.0;
    for (size_t q = 0; q < mortars_.size(); ++q) {
        const double a = mesh_->faces[mortars_[q].second].area;
        area += a;
        net += a * mortar_flux[q];
        scale = std::max(scale, std::abs(mortar_flux[q]));
    }
    if (strict && std::abs(net) > 1e-8 * std::max(1.0, area * scale))
        throw SolverError("solve_neumann: incompatible interface flux data");
    std::vector<double> phi = mortar_flux;
    for (auto& v : phi) v -= net / area;

    DarcyState st =
        run(neumann_, {}, nullptr, 0.0, /*gravity=*/false, /*outer_data=*/false, &phi);
    double mean = 0.0;
    for (size_t q = 0; q < mortars_.size(); ++q)
        mean += mesh_->faces[mortars_[q].second].area * st.mortar_trace[q];
    mean /= area;
    std::vector<double> out(mortars_.size());
    for (size_t q = 0; q < mortars_.size(); ++q) out[q] = st.mortar_trace[q] - mean;
    return out;
}

DarcyState SubdomainPressure::solve_robin(double gamma,
                                          const std::vector<double>& eta,
                                          bool gravity, bool outer_data) const {
    if (!(gamma > 0.0)) throw ConfigError("Robin parameter must be positive");
    auto it = robin_.find(gamma);
    if (it == robin_.end()) {
        Mode mode;
        build_mode(mode, /*mortar_prescribed=*/false, gamma);
        it = robin_.emplace(gamma, std::move(mode)).first;
    }
    return run(it->second, {}, &eta, gamma, gravity, outer_data, nullptr);
}

// ---------------------------------------------------------------------------
// SubdomainDiffusion

SubdomainDiffusion::SubdomainDiffusion(const DecomposedDomain& dd, int sub,
                                       const RockType& rock)
    : dd_(&dd), sub_(sub), mesh_(&dd.mesh(sub)), rock_(&rock) {
    mortars_ = dd.subdomain_mortars(sub);
    mortar_slot_of_face_.assign(mesh_->faces.size(), -1);
    for (int q = 0; q < static_cast<int>(mortars_.size()); ++q)
        mortar_slot_of_face_[mortars_[q].second] = q;
}

void SubdomainDiffusion::set_outer_saturation(std::vector<std::pair<int, double>> ghost) {
    outer_ghost_ = std::move(ghost);
}

double SubdomainDiffusion::robin_sign() const {
    return rock_->vg().orientation == CapillaryOrientation::Decreasing ? -1.0 : 1.0;
}

SubdomainDiffusion::Result
SubdomainDiffusion::solve_dirichlet(const CellField& s_star, double tau,
                                    const std::vector<double>& lambda_d,
                                    const NewtonOptions& opt) const {
    return solve(s_star, tau, MortarMode::Dirichlet, lambda_d, 0.0, opt);
}

SubdomainDiffusion::Result
SubdomainDiffusion::solve_robin(const CellField& s_star, double tau, double kappa,
                                const std::vector<double>& eta,
                                const NewtonOptions& opt) const {
    if (!(kappa > 0.0)) throw ConfigError("Robin parameter must be positive");
    return solve(s_star, tau, MortarMode::Robin, eta, kappa, opt);
}

namespace {

enum class DFace { InteriorUnknown, MortarData, MortarTheta, AlphaData, NoFlow };

struct DiffusionLayout {
    std::vector<DFace> type;
    std::vector<int> xi_of_face;  // face -> unknown index or -1
    int n_interior = 0;
    int n_xi = 0;
};

DiffusionLayout make_layout(const StructuredMesh& m, bool robin,
                            const std::vector<std::pair<int, double>>& ghosts) {
    DiffusionLayout lay;
    lay.type.assign(m.faces.size(), DFace::NoFlow);
    lay.xi_of_face.assign(m.faces.size(), -1);
    std::vector<char> has_ghost(m.faces.size(), 0);
    for (const auto& [f, s] : ghosts) has_ghost[f] = 1;
    for (size_t f = 0; f < m.faces.size(); ++f) {
        const Face& fc = m.faces[f];
        if (fc.kind == FaceKind::Interior) {
            lay.type[f] = DFace::InteriorUnknown;
            lay.xi_of_face[f] = lay.n_interior++;
        } else if (fc.kind == FaceKind::Mortar) {
            lay.type[f] = robin ? DFace::MortarTheta : DFace::MortarData;
        } else if (has_ghost[f]) {
            lay.type[f] = DFace::AlphaData;
        }
    }
    lay.n_xi = lay.n_interior;
    for (size_t f = 0; f < m.faces.size(); ++f)
        if (lay.type[f] == DFace::MortarTheta) lay.xi_of_face[f] = lay.n_xi++;
    return lay;
}

// per-cell reduced operators on the non-no-flow dofs; cells share patterns
struct CellOps {
    std::vector<int> fl;  // local dofs kept
    Eigen::MatrixXd T;
    Eigen::VectorXd c;
    double d = 0.0;
};

} // namespace

SubdomainDiffusion::Result
SubdomainDiffusion::solve(const CellField& s_star, double tau, MortarMode mmode,
                          const std::vector<double>& data, double kappa,
                          const NewtonOptions& opt) const {
    const StructuredMesh& m = *mesh_;
    const RockType& rock = *rock_;
    const int nf = 2 * m.dim;
    const bool robin = (mmode == MortarMode::Robin);
    const double sgn = robin_sign();
    const DiffusionLayout lay = make_layout(m, robin, outer_ghost_);
    const Eigen::MatrixXd Mgeo = geometric_mass(m);
    const double invK = 1.0 / rock.permeability();
    const double phiV = rock.porosity() * m.cell_volume;

    Eigen::VectorXd area_ld(nf);
    for (int ld = 0; ld < nf; ++ld)
        area_ld(ld) = m.faces[m.cell_faces[0][ld]].area;

    // reduced cell operators cached by dof pattern
    std::map<int, CellOps> ops_cache;
    std::vector<const CellOps*> ops(m.n_cells);
    for (int k = 0; k < m.n_cells; ++k) {
        int mask = 0;
        std::vector<int> fl;
        for (int ld = 0; ld < nf; ++ld) {
            const int f = m.cell_faces[k][ld];
            if (lay.type[f] != DFace::NoFlow) {
                mask |= (1 << ld);
                fl.push_back(ld);
            }
        }
        auto it = ops_cache.find(mask);
        if (it == ops_cache.end()) {
            CellOps o;
            o.fl = fl;
            const int nF = static_cast<int>(fl.size());
            Eigen::MatrixXd A(nF, nF);
            Eigen::VectorXd s(nF);
            for (int a = 0; a < nF; ++a) {
                s(a) = area_ld(fl[a]);
                for (int b = 0; b < nF; ++b) A(a, b) = invK * Mgeo(fl[a], fl[b]);
            }
            o.T = A.inverse();
            o.c = o.T * s;
            o.d = s.dot(o.c);
            it = ops_cache.emplace(mask, std::move(o)).first;
        }
        ops[k] = &it->second;
    }

    // fixed alpha data on ghost and (Dirichlet-mode) mortar faces
    std::vector<double> alpha_data(m.faces.size(), 0.0);
    for (const auto& [f, s] : outer_ghost_) alpha_data[f] = rock.kirchhoff_alpha(s);
    std::vector<double> theta_data(mortars_.size(), 0.0);
    if (!robin) {
        for (size_t q = 0; q < mortars_.size(); ++q) {
            theta_data[q] = rock.pc_inverse(data[q]);
            alpha_data[mortars_[q].second] = rock.kirchhoff_alpha(theta_data[q]);
        }
    }

    CellField w = s_star;
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(lay.n_xi);
    for (size_t f = 0; f < m.faces.size(); ++f) {
        const Face& fc = m.faces[f];
        if (lay.type[f] == DFace::InteriorUnknown)
            xi(lay.xi_of_face[f]) = 0.5 * (rock.kirchhoff_alpha(w[fc.cell_neg]) +
                                           rock.kirchhoff_alpha(w[fc.cell_pos]));
        else if (lay.type[f] == DFace::MortarTheta)
            xi(lay.xi_of_face[f]) = w[fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos];
    }

    auto trace_value = [&](int f, const Eigen::VectorXd& xiv) -> double {
        switch (lay.type[f]) {
        case DFace::InteriorUnknown: return xiv(lay.xi_of_face[f]);
        case DFace::MortarTheta: return rock.kirchhoff_alpha(xiv(lay.xi_of_face[f]));
        case DFace::MortarData:
        case DFace::AlphaData: return alpha_data[f];
        default: return 0.0;
        }
    };

    // outward flux per cell on the reduced dofs
    auto cell_fluxes = [&](const CellField& wv, const Eigen::VectorXd& xiv,
                           std::vector<Eigen::VectorXd>& r_cell) {
        r_cell.resize(m.n_cells);
        for (int k = 0; k < m.n_cells; ++k) {
            const CellOps& o = *ops[k];
            const int nF = static_cast<int>(o.fl.size());
            Eigen::VectorXd rr(nF);
            const double aw = rock.kirchhoff_alpha(wv[k]);
            for (int a = 0; a < nF; ++a) {
                const int f = m.cell_faces[k][o.fl[a]];
                rr(a) = aw * area_ld(o.fl[a]) -
                        m.faces[f].area * trace_value(f, xiv);
            }
            r_cell[k] = o.T * rr;
        }
    };

    auto residual = [&](const CellField& wv, const Eigen::VectorXd& xiv,
                        const std::vector<Eigen::VectorXd>& r_cell,
                        Eigen::VectorXd& Rmass, Eigen::VectorXd& Rface) {
        Rmass.resize(m.n_cells);
        std::vector<double> sum_out(m.faces.size(), 0.0);
        for (int k = 0; k < m.n_cells; ++k) {
            const CellOps& o = *ops[k];
            double div = 0.0;
            for (int a = 0; a < static_cast<int>(o.fl.size()); ++a) {
                const int f = m.cell_faces[k][o.fl[a]];
                div += m.faces[f].area * r_cell[k](a);
                sum_out[f] += r_cell[k](a);
            }
            Rmass(k) = phiV * (wv[k] - s_star[k]) / tau + div;
        }
        Rface = Eigen::VectorXd::Zero(std::max(lay.n_xi, 1));
        for (size_t f = 0; f < m.faces.size(); ++f) {
            if (lay.type[f] == DFace::InteriorUnknown)
                Rface(lay.xi_of_face[f]) = sum_out[f];
            else if (lay.type[f] == DFace::MortarTheta) {
                const int slot = mortar_slot_of_face_[f];
                const double theta = xiv(lay.xi_of_face[f]);
                Rface(lay.xi_of_face[f]) =
                    -sum_out[f] + sgn * kappa * rock.pc(theta) - data[slot];
            }
        }
    };

    std::vector<Eigen::VectorXd> r_cell;
    Eigen::VectorXd Rmass, Rface;
    cell_fluxes(w, xi, r_cell);
    residual(w, xi, r_cell, Rmass, Rface);
    auto norm_of = [&]() { return std::sqrt(Rmass.squaredNorm() + Rface.squaredNorm()); };
    double rnorm = norm_of();
    // numerically-zero floor from the natural row magnitudes: a full
    // saturation swing per step for mass rows, a unit alpha jump for flux rows
    double area_max = 0.0;
    for (const Face& fc : m.faces) area_max = std::max(area_max, fc.area);
    const double flux_row = rock.kirchhoff_alpha(1.0) * area_max * area_max /
                            (invK * m.cell_volume / 3.0);
    const double floor_scale = 1e-13 * std::max(phiV / tau, flux_row) *
                               std::sqrt(static_cast<double>(m.n_cells + lay.n_xi));
    const double target = std::max({opt.rtol * rnorm, opt.atol, floor_scale});

    int it = 0;
    for (; it < opt.max_iter && rnorm > target && rnorm > 0.0; ++it) {
        std::vector<double> aprime(m.n_cells), kacc(m.n_cells);
        for (int k = 0; k < m.n_cells; ++k) {
            aprime[k] = rock.alpha_prime(w[k]);
            kacc[k] = phiV / tau + aprime[k] * ops[k]->d;
        }
        auto chain = [&](int f) -> double {
            if (lay.type[f] == DFace::InteriorUnknown) return 1.0;
            if (lay.type[f] == DFace::MortarTheta)
                return rock.alpha_prime(xi(lay.xi_of_face[f]));
            return 0.0;
        };

        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(std::max(lay.n_xi, 1));
        for (int k = 0; k < m.n_cells; ++k) {
            const CellOps& o = *ops[k];
            const int nF = static_cast<int>(o.fl.size());
            const Eigen::MatrixXd Etil =
                o.T - (aprime[k] / kacc[k]) * o.c * o.c.transpose();
            for (int a = 0; a < nF; ++a) {
                const int fa = m.cell_faces[k][o.fl[a]];
                const int row = lay.xi_of_face[fa];
                if (row < 0) continue;
                for (int b = 0; b < nF; ++b) {
                    const int fb = m.cell_faces[k][o.fl[b]];
                    const int col = lay.xi_of_face[fb];
                    if (col < 0) continue;
                    trip.emplace_back(row, col,
                                      Etil(a, b) * m.faces[fb].area * chain(fb));
                }
                rhs(row) -= (aprime[k] / kacc[k]) * Rmass(k) * o.c(a);
            }
        }
        for (size_t f = 0; f < m.faces.size(); ++f) {
            const int row = lay.xi_of_face[f];
            if (row < 0) continue;
            if (lay.type[f] == DFace::InteriorUnknown) {
                rhs(row) += Rface(row);
            } else {
                const double theta = xi(row);
                trip.emplace_back(row, row, sgn * kappa * rock.pc_derivative(theta));
                rhs(row) -= Rface(row);
            }
        }

        Eigen::VectorXd dxi = Eigen::VectorXd::Zero(std::max(lay.n_xi, 1));
        if (lay.n_xi > 0) {
            Eigen::SparseMatrix<double> J(lay.n_xi, lay.n_xi);
            J.setFromTriplets(trip.begin(), trip.end());
            Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
            lu.compute(J);
            if (lu.info() != Eigen::Success)
                throw SolverError("diffusion Newton Jacobian is singular");
            dxi.head(lay.n_xi) = lu.solve(rhs.head(lay.n_xi));
        }
        Eigen::VectorXd dw(m.n_cells);
        for (int k = 0; k < m.n_cells; ++k) {
            const CellOps& o = *ops[k];
            double cD = 0.0;
            for (int a = 0; a < static_cast<int>(o.fl.size()); ++a) {
                const int f = m.cell_faces[k][o.fl[a]];
                const int col = lay.xi_of_face[f];
                if (col >= 0)
                    cD += o.c(a) * m.faces[f].area * chain(f) * dxi(col);
            }
            dw(k) = (cD - Rmass(k)) / kacc[k];
        }

        // damped update on the residual norm
        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h) {
            CellField w_try = w;
            for (int k = 0; k < m.n_cells; ++k) w_try[k] += step * dw(k);
            Eigen::VectorXd xi_try = xi + step * dxi.head(lay.n_xi < 1 ? 0 : lay.n_xi);
            std::vector<Eigen::VectorXd> r_try;
            cell_fluxes(w_try, xi_try, r_try);
            Eigen::VectorXd Rm, Rf;
            residual(w_try, xi_try, r_try, Rm, Rf);
            const double rn = std::sqrt(Rm.squaredNorm() + Rf.squaredNorm());
            if (rn < rnorm || rn <= target) {
                w = std::move(w_try);
                xi = xi_try;
                r_cell = std::move(r_try);
                Rmass = Rm;
                Rface = Rf;
                rnorm = rn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            throw SolverError("diffusion Newton stalled at residual " +
                              std::to_string(rnorm));
    }
    if (rnorm > target)
        throw SolverError("diffusion Newton did not converge; residual " +
                          std::to_string(rnorm));

    Result out;
    out.newton_iterations = it;
    out.s_new = w;
    out.state.pressure.resize(m.n_cells);
    for (int k = 0; k < m.n_cells; ++k)
        out.state.pressure[k] = rock.kirchhoff_alpha(w[k]);
    out.state.flux.assign(m.faces.size(), 0.0);
    for (int k = 0; k < m.n_cells; ++k) {
        const CellOps& o = *ops[k];
        for (int a = 0; a < static_cast<int>(o.fl.size()); ++a) {
            const int f = m.cell_faces[k][o.fl[a]];
            out.state.flux[f] = m.faces[f].sign_for(k) * r_cell[k](a);
        }
    }
    out.state.mortar_flux.assign(mortars_.size(), 0.0);
    out.state.mortar_trace.assign(mortars_.size(), 0.0);
    out.mortar_theta.assign(mortars_.size(), 0.0);
    for (size_t q = 0; q < mortars_.size(); ++q) {
        const int f = mortars_[q].second;
        const Face& fc = m.faces[f];
        const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
        out.state.mortar_flux[q] = out.state.flux[f] * fc.sign_for(k);
        if (robin) {
            out.mortar_theta[q] = xi(lay.xi_of_face[f]);
            out.state.mortar_trace[q] = rock.pc(out.mortar_theta[q]);
        } else {
            out.mortar_theta[q] = theta_data[q];
            out.state.mortar_trace[q] = data[q];
        }
    }
    return out;
}

std::function<std::vector<double>(const std::vector<double>&)>
SubdomainDiffusion::make_linearized_dtn(const CellField& s_star, double tau,
                                        const std::vector<double>& lambda0) const {
    const StructuredMesh& m = *mesh_;
    const RockType& rock = *rock_;
    const int nf = 2 * m.dim;
    const auto lay = make_layout(m, /*robin=*/false, outer_ghost_);
    const Eigen::MatrixXd Mgeo = geometric_mass(m);
    const double invK = 1.0 / rock.permeability();
    const double phiV = rock.porosity() * m.cell_volume;

    std::vector<double> chain_data(mortars_.size());
    for (size_t q = 0; q < mortars_.size(); ++q) {
        const double theta0 = rock.pc_inverse(lambda0[q]);
        chain_data[q] = rock.alpha_prime(theta0) / rock.pc_derivative(theta0);
    }

    struct FrozenCell {
        std::vector<int> fl;
        Eigen::MatrixXd Etil;
    };
    auto cells = std::make_shared<std::vector<FrozenCell>>(m.n_cells);
    Eigen::VectorXd area_ld(nf);
    for (int ld = 0; ld < nf; ++ld)
        area_ld(ld) = m.faces[m.cell_faces[0][ld]].area;
    for (int k = 0; k < m.n_cells; ++k) {
        FrozenCell& o = (*cells)[k];
        for (int ld = 0; ld < nf; ++ld)
            if (lay.type[m.cell_faces[k][ld]] != DFace::NoFlow) o.fl.push_back(ld);
        const int nF = static_cast<int>(o.fl.size());
        Eigen::MatrixXd A(nF, nF);
        Eigen::VectorXd s(nF);
        for (int a = 0; a < nF; ++a) {
            s(a) = area_ld(o.fl[a]);
            for (int b = 0; b < nF; ++b) A(a, b) = invK * Mgeo(o.fl[a], o.fl[b]);
        }
        const Eigen::MatrixXd T = A.inverse();
        const Eigen::VectorXd c = T * s;
        const double d = s.dot(c);
        const double aprime = rock.alpha_prime(s_star[k]);
        const double kacc = phiV / tau + aprime * d;
        o.Etil = T - (aprime / kacc) * c * c.transpose();
    }

    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < m.n_cells; ++k) {
        const FrozenCell& o = (*cells)[k];
        const int nF = static_cast<int>(o.fl.size());
        for (int a = 0; a < nF; ++a) {
            const int fa = m.cell_faces[k][o.fl[a]];
            if (lay.type[fa] != DFace::InteriorUnknown) continue;
            for (int b = 0; b < nF; ++b) {
                const int fb = m.cell_faces[k][o.fl[b]];
                if (lay.type[fb] != DFace::InteriorUnknown) continue;
                trip.emplace_back(lay.xi_of_face[fa], lay.xi_of_face[fb],
                                  o.Etil(a, b) * m.faces[fb].area);
            }
        }
    }
    auto lu = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    if (lay.n_interior > 0) {
        Eigen::SparseMatrix<double> J(lay.n_interior, lay.n_interior);
        J.setFromTriplets(trip.begin(), trip.end());
        lu->compute(J);
        if (lu->info() != Eigen::Success)
            throw SolverError("linearized diffusion operator factorization failed");
    }

    const StructuredMesh* mesh = mesh_;
    auto mortars = mortars_;
    return [=](const std::vector<double>& dlambda) {
        std::vector<double> dalpha(mesh->faces.size(), 0.0);
        for (size_t q = 0; q < mortars.size(); ++q)
            dalpha[mortars[q].second] = chain_data[q] * dlambda[q];
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(std::max(lay.n_interior, 1));
        for (int k = 0; k < mesh->n_cells; ++k) {
            const FrozenCell& o = (*cells)[k];
            const int nF = static_cast<int>(o.fl.size());
            for (int a = 0; a < nF; ++a) {
                const int fa = mesh->cell_faces[k][o.fl[a]];
                if (lay.type[fa] != DFace::InteriorUnknown) continue;
                double v = 0.0;
                for (int b = 0; b < nF; ++b) {
                    const int fb = mesh->cell_faces[k][o.fl[b]];
                    v += o.Etil(a, b) * mesh->faces[fb].area * dalpha[fb];
                }
                rhs(lay.xi_of_face[fa]) -= v;
            }
        }
        Eigen::VectorXd dxi;
        if (lay.n_interior > 0) dxi = lu->solve(rhs.head(lay.n_interior));
        std::vector<double> out(mortars.size(), 0.0);
        for (size_t q = 0; q < mortars.size(); ++q) {
            const int f = mortars[q].second;
            const Face& fc = mesh->faces[f];
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            const FrozenCell& o = (*cells)[k];
            const int nF = static_cast<int>(o.fl.size());
            int a_of = -1;
            for (int a = 0; a < nF; ++a)
                if (mesh->cell_faces[k][o.fl[a]] == f) a_of = a;
            double dr = 0.0;
            for (int b = 0; b < nF; ++b) {
                const int fb = mesh->cell_faces[k][o.fl[b]];
                double dtr = dalpha[fb];
                if (lay.type[fb] == DFace::InteriorUnknown)
                    dtr += dxi(lay.xi_of_face[fb]);
                dr -= o.Etil(a_of, b) * mesh->faces[fb].area * dtr;
            }
            out[q] = dr;
        }
        return out;
    };
}

} // namespace splitflow
