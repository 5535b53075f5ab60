#include "splitflow/monolithic.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

#include "rtn0_local.hpp"

namespace splitflow {

using detail::geometric_mass;
using detail::outward_component;

Monolithic::Monolithic(const DecomposedDomain& dd,
                       const std::vector<RockType>& rocks,
                       const FluidParams& fluid)
    : dd_(&dd), rocks_(&rocks), fluid_(&fluid) {
    outer_flux_.resize(dd.n_subdomains());
    outer_ghost_.resize(dd.n_subdomains());
}

void Monolithic::set_outer_flux(int sub, std::vector<std::pair<int, double>> outer) {
    outer_flux_[sub] = std::move(outer);
}

void Monolithic::set_outer_saturation(int sub,
                                      std::vector<std::pair<int, double>> ghost) {
    outer_ghost_[sub] = std::move(ghost);
}

int Monolithic::max_cells() const {
    int n = 0;
    for (int i = 0; i < dd_->n_subdomains(); ++i) n += dd_->mesh(i).n_cells;
    return n;
}

namespace {

struct GlobalLayout {
    // face unknown id per (subdomain, local face); mortar faces shared
    std::vector<std::vector<int>> id;
    int n_interior = 0;
    int n_unknown = 0;
};

GlobalLayout make_layout(const DecomposedDomain& dd) {
    GlobalLayout lay;
    lay.id.resize(dd.n_subdomains());
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const StructuredMesh& m = dd.mesh(i);
        lay.id[i].assign(m.faces.size(), -1);
        for (size_t f = 0; f < m.faces.size(); ++f)
            if (m.faces[f].kind == FaceKind::Interior)
                lay.id[i][f] = lay.n_interior++;
    }
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const StructuredMesh& m = dd.mesh(i);
        for (size_t f = 0; f < m.faces.size(); ++f)
            if (m.faces[f].kind == FaceKind::Mortar)
                lay.id[i][f] = lay.n_interior + m.faces[f].mortar_id;
    }
    lay.n_unknown = lay.n_interior + dd.n_mortar();
    return lay;
}

} // namespace

Monolithic::PressureSolution
Monolithic::solve_pressure(const std::vector<CellField>& s, bool gravity) const {
    const DecomposedDomain& dd = *dd_;
    const GlobalLayout lay = make_layout(dd);
    const int n = lay.n_unknown;

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);

    struct CellData {
        Eigen::MatrixXd E;
        Eigen::VectorXd c, r;
        double d = 0.0, qt = 0.0;
        std::vector<int> F;  // free local faces
    };
    std::vector<std::vector<CellData>> cells(dd.n_subdomains());

    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const StructuredMesh& m = dd.mesh(i);
        const RockType& rock = (*rocks_)[dd.rock_index(i)];
        const Eigen::MatrixXd Mgeo = geometric_mass(m);
        const int nf = 2 * m.dim;
        std::vector<double> pres_value(m.faces.size(), 0.0);
        for (const auto& [f, v] : outer_flux_[i]) pres_value[f] = v;
        cells[i].resize(m.n_cells);
        for (int k = 0; k < m.n_cells; ++k) {
            CellData& cd = cells[i][k];
            const double invM = 1.0 / rock.coefficients(*fluid_, s[i][k]).M;
            std::vector<int> lds;
            std::vector<int> plds;
            std::vector<int> P;
            for (int ld = 0; ld < nf; ++ld) {
                const int f = m.cell_faces[k][ld];
                if (m.faces[f].kind == FaceKind::Boundary) {
                    P.push_back(f);
                    plds.push_back(ld);
                } else {
                    cd.F.push_back(f);
                    lds.push_back(ld);
                }
            }
            const int nF = static_cast<int>(cd.F.size());
            Eigen::MatrixXd Ahat(nF, nF);
            Eigen::VectorXd sa(nF);
            for (int a = 0; a < nF; ++a) {
                sa(a) = m.faces[cd.F[a]].area;
                for (int b = 0; b < nF; ++b)
                    Ahat(a, b) = invM * Mgeo(lds[a], lds[b]);
            }
            const Eigen::MatrixXd T = Ahat.inverse();
            cd.c = T * sa;
            cd.d = sa.dot(cd.c);
            cd.E = T - cd.c * cd.c.transpose() / cd.d;

            const double rho =
                gravity ? rock.coefficients(*fluid_, s[i][k]).rho_mix : 0.0;
            cd.r.resize(nF);
            cd.qt = 0.0;
            for (size_t pi = 0; pi < P.size(); ++pi)
                cd.qt -= m.faces[P[pi]].area * pres_value[P[pi]];
            for (int a = 0; a < nF; ++a) {
                const int f = cd.F[a];
                double grav = 0.0;
                if (gravity)
                    grav = rho * outward_component(fluid_->gravity, lds[a]) *
                           m.cell_volume / 2.0;
                double apu = 0.0;
                for (size_t pi = 0; pi < P.size(); ++pi)
                    apu += invM * Mgeo(lds[a], plds[pi]) * pres_value[P[pi]];
                // the trace unknown on interface faces is lambda = p - beta;
                // its beta offset is data
                double g = 0.0;
                if (m.faces[f].kind == FaceKind::Mortar)
                    g = m.faces[f].area * rock.beta(s[i][k]);
                cd.r(a) = grav - g - apu;
            }
            const Eigen::VectorXd u_part = (cd.qt / cd.d) * cd.c + cd.E * cd.r;
            for (int a = 0; a < nF; ++a) {
                const int ia = lay.id[i][cd.F[a]];
                // pinned first unknown handles the all-Neumann nullspace
                if (ia == 0) continue;
                rhs(ia) += m.faces[cd.F[a]].area * u_part(a);
                for (int b = 0; b < nF; ++b) {
                    const int ib = lay.id[i][cd.F[b]];
                    if (ib == 0) continue;
                    trip.emplace_back(ia, ib,
                                      m.faces[cd.F[a]].area * cd.E(a, b) *
                                          m.faces[cd.F[b]].area);
                }
            }
        }
    }
    trip.emplace_back(0, 0, 1.0);
    rhs(0) = 0.0;

    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> llt(A);
    if (llt.info() != Eigen::Success)
        throw SolverError("monolithic pressure factorization failed");
    Eigen::VectorXd lambda = llt.solve(rhs);

    PressureSolution sol;
    sol.states.resize(dd.n_subdomains());
    double vol = 0.0, mean = 0.0;
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        const StructuredMesh& m = dd.mesh(i);
        DarcyState& st = sol.states[i];
        st.pressure.assign(m.n_cells, 0.0);
        st.flux.assign(m.faces.size(), 0.0);
        std::vector<double> pres_value(m.faces.size(), 0.0);
        for (const auto& [f, v] : outer_flux_[i]) pres_value[f] = v;
        for (int k = 0; k < m.n_cells; ++k) {
            const CellData& cd = cells[i][k];
            const int nF = static_cast<int>(cd.F.size());
            Eigen::VectorXd lam(nF);
            for (int a = 0; a < nF; ++a)
                lam(a) = m.faces[cd.F[a]].area * lambda(lay.id[i][cd.F[a]]);
            const Eigen::VectorXd u =
                (cd.qt / cd.d) * cd.c + cd.E * (cd.r - lam);
            st.pressure[k] = (cd.qt + cd.c.dot(lam - cd.r)) / cd.d;
            for (int a = 0; a < nF; ++a)
                st.flux[cd.F[a]] = m.faces[cd.F[a]].sign_for(k) * u(a);
        }
        for (size_t f = 0; f < m.faces.size(); ++f)
            if (m.faces[f].kind == FaceKind::Boundary) {
                const Face& fc = m.faces[f];
                const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
                st.flux[f] = fc.sign_for(k) * pres_value[f];
            }
        for (int k = 0; k < m.n_cells; ++k) mean += m.cell_volume * st.pressure[k];
        vol += m.volume();
    }
    mean /= vol;
    sol.lambda = zero_trace(dd);
    for (int m = 0; m < dd.n_mortar(); ++m)
        sol.lambda[m] = lambda(lay.n_interior + m) - mean;
    for (int i = 0; i < dd.n_subdomains(); ++i) {
        for (auto& p : sol.states[i].pressure) p -= mean;
        const auto& slots = dd.subdomain_mortars(i);
        sol.states[i].mortar_flux.resize(slots.size());
        sol.states[i].mortar_trace.resize(slots.size());
        for (size_t q = 0; q < slots.size(); ++q) {
            const Face& fc = dd.mesh(i).faces[slots[q].second];
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            sol.states[i].mortar_flux[q] =
                sol.states[i].flux[slots[q].second] * fc.sign_for(k);
            sol.states[i].mortar_trace[q] = sol.lambda[slots[q].first];
        }
    }
    return sol;
}

Monolithic::DiffusionSolution
Monolithic::solve_diffusion(const std::vector<CellField>& s_star, double tau,
                            const NewtonOptions& opt) const {
    const DecomposedDomain& dd = *dd_;
    const int n_sub = dd.n_subdomains();
    const GlobalLayout lay = make_layout(dd);
    const int n = lay.n_unknown;

    // admissible capillary range of the interface trace
    double qlo = -std::numeric_limits<double>::infinity();
    double qhi = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_sub; ++i) {
        auto [lo, hi] = (*rocks_)[dd.rock_index(i)].pc_range();
        qlo = std::max(qlo, lo);
        qhi = std::min(qhi, hi);
    }

    struct CellOps {
        std::vector<int> F, lds;
        Eigen::MatrixXd T;
        Eigen::VectorXd c;
        double d = 0.0;
    };
    std::vector<std::vector<CellOps>> ops(n_sub);
    std::vector<std::vector<double>> alpha_ghost(n_sub);
    for (int i = 0; i < n_sub; ++i) {
        const StructuredMesh& m = dd.mesh(i);
        const RockType& rock = (*rocks_)[dd.rock_index(i)];
        const Eigen::MatrixXd Mgeo = geometric_mass(m);
        const double invK = 1.0 / rock.permeability();
        const int nf = 2 * m.dim;
        alpha_ghost[i].assign(m.faces.size(), 0.0);
        std::vector<char> has_ghost(m.faces.size(), 0);
        for (const auto& [f, sv] : outer_ghost_[i]) {
            alpha_ghost[i][f] = rock.kirchhoff_alpha(sv);
            has_ghost[f] = 1;
        }
        ops[i].resize(m.n_cells);
        for (int k = 0; k < m.n_cells; ++k) {
            CellOps& o = ops[i][k];
            for (int ld = 0; ld < nf; ++ld) {
                const int f = m.cell_faces[k][ld];
                const Face& fc = m.faces[f];
                const bool keep = fc.kind != FaceKind::Boundary || has_ghost[f];
                if (keep) {
                    o.F.push_back(f);
                    o.lds.push_back(ld);
                }
            }
            const int nF = static_cast<int>(o.F.size());
            Eigen::MatrixXd A(nF, nF);
            Eigen::VectorXd sa(nF);
            for (int a = 0; a < nF; ++a) {
                sa(a) = m.faces[o.F[a]].area;
                for (int b = 0; b < nF; ++b)
                    A(a, b) = invK * Mgeo(o.lds[a], o.lds[b]);
            }
            o.T = A.inverse();
            o.c = o.T * sa;
            o.d = sa.dot(o.c);
        }
    }

    // state: w per cell, xi = [interior alpha traces ; interface capillary q]
    std::vector<CellField> w = s_star;
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n_sub; ++i) {
        const StructuredMesh& m = dd.mesh(i);
        const RockType& rock = (*rocks_)[dd.rock_index(i)];
        for (size_t f = 0; f < m.faces.size(); ++f)
            if (m.faces[f].kind == FaceKind::Interior)
                xi(lay.id[i][f]) =
                    0.5 * (rock.kirchhoff_alpha(w[i][m.faces[f].cell_neg]) +
                           rock.kirchhoff_alpha(w[i][m.faces[f].cell_pos]));
    }
    for (int mq = 0; mq < dd.n_mortar(); ++mq) {
        const MortarFace& mf = dd.mortar()[mq];
        const Face& fn = dd.mesh(mf.sub_neg).faces[mf.face_neg];
        const Face& fp = dd.mesh(mf.sub_pos).faces[mf.face_pos];
        const int kn = fn.cell_neg >= 0 ? fn.cell_neg : fn.cell_pos;
        const int kp = fp.cell_neg >= 0 ? fp.cell_neg : fp.cell_pos;
        const double pn = (*rocks_)[dd.rock_index(mf.sub_neg)].pc(w[mf.sub_neg][kn]);
        const double pp = (*rocks_)[dd.rock_index(mf.sub_pos)].pc(w[mf.sub_pos][kp]);
        xi(lay.n_interior + mq) =
            std::min(qhi - 1e-12, std::max(qlo + 1e-12, 0.5 * (pn + pp)));
    }

    auto trace_value = [&](int i, int f, const Eigen::VectorXd& xiv) -> double {
        const Face& fc = dd.mesh(i).faces[f];
        const RockType& rock = (*rocks_)[dd.rock_index(i)];
        if (fc.kind == FaceKind::Interior) return xiv(lay.id[i][f]);
        if (fc.kind == FaceKind::Mortar)
            return rock.kirchhoff_alpha(rock.pc_inverse(xiv(lay.id[i][f])));
        return alpha_ghost[i][f];
    };

    std::vector<std::vector<Eigen::VectorXd>> r_cell(n_sub);
    auto compute_fluxes = [&](const std::vector<CellField>& wv,
                              const Eigen::VectorXd& xiv) {
        for (int i = 0; i < n_sub; ++i) {
            const StructuredMesh& m = dd.mesh(i);
            const RockType& rock = (*rocks_)[dd.rock_index(i)];
            r_cell[i].resize(m.n_cells);
            for (int k = 0; k < m.n_cells; ++k) {
                const CellOps& o = ops[i][k];
                const int nF = static_cast<int>(o.F.size());
                Eigen::VectorXd rr(nF);
                const double aw = rock.kirchhoff_alpha(wv[i][k]);
                for (int a = 0; a < nF; ++a)
                    rr(a) = aw * m.faces[o.F[a]].area -
                            m.faces[o.F[a]].area * trace_value(i, o.F[a], xiv);
                r_cell[i][k] = o.T * rr;
            }
        }
    };

    auto residual = [&](const std::vector<CellField>& wv,
                        const Eigen::VectorXd& xiv, Eigen::VectorXd& Rmass,
                        Eigen::VectorXd& Rface) {
        int n_cells_total = 0;
        for (int i = 0; i < n_sub; ++i) n_cells_total += dd.mesh(i).n_cells;
        Rmass.resize(n_cells_total);
        Rface = Eigen::VectorXd::Zero(n);
        int base = 0;
        for (int i = 0; i < n_sub; ++i) {
            const StructuredMesh& m = dd.mesh(i);
            const RockType& rock = (*rocks_)[dd.rock_index(i)];
            const double phiV = rock.porosity() * m.cell_volume;
            for (int k = 0; k < m.n_cells; ++k) {
                const CellOps& o = ops[i][k];
                double div = 0.0;
                for (int a = 0; a < static_cast<int>(o.F.size()); ++a) {
                    div += m.faces[o.F[a]].area * r_cell[i][k](a);
                    const int id = lay.id[i][o.F[a]];
                    if (id >= 0) Rface(id) += r_cell[i][k](a);
                }
                Rmass(base + k) = phiV * (wv[i][k] - s_star[i][k]) / tau + div;
            }
            base += m.n_cells;
        }
        (void)xiv;
    };

    Eigen::VectorXd Rmass, Rface;
    compute_fluxes(w, xi);
    residual(w, xi, Rmass, Rface);
    double rnorm = std::sqrt(Rmass.squaredNorm() + Rface.squaredNorm());
    double floor_scale = 0.0;
    for (int i = 0; i < n_sub; ++i) {
        const RockType& rock = (*rocks_)[dd.rock_index(i)];
        floor_scale = std::max(
            floor_scale, rock.porosity() * dd.mesh(i).cell_volume / tau);
        floor_scale =
            std::max(floor_scale, rock.kirchhoff_alpha(1.0) * rock.permeability() /
                                      dd.mesh(i).h[0]);
    }
    const double target =
        std::max({opt.rtol * rnorm, opt.atol, 1e-13 * floor_scale * std::sqrt(n + 1.0)});

    DiffusionSolution sol;
    int it = 0;
    for (; it < opt.max_iter && rnorm > target; ++it) {
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        int base = 0;
        for (int i = 0; i < n_sub; ++i) {
            const StructuredMesh& m = dd.mesh(i);
            const RockType& rock = (*rocks_)[dd.rock_index(i)];
            const double phiV = rock.porosity() * m.cell_volume;
            auto chain = [&](int f) -> double {
                const Face& fc = m.faces[f];
                if (fc.kind == FaceKind::Interior) return 1.0;
                if (fc.kind == FaceKind::Mortar) {
                    const double th = rock.pc_inverse(xi(lay.id[i][f]));
                    return rock.alpha_prime(th) / rock.pc_derivative(th);
                }
                return 0.0;
            };
            for (int k = 0; k < m.n_cells; ++k) {
                const CellOps& o = ops[i][k];
                const double ap = rock.alpha_prime(w[i][k]);
                const double kacc = phiV / tau + ap * o.d;
                const Eigen::MatrixXd Etil =
                    o.T - (ap / kacc) * o.c * o.c.transpose();
                const int nF = static_cast<int>(o.F.size());
                for (int a = 0; a < nF; ++a) {
                    const int row = lay.id[i][o.F[a]];
                    if (row < 0) continue;
                    for (int b = 0; b < nF; ++b) {
                        const int col = lay.id[i][o.F[b]];
                        if (col < 0) continue;
                        trip.emplace_back(row, col,
                                          Etil(a, b) * m.faces[o.F[b]].area *
                                              chain(o.F[b]));
                    }
                    rhs(row) -= (ap / kacc) * Rmass(base + k) * o.c(a);
                }
            }
            base += m.n_cells;
        }
        for (int q = 0; q < n; ++q) rhs(q) += Rface(q);

        Eigen::SparseMatrix<double> J(n, n);
        J.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(J);
        if (lu.info() != Eigen::Success)
            throw SolverError("monolithic diffusion Jacobian is singular");
        Eigen::VectorXd dxi = lu.solve(rhs);

        // cell increments
        std::vector<CellField> dw(n_sub);
        base = 0;
        for (int i = 0; i < n_sub; ++i) {
            const StructuredMesh& m = dd.mesh(i);
            const RockType& rock = (*rocks_)[dd.rock_index(i)];
            const double phiV = rock.porosity() * m.cell_volume;
            auto chain = [&](int f) -> double {
                const Face& fc = m.faces[f];
                if (fc.kind == FaceKind::Interior) return 1.0;
                if (fc.kind == FaceKind::Mortar) {
                    const double th = rock.pc_inverse(xi(lay.id[i][f]));
                    return rock.alpha_prime(th) / rock.pc_derivative(th);
                }
                return 0.0;
            };
            dw[i].resize(m.n_cells);
            for (int k = 0; k < m.n_cells; ++k) {
                const CellOps& o = ops[i][k];
                const double ap = rock.alpha_prime(w[i][k]);
                const double kacc = phiV / tau + ap * o.d;
                double cD = 0.0;
                for (int a = 0; a < static_cast<int>(o.F.size()); ++a) {
                    const int col = lay.id[i][o.F[a]];
                    if (col >= 0)
                        cD += o.c(a) * m.faces[o.F[a]].area * chain(o.F[a]) *
                              dxi(col);
                }
                dw[i][k] = (cD - Rmass(base + k)) / kacc;
            }
            base += m.n_cells;
        }

        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h) {
            std::vector<CellField> w2 = w;
            for (int i = 0; i < n_sub; ++i)
                for (int k = 0; k < dd.mesh(i).n_cells; ++k)
                    w2[i][k] += step * dw[i][k];
            Eigen::VectorXd xi2 = xi + step * dxi;
            for (int mq = 0; mq < dd.n_mortar(); ++mq)
                xi2(lay.n_interior + mq) = std::min(
                    qhi - 1e-12, std::max(qlo + 1e-12, xi2(lay.n_interior + mq)));
            compute_fluxes(w2, xi2);
            Eigen::VectorXd Rm, Rf;
            residual(w2, xi2, Rm, Rf);
            const double rn = std::sqrt(Rm.squaredNorm() + Rf.squaredNorm());
            if (rn < rnorm || rn <= target) {
                w = std::move(w2);
                xi = xi2;
                Rmass = Rm;
                Rface = Rf;
                rnorm = rn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            throw SolverError("monolithic diffusion Newton stalled at residual " +
                              std::to_string(rnorm));
    }
    if (rnorm > target)
        throw SolverError("monolithic diffusion Newton did not converge");

    compute_fluxes(w, xi);
    sol.newton_iterations = it;
    sol.s_new = w;
    sol.states.resize(n_sub);
    sol.lambda_d = zero_trace(dd);
    for (int mq = 0; mq < dd.n_mortar(); ++mq)
        sol.lambda_d[mq] = xi(lay.n_interior + mq);
    for (int i = 0; i < n_sub; ++i) {
        const StructuredMesh& m = dd.mesh(i);
        const RockType& rock = (*rocks_)[dd.rock_index(i)];
        DarcyState& st = sol.states[i];
        st.pressure.resize(m.n_cells);
        for (int k = 0; k < m.n_cells; ++k)
            st.pressure[k] = rock.kirchhoff_alpha(w[i][k]);
        st.flux.assign(m.faces.size(), 0.0);
        for (int k = 0; k < m.n_cells; ++k) {
            const CellOps& o = ops[i][k];
            for (int a = 0; a < static_cast<int>(o.F.size()); ++a)
                st.flux[o.F[a]] = m.faces[o.F[a]].sign_for(k) * r_cell[i][k](a);
        }
        const auto& slots = dd.subdomain_mortars(i);
        st.mortar_flux.resize(slots.size());
        st.mortar_trace.resize(slots.size());
        for (size_t q = 0; q < slots.size(); ++q) {
            const Face& fc = m.faces[slots[q].second];
            const int k = fc.cell_neg >= 0 ? fc.cell_neg : fc.cell_pos;
            st.mortar_flux[q] = st.flux[slots[q].second] * fc.sign_for(k);
            st.mortar_trace[q] = sol.lambda_d[slots[q].first];
        }
    }
    return sol;
}

} // namespace splitflow
