#include "splitflow/krylov.hpp"

#include <cmath>

namespace splitflow {

namespace {

void axpy(Vec& y, double a, const Vec& x) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void deflate(Vec& v, const InnerProduct& dot, const Vec& ones, double ones_sq) {
    const double c = dot(v, ones) / ones_sq;
    for (auto& vi : v) vi -= c;
}

} // namespace

KrylovResult pcg(const LinearOp& A, const Vec& b, const InnerProduct& dot,
                 const CgOptions& opt, const LinearOp* M, const Vec* x0) {
    const size_t n = b.size();
    KrylovResult res;
    res.x = x0 ? *x0 : Vec(n, 0.0);

    Vec ones(n, 1.0);
    const double ones_sq = opt.deflate_constants ? dot(ones, ones) : 1.0;

    Vec r = b;
    if (x0) {
        Vec Ax = A(res.x);
        for (size_t i = 0; i < n; ++i) r[i] -= Ax[i];
    }
    if (opt.deflate_constants) deflate(r, dot, ones, ones_sq);

    Vec bd = b;
    if (opt.deflate_constants) deflate(bd, dot, ones, ones_sq);
    const double bnorm = std::sqrt(dot(bd, bd));
    if (bnorm == 0.0) {
        res.converged = true;
        res.residual = 0.0;
        if (!x0) res.x.assign(n, 0.0);
        return res;
    }

    auto precond = [&](const Vec& v) {
        Vec z = M ? (*M)(v) : v;
        if (opt.deflate_constants) deflate(z, dot, ones, ones_sq);
        return z;
    };

    Vec z = precond(r);
    Vec p = z;
    double rz = dot(r, z);
    double rnorm = std::sqrt(dot(r, r));
    res.history.push_back(rnorm / bnorm);

    for (int it = 0; it < opt.max_iter; ++it) {
        if (rnorm / bnorm <= opt.tol) {
            res.converged = true;
            break;
        }
        Vec Ap = A(p);
        if (opt.deflate_constants) deflate(Ap, dot, ones, ones_sq);
        const double pAp = dot(p, Ap);
        if (pAp <= 0.0) break;  // loss of positivity: return best iterate
        const double alpha = rz / pAp;
        axpy(res.x, alpha, p);
        axpy(r, -alpha, Ap);
        if (opt.deflate_constants) deflate(r, dot, ones, ones_sq);
        ++res.iterations;
        rnorm = std::sqrt(dot(r, r));
        res.history.push_back(rnorm / bnorm);
        Vec z_new = precond(r);
        const double rz_new = dot(r, z_new);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (size_t i = 0; i < n; ++i) p[i] = z_new[i] + beta * p[i];
    }
    res.residual = rnorm / bnorm;
    res.converged = res.converged || res.residual <= opt.tol;
    return res;
}

KrylovResult gmres(const LinearOp& A, const Vec& b, const InnerProduct& dot,
                   const GmresOptions& opt, const LinearOp* M, const Vec* x0) {
    const size_t n = b.size();
    KrylovResult res;
    res.x = x0 ? *x0 : Vec(n, 0.0);

    auto apply_M = [&](Vec v) { return M ? (*M)(v) : v; };

    Vec Mb = apply_M(b);
    const double bnorm = std::sqrt(dot(Mb, Mb));
    if (bnorm == 0.0) {
        res.converged = true;
        if (!x0) res.x.assign(n, 0.0);
        return res;
    }

    const int m = std::min<int>(opt.restart, static_cast<int>(n));
    while (res.iterations < opt.max_iter) {
        // (preconditioned) residual
        Vec r = b;
        Vec Ax = A(res.x);
        for (size_t i = 0; i < n; ++i) r[i] -= Ax[i];
        r = apply_M(std::move(r));
        double beta = std::sqrt(dot(r, r));
        res.residual = beta / bnorm;
        res.history.push_back(res.residual);
        if (res.residual <= opt.tol) {
            res.converged = true;
            return res;
        }

        std::vector<Vec> V;
        V.push_back(r);
        for (auto& vi : V[0]) vi /= beta;
        // Hessenberg factors updated by Givens rotations
        std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
        std::vector<double> cs(m, 0.0), sn(m, 0.0), g(m + 1, 0.0);
        g[0] = beta;
        int k = 0;
        for (; k < m && res.iterations < opt.max_iter; ++k) {
            Vec w = apply_M(A(V[k]));
            for (int j = 0; j <= k; ++j) {
                H[j][k] = dot(w, V[j]);
                axpy(w, -H[j][k], V[j]);
            }
            H[k + 1][k] = std::sqrt(dot(w, w));
            if (H[k + 1][k] > 0.0)
                for (auto& wi : w) wi /= H[k + 1][k];
            V.push_back(std::move(w));
            for (int j = 0; j < k; ++j) {
                const double t = cs[j] * H[j][k] + sn[j] * H[j + 1][k];
                H[j + 1][k] = -sn[j] * H[j][k] + cs[j] * H[j + 1][k];
                H[j][k] = t;
            }
            const double denom = std::hypot(H[k][k], H[k + 1][k]);
            cs[k] = denom == 0.0 ? 1.0 : H[k][k] / denom;
            sn[k] = denom == 0.0 ? 0.0 : H[k + 1][k] / denom;
            H[k][k] = denom;
            H[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            ++res.iterations;
            res.residual = std::abs(g[k + 1]) / bnorm;
            res.history.push_back(res.residual);
            if (res.residual <= opt.tol) {
                ++k;
                break;
            }
        }
        // back-substitution for the Krylov coefficients
        std::vector<double> y(k, 0.0);
        for (int i = k - 1; i >= 0; --i) {
            double s = g[i];
            for (int j = i + 1; j < k; ++j) s -= H[i][j] * y[j];
            y[i] = (H[i][i] != 0.0) ? s / H[i][i] : 0.0;
        }
        for (int i = 0; i < k; ++i) axpy(res.x, y[i], V[i]);
        if (res.residual <= opt.tol) {
            res.converged = true;
            return res;
        }
        if (k == 0) break;  // stagnation
    }
    return res;
}

} // namespace splitflow
