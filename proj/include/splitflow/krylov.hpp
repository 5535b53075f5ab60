#pragma once

#include <functional>
#include <vector>

namespace splitflow {

using Vec = std::vector<double>;
using LinearOp = std::function<Vec(const Vec&)>;
/// Weighted inner product defining the norm the solvers work in.
using InnerProduct = std::function<double(const Vec&, const Vec&)>;

struct KrylovResult {
    Vec x;
    int iterations = 0;
    double residual = 0.0;            ///< final relative residual
    std::vector<double> history;      ///< residual norm per iteration
    bool converged = false;
};

struct CgOptions {
    double tol = 1e-6;       ///< relative residual tolerance
    int max_iter = 500;
    bool deflate_constants = false;  ///< work orthogonal to the constant vector
};

/// Preconditioned conjugate gradients on a symmetric positive (semi)definite
/// operator. With `deflate_constants` the residual and preconditioned residual
/// are projected orthogonal to constants in the given inner product, which
/// handles the pure-Neumann nullspace.
KrylovResult pcg(const LinearOp& A, const Vec& b, const InnerProduct& dot,
                 const CgOptions& opt, const LinearOp* M = nullptr,
                 const Vec* x0 = nullptr);

struct GmresOptions {
    double tol = 1e-3;   ///< relative residual tolerance
    int max_iter = 200;  ///< total iteration budget across restarts
    int restart = 30;
};

/// Restarted GMRes, optionally left-preconditioned (pass M ~ P^{-1}).
KrylovResult gmres(const LinearOp& A, const Vec& b, const InnerProduct& dot,
                   const GmresOptions& opt, const LinearOp* M = nullptr,
                   const Vec* x0 = nullptr);

} // namespace splitflow
