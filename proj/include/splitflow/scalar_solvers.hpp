#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "splitflow/errors.hpp"

namespace splitflow {

struct RootResult {
    double x = 0.0;
    double residual = 0.0;
    int evaluations = 0;
};

/// Regula falsi with the Illinois modification on a bracketing interval.
/// Requires f(a)*f(b) <= 0. Stops when |f| <= ftol or the bracket collapses
/// below xtol.
template <class F>
RootResult illinois_root(F&& f, double a, double b, double fa, double fb,
                         double ftol, double xtol = 0.0, int max_iter = 200) {
    RootResult res;
    if (fa == 0.0) return {a, 0.0, 0};
    if (fb == 0.0) return {b, 0.0, 0};
    if (fa * fb > 0.0)
        throw SolverError("illinois_root: endpoints do not bracket a root");
    double wa = 1.0, wb = 1.0;
    double x = a, fx = fa;
    int last_side = 0;
    for (int it = 0; it < max_iter; ++it) {
        const double den = wa * fa - wb * fb;
        x = (den != 0.0) ? (wa * fa * b - wb * fb * a) / den : 0.5 * (a + b);
        if (!(x > std::min(a, b) && x < std::max(a, b))) x = 0.5 * (a + b);
        fx = f(x);
        ++res.evaluations;
        if (std::abs(fx) <= ftol || std::abs(b - a) <= xtol) {
            return {x, fx, res.evaluations};
        }
        if ((fx > 0.0) == (fa > 0.0)) {
            a = x; fa = fx; wa = 1.0;
            if (last_side == 1) wb *= 0.5;
            last_side = 1;
        } else {
            b = x; fb = fx; wb = 1.0;
            if (last_side == 2) wa *= 0.5;
            last_side = 2;
        }
    }
    return {x, fx, res.evaluations};
}

template <class F>
RootResult illinois_root(F&& f, double a, double b, double ftol,
                         double xtol = 0.0, int max_iter = 200) {
    return illinois_root(f, a, b, f(a), f(b), ftol, xtol, max_iter);
}

/// Golden-section search for the extremum of a unimodal function on [a,b].
/// maximize=true looks for the maximum. Returns the abscissa to tolerance xtol.
template <class F>
double golden_section(F&& f, double a, double b, bool maximize,
                      double xtol = 1e-10) {
    const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
    const double sgn = maximize ? 1.0 : -1.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = sgn * f(c), fd = sgn * f(d);
    while (b - a > xtol) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - invphi * (b - a);
            fc = sgn * f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + invphi * (b - a);
            fd = sgn * f(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace splitflow
