#pragma once

// Test-side reference computations, kept independent of the library's
// implementation paths they are used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

/// Adaptive Simpson quadrature with absolute tolerance.
inline double simpson_rec(const std::function<double(double)>& f, double a,
                          double b, double fa, double fm, double fb, double whole,
                          double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-12) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

/// Exact Riemann (Godunov) flux: brute-force extremum of the flux function
/// over the state interval, by repeated scan-and-shrink around the best
/// sample (valid for single-extremum profiles).
inline double riemann_flux(const std::function<double(double)>& f, double a,
                           double b, int samples = 101, int levels = 8) {
    const double lo0 = std::min(a, b), hi0 = std::max(a, b);
    const bool want_max = (a > b);
    double lo = lo0, hi = hi0;
    double best_x = lo, best = f(lo);
    for (int lev = 0; lev < levels; ++lev) {
        for (int i = 0; i <= samples; ++i) {
            const double x = lo + (hi - lo) * i / samples;
            const double v = f(x);
            if (want_max ? v > best : v < best) {
                best = v;
                best_x = x;
            }
        }
        const double w = (hi - lo) / samples;
        lo = std::max(lo0, best_x - w);
        hi = std::min(hi0, best_x + w);
        if (hi - lo <= 1e-15) break;
    }
    return best;
}

/// Bisection root finder on a bracket.
inline double bisect(const std::function<double(double)>& f, double a, double b,
                     double xtol = 1e-13) {
    double fa = f(a);
    for (int i = 0; i < 200 && b - a > xtol; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

inline double central_diff(const std::function<double(double)>& f, double x,
                           double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

} // namespace oracle
