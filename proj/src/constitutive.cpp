#include "splitflow/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "splitflow/scalar_solvers.hpp"

namespace splitflow {

VanGenuchtenParams VanGenuchtenParams::make(double n, double alpha,
                                            CapillaryOrientation o) {
    if (!(n > 1.0)) throw ConfigError("Van Genuchten exponent n must be > 1");
    if (!(alpha > 0.0)) throw ConfigError("Van Genuchten alpha must be > 0");
    VanGenuchtenParams p;
    p.n_vg = n;
    p.m_vg = 1.0 - 1.0 / n;
    p.alpha_vg = alpha;
    p.orientation = o;
    return p;
}

RockType::RockType(double porosity, double permeability, VanGenuchtenParams vg,
                   double entry_pressure_override, int table_resolution,
                   double eps_s)
    : porosity_(porosity), permeability_(permeability), vg_(vg), eps_s_(eps_s) {
    if (!(porosity > 0.0 && porosity < 1.0))
        throw ConfigError("porosity must lie in (0,1)");
    if (!(permeability > 0.0)) throw ConfigError("permeability must be > 0");
    if (!(vg.n_vg > 1.0) || !(vg.m_vg > 0.0 && vg.m_vg < 1.0) || !(vg.alpha_vg > 0.0))
        throw ConfigError("invalid Van Genuchten parameters");
    if (table_resolution < 2) throw ConfigError("table resolution must be >= 2");
    if (!(eps_s > 0.0 && eps_s < 0.5)) throw ConfigError("eps_s must lie in (0,0.5)");

    entry_pressure_ = entry_pressure_override >= 0.0
                          ? entry_pressure_override
                          : vg.alpha_vg * std::sqrt(porosity / permeability);

    // Cumulative midpoint quadrature: alpha integrates up from 0, beta down
    // from 1, so the exact endpoint values alpha(0)=0, beta(1)=0 hold by
    // construction.
    const int n = table_resolution;
    tables_.resolution = n;
    tables_.ds = 1.0 / (n - 1);
    tables_.alpha.assign(n, 0.0);
    tables_.beta.assign(n, 0.0);
    for (int k = 1; k < n; ++k) {
        const double mid = (k - 0.5) * tables_.ds;
        tables_.alpha[k] = tables_.alpha[k - 1] + tables_.ds * integrand_alpha(mid);
    }
    for (int k = n - 2; k >= 0; --k) {
        const double mid = (k + 0.5) * tables_.ds;
        tables_.beta[k] = tables_.beta[k + 1] - tables_.ds * integrand_beta(mid);
    }
    alpha_prime_max_ = 0.0;
    for (int k = 0; k < n; ++k)
        alpha_prime_max_ = std::max(alpha_prime_max_, std::abs(alpha_prime(k * tables_.ds)));
}

namespace {

inline double clip(double s, double lo, double hi) {
    return std::min(hi, std::max(lo, s));
}

inline void check_saturation_domain(double s) {
    if (s < -1e-12 || s > 1.0 + 1e-12)
        throw std::domain_error("saturation outside [0,1]");
}

} // namespace

double RockType::pc(double s) const {
    check_saturation_domain(s);
    if (vg_.orientation == CapillaryOrientation::Decreasing) {
        if (s >= 1.0) return 0.0;
        const double sc = clip(s, eps_s_, 1.0);
        return entry_pressure_ *
               std::pow(std::pow(sc, -1.0 / vg_.m_vg) - 1.0, 1.0 / vg_.n_vg);
    }
    if (s <= 0.0) return 0.0;
    const double sc = clip(s, 0.0, 1.0 - eps_s_);
    return entry_pressure_ *
           std::pow(std::pow(1.0 - sc, -1.0 / vg_.m_vg) - 1.0, 1.0 / vg_.n_vg);
}

double RockType::pc_derivative(double s) const {
    const double sc = clip(s, eps_s_, 1.0 - eps_s_);
    const double m = vg_.m_vg, n = vg_.n_vg;
    if (vg_.orientation == CapillaryOrientation::Decreasing) {
        const double w = std::pow(sc, -1.0 / m);
        return entry_pressure_ * std::pow(w - 1.0, 1.0 / n - 1.0) *
               (-w / (m * n * sc));
    }
    const double u = 1.0 - sc;
    const double w = std::pow(u, -1.0 / m);
    return entry_pressure_ * std::pow(w - 1.0, 1.0 / n - 1.0) * (w / (m * n * u));
}

double RockType::pc_inverse(double q, bool* clamped, double tol_root) const {
    if (clamped) *clamped = false;
    const double lo = eps_s_, hi = 1.0 - eps_s_;
    double plo = pc(lo), phi = pc(hi);
    // admissible range of pc over [lo,hi], oriented
    double qmin = std::min(plo, phi), qmax = std::max(plo, phi);
    if (q <= qmin || q >= qmax) {
        if (q < qmin - 1e-14 * std::max(1.0, qmin) ||
            q > qmax + 1e-14 * std::max(1.0, qmax)) {
            if (clamped) *clamped = true;
        }
        const bool at_min = (q <= qmin);
        const bool min_at_lo = (plo <= phi);
        return (at_min == min_at_lo) ? lo : hi;
    }
    const double ftol = tol_root * std::max(1.0, std::abs(q));
    auto f = [&](double s) { return pc(s) - q; };
    RootResult r = illinois_root(f, lo, hi, plo - q, phi - q, ftol, 0.0, 500);
    if (std::abs(r.residual) > ftol)
        throw SolverError("pc_inverse: bracketed iteration failed to converge");
    // Newton polish toward machine accuracy; keeps interface solves that
    // compose pc with its inverse consistent to roundoff
    double x = r.x;
    for (int i = 0; i < 2; ++i) {
        const double dp = pc_derivative(x);
        if (dp == 0.0) break;
        const double x2 = x - (pc(x) - q) / dp;
        if (x2 > lo && x2 < hi && std::abs(pc(x2) - q) < std::abs(pc(x) - q))
            x = x2;
    }
    return x;
}

std::pair<double, double> RockType::rel_perms(double s) const {
    check_saturation_domain(s);
    const double sc = clip(s, 0.0, 1.0);
    const double m = vg_.m_vg, n = vg_.n_vg;
    const double sn = std::pow(sc, n);
    const double t = 1.0 - std::pow(1.0 - sn, m);
    const double kw = std::sqrt(sc) * t * t;
    const double kn = (1.0 - sc) * (1.0 - sc) * std::pow(1.0 - sn, 2.0 * m);
    return {clip(kw, 0.0, 1.0), clip(kn, 0.0, 1.0)};
}

Coefficients RockType::coefficients(const FluidParams& fluid, double s) const {
    auto [kw, kn] = rel_perms(s);
    const double sum = kw + kn;
    if (sum < mobility_floor_)
        throw SolverError("mobility sum under floor; degenerate curve pair");
    Coefficients c;
    c.f = kw / sum;
    c.M = permeability_ * sum;
    c.f_g = permeability_ * (kw * kn / sum) * (fluid.rho_w - fluid.rho_n);
    c.rho_mix = (kw * fluid.rho_w + kn * fluid.rho_n) / sum;
    return c;
}

double RockType::integrand_alpha(double s) const {
    auto [kw, kn] = rel_perms(s);
    const double sum = std::max(kw + kn, mobility_floor_);
    return -(kw * kn / sum) * pc_derivative(s);
}

double RockType::integrand_beta(double s) const {
    auto [kw, kn] = rel_perms(s);
    const double sum = std::max(kw + kn, mobility_floor_);
    return (0.5 - kw / sum) * pc_derivative(s);
}

namespace {

double table_eval(const std::vector<double>& tab, double ds, double s) {
    const double sc = clip(s, 0.0, 1.0);
    const double pos = sc / ds;
    int k = std::min(static_cast<int>(pos), static_cast<int>(tab.size()) - 2);
    const double w = pos - k;
    return tab[k] * (1.0 - w) + tab[k + 1] * w;
}

} // namespace

double RockType::kirchhoff_alpha(double s) const {
    check_saturation_domain(s);
    return table_eval(tables_.alpha, tables_.ds, s);
}

double RockType::beta(double s) const {
    check_saturation_domain(s);
    return table_eval(tables_.beta, tables_.ds, s);
}

double RockType::alpha_prime(double s) const {
    const double sc = clip(s, eps_s_, 1.0 - eps_s_);
    return integrand_alpha(sc);
}

std::pair<double, double> RockType::pc_range() const {
    const double a = pc(eps_s_), b = pc(1.0 - eps_s_);
    return {std::min(a, b), std::max(a, b)};
}

bool RockType::diffusive() const {
    return vg_.orientation == CapillaryOrientation::Decreasing;
}

FluxExtremum flux_extremum_of(const std::function<double(double)>& fa) {
    // Coarse scan for interior sign changes of the slope, then refine.
    const int ns = 256;
    double prev = fa(0.0);
    double scale = std::abs(prev);
    std::vector<double> vals(ns + 1);
    vals[0] = prev;
    for (int k = 1; k <= ns; ++k) {
        vals[k] = fa(static_cast<double>(k) / ns);
        scale = std::max(scale, std::abs(vals[k]));
    }
    const double flat = 1e-13 * std::max(1.0, scale);
    int n_extrema = 0;
    int bracket_lo = -1;
    bool is_max = false;
    int slope_prev = 0;
    for (int k = 0; k < ns; ++k) {
        const double d = vals[k + 1] - vals[k];
        const int slope = (d > flat) ? 1 : (d < -flat ? -1 : 0);
        if (slope == 0) continue;
        if (slope_prev != 0 && slope != slope_prev) {
            ++n_extrema;
            bracket_lo = std::max(0, k - 1);
            is_max = (slope_prev > 0);
        }
        slope_prev = slope;
    }
    if (n_extrema > 1)
        throw SolverError("advective flux has multiple interior extrema");

    FluxExtremum ex;
    if (n_extrema == 0) {
        // Monotone (or flat): treat as a one-maximum profile with the peak at
        // the favored endpoint; the Godunov formula then reduces to upwinding.
        ex.monotone = true;
        ex.kind = FluxExtremum::Kind::Maximum;
        ex.xi = (vals[ns] >= vals[0]) ? 1.0 : 0.0;
        return ex;
    }
    const double a = static_cast<double>(bracket_lo) / ns;
    const double b = std::min(1.0, static_cast<double>(bracket_lo + 3) / ns);
    ex.xi = golden_section(fa, a, b, is_max, 1e-10);
    ex.kind = is_max ? FluxExtremum::Kind::Maximum : FluxExtremum::Kind::Minimum;
    return ex;
}

FluxExtremum flux_extremum(const RockType& rock, const FluidParams& fluid,
                           double un, double gn) {
    auto fa = [&](double s) {
        Coefficients c = rock.coefficients(fluid, s);
        return c.f * un + c.f_g * gn;
    };
    return flux_extremum_of(fa);
}

} // namespace splitflow
