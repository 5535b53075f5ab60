#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "splitflow/errors.hpp"

namespace splitflow {

/// Direction of the capillary pressure curve in the wetting saturation.
///
/// `Decreasing` is the standard Van Genuchten convention (pi positive and
/// decreasing, pi(1)=0); it is the only orientation for which the Kirchhoff
/// transform yields a nonnegative capillary diffusivity. `Increasing` keeps
/// the curve exactly as commonly printed with (1-s) inside, pi(0)=0; it is
/// exposed for curve-level comparisons but rejected by the flow solvers.
enum class CapillaryOrientation { Increasing, Decreasing };

struct VanGenuchtenParams {
    double n_vg = 2.0;       ///< exponent, > 1
    double m_vg = 0.5;       ///< = 1 - 1/n
    double alpha_vg = 1.0;   ///< proportionality factor for the entry pressure
    CapillaryOrientation orientation = CapillaryOrientation::Decreasing;

    static VanGenuchtenParams make(double n, double alpha,
                                   CapillaryOrientation o = CapillaryOrientation::Decreasing);
};

struct FluidParams {
    double rho_w = 0.0;
    double rho_n = 0.0;
    std::array<double, 3> gravity{0.0, 0.0, 0.0};  ///< rho-scaled acceleration vector
};

/// Saturation-dependent coefficient bundle for one rock/fluid pair.
struct Coefficients {
    double f;        ///< fractional flow k_w/(k_w+k_n)
    double f_g;      ///< gravity flux factor K*(k_w k_n/(k_w+k_n))*(rho_w-rho_n)
    double M;        ///< total mobility K*(k_w+k_n)
    double rho_mix;  ///< mobility-weighted density
};

/// Tabulated Kirchhoff transform alpha(s) and global-pressure offset beta(s)
/// on a uniform saturation grid, with piecewise-linear evaluation.
struct ConstitutiveTables {
    std::vector<double> alpha;
    std::vector<double> beta;
    int resolution = 0;
    double ds = 0.0;
};

/// Homogeneous rock: porosity, scalar permeability and Van Genuchten curves.
/// Immutable after construction; safe for concurrent reads.
class RockType {
public:
    /// `entry_pressure_override < 0` keeps the default alpha_vg*sqrt(porosity/K).
    RockType(double porosity, double permeability, VanGenuchtenParams vg,
             double entry_pressure_override = -1.0,
             int table_resolution = 4096, double eps_s = 1e-6);

    double porosity() const { return porosity_; }
    double permeability() const { return permeability_; }
    double entry_pressure() const { return entry_pressure_; }
    double eps_s() const { return eps_s_; }
    const VanGenuchtenParams& vg() const { return vg_; }
    const ConstitutiveTables& tables() const { return tables_; }

    /// Capillary pressure pi(s). Clips s to the admissible range before
    /// evaluating; throws std::domain_error outside [0,1] beyond 1e-12.
    double pc(double s) const;

    /// dpi/ds, clipped to [eps_s, 1-eps_s] where the curve is singular.
    double pc_derivative(double s) const;

    /// Inverse of pc by a bracketed Illinois root search on [eps_s, 1-eps_s].
    /// Out-of-range q clamps to the nearest admissible saturation and sets
    /// `clamped`.
    double pc_inverse(double q, bool* clamped = nullptr,
                      double tol_root = 1e-12) const;

    /// (k_w, k_n) from the Mualem-Van Genuchten relative permeability model.
    std::pair<double, double> rel_perms(double s) const;

    Coefficients coefficients(const FluidParams& fluid, double s) const;

    /// Kirchhoff transform alpha(s); piecewise-linear table lookup, alpha(0)=0.
    double kirchhoff_alpha(double s) const;
    /// Global pressure offset beta(s); beta(1)=0.
    double beta(double s) const;
    /// Analytic d alpha/ds = -(k_w k_n/(k_w+k_n)) * pi'(s).
    double alpha_prime(double s) const;

    /// Admissible capillary pressure range [pc_min, pc_max] on [eps_s, 1-eps_s].
    std::pair<double, double> pc_range() const;

    /// Largest |alpha'| over the saturation interval, sampled on the table grid.
    double alpha_prime_max() const { return alpha_prime_max_; }

    /// True when alpha is nondecreasing, i.e. the capillary diffusivity is
    /// nonnegative and the saturation problem is parabolic.
    bool diffusive() const;

private:
    double integrand_alpha(double s) const;
    double integrand_beta(double s) const;

    double porosity_;
    double permeability_;
    VanGenuchtenParams vg_;
    double entry_pressure_;
    double eps_s_;
    double mobility_floor_ = 1e-12;
    ConstitutiveTables tables_;
    double alpha_prime_max_ = 0.0;
};

/// Location and type of the single interior extremum of a directional
/// advective flux s -> f(s)*un + f_g(s)*gn.
struct FluxExtremum {
    enum class Kind { Maximum, Minimum };
    double xi = 1.0;
    Kind kind = Kind::Maximum;
    bool monotone = false;  ///< extremum sits at an endpoint
};

/// Locates the extremum of f_a(s) = f(s)*un + f_g(s)*gn on [0,1] by coarse
/// sampling plus golden-section refinement (1e-10). Throws SolverError when
/// the sampled flux shows more than one interior extremum.
FluxExtremum flux_extremum(const RockType& rock, const FluidParams& fluid,
                           double un, double gn);

/// Same analysis for an arbitrary flux shape (used with synthetic fluxes).
FluxExtremum flux_extremum_of(const std::function<double(double)>& fa);

} // namespace splitflow
