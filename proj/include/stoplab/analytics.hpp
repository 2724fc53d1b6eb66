#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "stoplab/errors.hpp"

namespace stoplab {

// Standard Gaussian CDF/pdf. erfc-based; |error| < 1e-15.
double norm_cdf(double x);
double norm_pdf(double x);

// P(sigma > t) for sigma = first time x + W hits 0, by the reflection
// principle: 2*Phi(|x|/sqrt(t)) - 1. Throws DomainError for t < 0; t = 0
// returns 1 for x != 0 and 0 for x = 0.
double hitting_tail(double x, double t);

// Companion lower bound |x| / sqrt(pi*t); valid for t >= x^2.
double hitting_tail_lower_bound(double x, double t);

// F(alpha) = alpha - (1 - alpha^2) * I(alpha) with
// I(alpha) = integral_0^inf exp(lambda*alpha - lambda^2/2) dlambda.
// The quadrature route evaluates I by adaptive Simpson; the closed form uses
// the Gaussian Mills ratio I(alpha) = sqrt(2*pi) * exp(alpha^2/2) * Phi(alpha).
double shepp_F(double alpha);
double shepp_F_closed_form(double alpha);

// Unique real root of F in (0, 1), |F(root)| < tolerance. Bracketing
// bisection over the quadrature route. Throws PrecisionError when the
// tolerance is below achievable quadrature accuracy.
double shepp_alpha(double tolerance);

// sqrt(2/pi) * |mean(sample)|: the asserted floor for liminf P(tau > t)sqrt(t)
// when the sample holds stopped values x + W_tau.
double novikov_floor(std::span<const double> stopped_values);

struct TailEstimate {
    std::vector<double> t_grid;
    std::vector<double> survival;
    std::vector<double> survival_se;
    double exponent = 0.0;
    double residual = 0.0;
    double fit_t_lo = 0.0;
    double fit_t_hi = 0.0;
    std::size_t n_fit_points = 0;
    std::int64_t tail_survivors = 0;
    bool unreliable_fit = false;
};

// Simulates tau_a = inf{t : W_t >= a*sqrt(t+1)} from the origin on a grid
// uniform in s = log(1+t) (step ds), the natural scale for the square-root
// barrier. Returns one stop time per replicate (+inf when censored at t_max);
// when `positions` is given it receives W at the stop (NaN when censored).
std::vector<double> sample_sqrt_rule(double a, std::int64_t n_paths, double t_max, double ds,
                                     std::uint64_t seed, std::uint64_t stream_tag, int threads,
                                     std::vector<double>* positions = nullptr);

// Empirical tail exponent of tau_a: the -slope of log survival against log t
// over the last decade of the grid, by least squares.
TailEstimate breiman_exponent(double a, std::int64_t n_paths, std::span<const double> t_grid,
                              std::uint64_t seed, double ds = 2e-3, int threads = 0);

// Increasing path events for the FKG check. All are increasing in the
// increment partial order by construction.
struct PathEvent {
    enum class Kind { terminal_above, upper_hit_by, lower_survives };
    Kind kind = Kind::terminal_above;
    double level = 0.0; // terminal_above: W_T > level
    double slope = 0.0; // upper_hit_by: exists t <= T with W_t >= level + slope*t
    double y = 0.0;     // lower_survives: W_t > y for all grid t < T
    double T = 1.0;

    const char* name() const;
};

PathEvent event_terminal_above(double level, double T);
PathEvent event_upper_hit_by(double level, double slope, double T);
PathEvent event_lower_survives(double y, double T);

struct FkgResult {
    std::int64_t n = 0;
    double p_a = 0.0, p_b = 0.0, p_joint = 0.0, p_product = 0.0;
    double se_a = 0.0, se_b = 0.0, se_joint = 0.0;
    // standard error of p_joint - p_product (delta method, independence-free
    // upper bound)
    double se_gap = 0.0;
};

FkgResult fkg_check(const PathEvent& a, const PathEvent& b, std::int64_t n_paths,
                    std::uint64_t seed, double dt, int threads = 0);

// Adaptive Simpson quadrature on [lo, hi].
double integrate(const std::function<double(double)>& f, double lo, double hi, double tol);

} // namespace stoplab
