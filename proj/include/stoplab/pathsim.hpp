#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "stoplab/errors.hpp"
#include "stoplab/rng.hpp"

namespace stoplab {

enum class BoundaryKind { constant, square_root, lil, tabulated };
enum class BoundarySide { upper, lower };

// Time-dependent barrier.
//   constant:    level l
//   square_root: a * sqrt(t - t0 + 1), defined for t >= t0, a > 0
//   lil:         sqrt(t * log log t), active for t >= max(T, 3)
//   tabulated:   linear interpolation between knots
struct BoundarySpec {
    BoundaryKind kind = BoundaryKind::constant;
    BoundarySide side = BoundarySide::upper;
    double level = 0.0;
    double a = 1.0;
    double t0 = 0.0;
    double T = 3.0;
    std::vector<std::pair<double, double>> knots;

    void validate() const;
    bool active(double t) const;
    double value(double t) const; // requires active(t)
};

enum class RuleKind { immediate, deterministic, hit, composite_tau_a, never, law_sampled };

// A stopping rule bound to a starting position x. Rules are adapted: the
// decision at grid time t depends only on the path up to t.
//
//   immediate:        stop at t = 0
//   deterministic:    stop at t_star (snapped to the grid)
//   hit:              first grid/bridge crossing of `boundary` by x + W
//   composite_tau_a:  first hit of level 0, then first hit of
//                     a*sqrt(s - sigma + 1) with the clock restarted at the
//                     hit time sigma
//   never:            never stops
//   law_sampled:      randomized stop drawn from a survival law, independent
//                     of the path; stands in for an opponent rule known only
//                     through its survival function. law_b > 0 selects the
//                     exact hyperbolic law P(tau > t) = law_b/(law_b + t),
//                     otherwise the tabulated (t, survival) pairs are used.
struct StoppingRule {
    RuleKind kind = RuleKind::immediate;
    double x = 0.0;
    double t_star = 0.0;
    BoundarySpec boundary;
    double a = 1.0;
    bool bridge_correction = true;
    double law_b = 0.0;
    std::vector<std::pair<double, double>> law_table;

    void validate() const;
};

StoppingRule make_immediate(double x);
StoppingRule make_deterministic(double x, double t_star);
StoppingRule make_never(double x);
StoppingRule make_hit(double x, BoundarySpec boundary, bool bridge = true);
StoppingRule make_composite_tau_a(double x, double a, bool bridge = true);
StoppingRule make_hyperbolic_law(double x, double b);

// Uniform-grid Brownian path: values[k] = W at time k*dt, values[0] = 0.
struct PathSample {
    double dt = 0.0;
    double T_max = 0.0;
    std::uint64_t master_seed = 0;
    std::uint64_t seed_id = 0;
    std::vector<double> values;

    double time(std::size_t k) const { return static_cast<double>(k) * dt; }
    std::size_t steps() const { return values.empty() ? 0 : values.size() - 1; }
};

struct StopOutcome {
    enum class Status { stopped, censored, never };
    Status status = Status::censored;
    double time = std::numeric_limits<double>::infinity();
    double position = std::numeric_limits<double>::quiet_NaN();

    bool stopped() const { return status == Status::stopped; }
};

// Bit-identical for identical (master_seed, seed_id, dt, T_max) regardless of
// how many worker threads run. Throws CapacityError for absurd grid sizes.
PathSample simulate_path(std::uint64_t master_seed, std::uint64_t seed_id, double dt,
                         double T_max);

// First grid time where x + W crosses the boundary on its side. With
// bridge_correction, additionally stops between grid points with probability
// exp(-2*d1*d2/dt), the barrier frozen at the step's left endpoint.
StopOutcome first_hitting(const PathSample& path, const BoundarySpec& boundary, double x,
                          bool bridge_correction);

// Evaluates a rule on a materialized path.
StopOutcome sample_stop(const StoppingRule& rule, const PathSample& path);

// Streaming evaluation: generates increments on the fly and stops early.
// Produces the same outcome as sample_stop on simulate_path with the same
// (master_seed, seed_id).
StopOutcome run_rule(const StoppingRule& rule, std::uint64_t master_seed,
                     std::uint64_t stream_tag, std::uint64_t seed_id, double dt, double T_max);

// Regression-test path dump: little-endian doubles, header (dt, T_max, n).
void write_paths_binary(std::ostream& os, const std::vector<PathSample>& paths);
std::vector<PathSample> read_paths_binary(std::istream& is);

} // namespace stoplab
