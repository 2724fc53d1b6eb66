#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include "stoplab/core.hpp"
#include "stoplab/defaults.hpp"
#include "stoplab/pathsim.hpp"

namespace stoplab {

// Tabulated survival law of a stopping time: S(t) = P(tau > t) with explicit
// atoms, linear interpolation between grid points, and the discount value
// c(t) = S(t) + atom_mass(t)/2. Beyond the essential supremum, and at
// tau = infinity, c is 0.
struct SurvivalCurve {
    std::vector<double> t_grid;
    std::vector<double> survival;
    std::vector<double> survival_se;             // empty for exact curves
    std::vector<std::pair<double, double>> atoms; // (t, mass)
    double p_infinite = 0.0;
    double ess_sup = std::numeric_limits<double>::infinity();
    bool horizon_truncated = false;

    double survival_at(double t) const;
    double atom_mass_at(double t) const;
    double c_at(double t) const;
    void validate() const;

    static SurvivalCurve exact_immediate(double horizon);
    static SurvivalCurve exact_deterministic(double t_star, double horizon);
    static SurvivalCurve exact_never(double horizon);
    // Tabulates an exact survival function on the given grid.
    static SurvivalCurve from_function(const std::function<double(double)>& s,
                                       std::vector<double> grid);
    static SurvivalCurve hyperbolic(double b, std::vector<double> grid);

    // CSV: "t,survival,atom_mass,c_value" with a metadata comment line.
    void write_csv(std::ostream& os) const;
    static SurvivalCurve read_csv(std::istream& is);
};

struct EstimateWithCI {
    double mean = 0.0;
    double standard_error = 0.0;
    std::int64_t n = 0;
    bool divergence_flag = false;
    bool truncation_warning = false;
    double horizon = 0.0;
};

struct McOptions {
    double dt = defaults::kDt;
    double T_max = defaults::kTMax;
    std::uint64_t seed = defaults::kSeed;
    int threads = 0; // 0: STOPLAB_THREADS or hardware
    std::uint64_t stream_tag = 0x100;
    double atom_min_mass = defaults::kAtomMinMass;
};

// One stop outcome per replicate, simulated on the rule's substreams.
std::vector<StopOutcome> simulate_outcomes(const StoppingRule& rule, double x,
                                           std::int64_t n_paths, const McOptions& opt);

// Empirical survival curve built from sampled outcomes.
SurvivalCurve survival_from_outcomes(const std::vector<StopOutcome>& outcomes,
                                     std::vector<double> t_grid, double atom_min_mass = 0.01);

// Empirical survival of a rule's stopping time on the grid. Deterministic,
// immediate, never, and hyperbolic-law rules produce exact curves.
SurvivalCurve estimate_survival(const StoppingRule& rule, double x, std::int64_t n_paths,
                                std::vector<double> t_grid, const McOptions& opt);

// E[c(tau) f(x + W_tau)] with censored replicates contributing 0.
EstimateWithCI payoff_reduced(const StoppingRule& rule, double x, const SurvivalCurve& opponent,
                              const RewardSpec& f, std::int64_t n_paths, const McOptions& opt);

// The two-player payoff pair: player i receives f(x_i + W_tau_i) when first,
// half that on a grid-time tie, 0 otherwise. Player streams are independent.
std::pair<EstimateWithCI, EstimateWithCI> payoff_direct(const StoppingRule& rule1,
                                                        const StoppingRule& rule2, double x1,
                                                        double x2, const RewardSpec& f,
                                                        std::int64_t n_pairs,
                                                        const McOptions& opt);

struct ConsistencyReport {
    EstimateWithCI direct1, direct2;
    EstimateWithCI reduced1, reduced2;
    double discrepancy1 = 0.0, discrepancy2 = 0.0; // |direct - reduced|
    double se1 = 0.0, se2 = 0.0;                   // combined SEs
    double se_units1 = 0.0, se_units2 = 0.0;
};

// Runs payoff_direct and both payoff_reduced estimators (each against the
// other rule's estimated curve) on common random numbers and reports the
// discrepancies in SE units.
ConsistencyReport reduction_consistency(const StoppingRule& rule1, const StoppingRule& rule2,
                                        double x1, double x2, const RewardSpec& f,
                                        std::int64_t n, const McOptions& opt);

// Uniform grid {0, step, ..., horizon}.
std::vector<double> uniform_grid(double horizon, double step);
// Log-spaced grid {lo, ..., hi} with n points, 0 prepended.
std::vector<double> log_grid(double lo, double hi, int n);

} // namespace stoplab
