#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stoplab/core.hpp"
#include "stoplab/montecarlo.hpp"
#include "stoplab/pathsim.hpp"

namespace stoplab {

enum class LatticeInterp { linear, cubic };

struct LatticeParams {
    double dt = 1e-3;
    double dx = 0.02;
    double T_max = 16.0;
    double x_center = 0.0;
    // half width = width_sigmas * sqrt(T_max) + x_pad; values are clamped to
    // max(c*f, 0) at the edges
    double width_sigmas = 6.0;
    double x_pad = 1.0;
    LatticeInterp interp = LatticeInterp::cubic;
    int max_stored_slices = 65;
    bool allow_narrow = false; // unit tests only
};

// Backward-induction solution of V(t,x) = max(c(t) f(x), E[V(t+dt, x+sqrt(dt)Z)])
// with terminal V(T,x) = max(c(T) f(x), 0). Stop flags mark where the
// immediate term attains the max (ties stop); the boundary is the smallest
// flagged x per slice.
struct Lattice {
    std::vector<double> t_grid;
    std::vector<double> x_grid;
    std::vector<double> boundary; // per time slice; +inf when no stop node
    std::vector<double> v0;       // V(0, x), all x
    std::vector<std::uint8_t> stop0;

    // subsampled slices (always includes t = 0 and t = T_max)
    std::vector<std::size_t> stored_idx;
    std::vector<double> value;           // stored_idx.size() x nx
    std::vector<std::uint8_t> stop_flag; // same layout

    std::int64_t upclosed_violations = 0; // counted online over every slice

    std::size_t nx() const { return x_grid.size(); }
    std::size_t nt() const { return t_grid.size(); }
    double value_at0(double x) const;
    double boundary_at(double t) const;

    // CSV export "t,b"; binary value dump with a small header.
    void write_boundary_csv(std::ostream& os) const;
    void write_values_binary(std::ostream& os) const;
};

Lattice best_response(const SurvivalCurve& c, const RewardSpec& f, const LatticeParams& params);

struct DivergenceReport {
    bool infinite = false;
    std::vector<double> horizons;
    std::vector<double> values; // V(0, x_eval) per horizon
    std::vector<double> ratios;
    double lil_proxy = 0.0; // min over the last decade of c(t) sqrt(t log log t)
    double growth_factor = 0.0;
};

// Classifies the value as finite or infinite from its growth across doubling
// horizons (>= 4 required). Throws NumericalInconsistencyError when the value
// trace is not monotone in the horizon.
DivergenceReport classify_divergence(const std::function<SurvivalCurve(double)>& curve_for_horizon,
                                     const RewardSpec& f, std::span<const double> horizons,
                                     double x_eval, const LatticeParams& base,
                                     double growth_factor);

enum class Verdict { equilibrium_consistent, profitable_deviation_found, infinite_payoff_regime };

const char* to_string(Verdict v);

struct PlayerReport {
    EstimateWithCI j;
    double v = 0.0;   // best-response value from the lattice
    double gap = 0.0; // v - j.mean
    double gap_threshold = 0.0;
    bool divergent = false;
    double best_deviation = 0.0; // best candidate-rule payoff found
    double best_deviation_se = 0.0;
    std::string best_deviation_name;
};

struct EquilibriumReport {
    PlayerReport player1, player2;
    Verdict verdict = Verdict::equilibrium_consistent;
    double significance = 3.0;
    nlohmann::json to_json() const;
};

struct VerifyOptions {
    LatticeParams lattice;
    bool deviation_search = true;
    std::int64_t deviation_n = 0; // 0: config.n_paths
    int threads = 0;
};

// Checks both inequalities of the equilibrium definition: estimates J_i
// directly, computes each best-response value against the opponent's
// estimated survival curve, and searches a small family of deviation rules.
EquilibriumReport verify_equilibrium(const StoppingRule& rule1, const StoppingRule& rule2,
                                     const GameConfig& config, double significance,
                                     const VerifyOptions& opt = {});

// MC estimate of P({x + W_tau < 0} and {c(tau) > 0}): the probability of
// stopping at negative reward while the opponent may still be active.
EstimateWithCI negative_stop_audit(const StoppingRule& rule, const SurvivalCurve& opponent,
                                   double x, std::int64_t n_paths, const McOptions& opt);

} // namespace stoplab
