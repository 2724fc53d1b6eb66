#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stoplab/defaults.hpp"
#include "stoplab/errors.hpp"

namespace stoplab {

enum class RewardKind { affine, power_tail, tabulated };

const char* to_string(RewardKind kind);
RewardKind reward_kind_from_string(const std::string& s);

// Reward function f. All core types are immutable after construction and safe
// to share across threads.
//
//   affine:     f(x) = k*x + b                      (k > 0)
//   power_tail: f(x) = k*sign(x-m)*|x-m|^gamma       (k > 0, gamma > 0)
//   tabulated:  linear interpolation between knots, affine extrapolation
//               with the end-segment slopes outside the knot range
struct RewardSpec {
    RewardKind kind = RewardKind::affine;
    double k = 1.0;
    double b = 0.0;
    double gamma = 1.0;
    double m = 0.0;
    std::vector<std::pair<double, double>> table;

    void validate() const; // throws ValidationError
};

double eval_reward(const RewardSpec& f, double x);

struct GameConfig {
    double x1 = 0.0;
    double x2 = 0.0;
    RewardSpec reward;
    double T_max = defaults::kTMax;
    double dt = defaults::kDt;
    std::int64_t n_paths = defaults::kNPaths;
    std::uint64_t seed = defaults::kSeed;

    void validate() const; // throws ValidationError
};

struct AssumptionFlags {
    bool a1 = false;
    bool a2 = false;
    bool a3 = false;
    bool a4 = false;
    bool a1_prime = false;
    bool a4_prime = false;
    // Sign-change point backing a1_prime; meaningful only when a1_prime holds.
    double m_detected = 0.0;
};

// Grid-limited check: refutes assumptions on the sample grid, cannot prove
// them. The grid must contain both negative and positive points.
AssumptionFlags check_assumptions(const RewardSpec& f, std::span<const double> grid);

struct NormalizeResult {
    RewardSpec reward;
    double x1 = 0.0;
    double x2 = 0.0;
    double shift = 0.0; // applied to starting positions
};

// Shifts the reward so its sign change sits at the origin. Affine rewards map
// to f(x) = k*x with starts x_i + b/k; sign-changing rewards map to
// g(x) = f(x + m) with starts x_i - m. Game payoffs are invariant under this.
NormalizeResult normalize(const RewardSpec& f, double x1, double x2);

// JSON (de)serialization; field names follow the struct members. Parsing is
// strict: unknown keys raise ConfigError with a JSON-pointer path.
nlohmann::json reward_to_json(const RewardSpec& f);
RewardSpec reward_from_json(const nlohmann::json& j, const std::string& path = "");
nlohmann::json game_to_json(const GameConfig& g);
GameConfig game_from_json(const nlohmann::json& j, const std::string& path = "");

} // namespace stoplab
