#include "stoplab/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "stoplab/defaults.hpp"

namespace stoplab {

namespace {

double interp_table(const std::vector<std::pair<double, double>>& knots, double x) {
    const std::size_t n = knots.size();
    if (x <= knots.front().first) {
        const double slope =
            (knots[1].second - knots[0].second) / (knots[1].first - knots[0].first);
        return knots[0].second + slope * (x - knots[0].first);
    }
    if (x >= knots.back().first) {
        const double slope = (knots[n - 1].second - knots[n - 2].second) /
                             (knots[n - 1].first - knots[n - 2].first);
        return knots[n - 1].second + slope * (x - knots[n - 1].first);
    }
    auto it = std::upper_bound(knots.begin(), knots.end(), x,
                               [](double v, const auto& kn) { return v < kn.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (x - lo.first) / (hi.first - lo.first);
    return lo.second + w * (hi.second - lo.second);
}

} // namespace

const char* to_string(RewardKind kind) {
    switch (kind) {
        case RewardKind::affine: return "affine";
        case RewardKind::power_tail: return "power-tail";
        case RewardKind::tabulated: return "piecewise-tabulated";
    }
    return "?";
}

RewardKind reward_kind_from_string(const std::string& s) {
    if (s == "affine") return RewardKind::affine;
    if (s == "power-tail") return RewardKind::power_tail;
    if (s == "piecewise-tabulated") return RewardKind::tabulated;
    throw ValidationError("unknown reward kind: " + s);
}

void RewardSpec::validate() const {
    switch (kind) {
        case RewardKind::affine:
            if (!(k > 0.0)) throw ValidationError("affine reward requires k > 0");
            break;
        case RewardKind::power_tail:
            if (!(gamma > 0.0)) throw ValidationError("power-tail reward requires gamma > 0");
            if (!(k > 0.0)) throw ValidationError("power-tail reward requires k > 0");
            break;
        case RewardKind::tabulated: {
            if (table.size() < 2)
                throw ValidationError("tabulated reward requires at least 2 knots");
            for (std::size_t i = 1; i < table.size(); ++i)
                if (!(table[i].first > table[i - 1].first))
                    throw ValidationError("tabulated reward knots must be strictly increasing in x");
            break;
        }
    }
}

double eval_reward(const RewardSpec& f, double x) {
    f.validate();
    switch (f.kind) {
        case RewardKind::affine:
            return f.k * x + f.b;
        case RewardKind::power_tail: {
            const double u = x - f.m;
            if (u == 0.0) return 0.0;
            return f.k * std::copysign(std::pow(std::abs(u), f.gamma), u);
        }
        case RewardKind::tabulated:
            return interp_table(f.table, x);
    }
    return 0.0;
}

void GameConfig::validate() const {
    reward.validate();
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    if (!(T_max >= dt)) throw ValidationError("T_max must be >= dt");
    if (n_paths < 1) throw ValidationError("n_paths must be >= 1");
}

namespace {

// Exact sign-change point when the reward's structure provides one; otherwise
// located on the grid.
std::optional<double> sign_change_point(const RewardSpec& f, std::span<const double> grid) {
    if (f.kind == RewardKind::affine) return -f.b / f.k;
    if (f.kind == RewardKind::power_tail) return f.m;
    // tabulated: find the crossing of the interpolant between consecutive knots
    const auto& kn = f.table;
    if (kn.front().second >= 0.0) return std::nullopt;
    for (std::size_t i = 1; i < kn.size(); ++i) {
        if (kn[i].second >= 0.0) {
            const double x0 = kn[i - 1].first, y0 = kn[i - 1].second;
            const double x1 = kn[i].first, y1 = kn[i].second;
            if (y1 == y0) return x1;
            return x0 - y0 * (x1 - x0) / (y1 - y0);
        }
    }
    (void)grid;
    return std::nullopt;
}

} // namespace

AssumptionFlags check_assumptions(const RewardSpec& f, std::span<const double> grid) {
    f.validate();
    if (grid.empty()) throw ValidationError("assumption grid must be non-empty");
    std::vector<double> xs(grid.begin(), grid.end());
    std::sort(xs.begin(), xs.end());
    if (!(xs.front() < 0.0 && xs.back() > 0.0))
        throw ValidationError("assumption grid must cover negative and positive values");

    AssumptionFlags flags;

    // A1: f < 0 left of the origin, f >= 0 from the origin on.
    flags.a1 = true;
    for (double x : xs) {
        const double v = eval_reward(f, x);
        if (x < 0.0 && !(v < 0.0)) flags.a1 = false;
        if (x >= 0.0 && v < 0.0) flags.a1 = false;
    }

    // A1': a single sign change at some m.
    const auto m = sign_change_point(f, xs);
    if (m) {
        flags.a1_prime = true;
        for (double x : xs) {
            const double v = eval_reward(f, x);
            if (x < *m && !(v < 0.0)) flags.a1_prime = false;
            if (x >= *m && v < 0.0) flags.a1_prime = false;
        }
        if (flags.a1_prime) flags.m_detected = *m;
    }

    // A2: f(x)/x^gamma stays above a positive floor on the right tail of the
    // grid (top half of the positive range).
    {
        const double x_hi = xs.back();
        double floor_val = std::numeric_limits<double>::infinity();
        int n_tail = 0;
        for (double x : xs) {
            if (x >= 0.5 * x_hi && x > 0.0) {
                floor_val = std::min(floor_val, eval_reward(f, x) / std::pow(x, f.gamma));
                ++n_tail;
            }
        }
        flags.a2 = n_tail > 0 && floor_val > 0.0;
    }

    // A3: f(x) <= k*x + b on the grid, with the majorant (k, b) the reward carries.
    {
        flags.a3 = true;
        for (double x : xs) {
            const double v = eval_reward(f, x);
            const double maj = f.k * x + f.b;
            const double tol = 1e-12 * std::max({1.0, std::abs(v), std::abs(maj)});
            if (v > maj + tol) flags.a3 = false;
        }
    }

    flags.a4 = f.kind == RewardKind::affine && f.b == 0.0;
    flags.a4_prime = f.kind == RewardKind::affine;
    return flags;
}

NormalizeResult normalize(const RewardSpec& f, double x1, double x2) {
    f.validate();
    NormalizeResult out;
    if (f.kind == RewardKind::affine) {
        // A4' route: g(x) = k*x, starts shift by +b/k.
        const double shift = f.b / f.k;
        out.reward = f;
        out.reward.b = 0.0;
        out.shift = shift;
        out.x1 = x1 + shift;
        out.x2 = x2 + shift;
        return out;
    }
    if (f.kind == RewardKind::power_tail) {
        // A1' route: g(x) = f(x + m), starts shift by -m.
        out.reward = f;
        out.reward.m = 0.0;
        out.shift = -f.m;
        out.x1 = x1 - f.m;
        out.x2 = x2 - f.m;
        return out;
    }
    // tabulated: requires a sign change of the interpolant
    const auto m = sign_change_point(f, {});
    if (!m) throw NormalizationError("reward satisfies neither A1' nor A4'; cannot normalize");
    out.reward = f;
    for (auto& kn : out.reward.table) kn.first -= *m;
    out.reward.m = 0.0;
    out.shift = -*m;
    out.x1 = x1 - *m;
    out.x2 = x2 - *m;
    return out;
}

// --- JSON ---

namespace {

void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                  const std::string& path) {
    if (!j.is_object()) throw ConfigError(path.empty() ? "expected object" : path + ": expected object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError(path + "/" + it.key() + ": unknown key");
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(path + "/" + key + ": type mismatch");
    }
}

} // namespace

nlohmann::json reward_to_json(const RewardSpec& f) {
    nlohmann::json j;
    j["kind"] = to_string(f.kind);
    j["k"] = f.k;
    j["b"] = f.b;
    j["gamma"] = f.gamma;
    j["m"] = f.m;
    if (f.kind == RewardKind::tabulated) {
        nlohmann::json t = nlohmann::json::array();
        for (const auto& kn : f.table) t.push_back({kn.first, kn.second});
        j["table"] = t;
    }
    return j;
}

RewardSpec reward_from_json(const nlohmann::json& j, const std::string& path) {
    require_keys(j, {"kind", "k", "b", "gamma", "m", "table"}, path);
    RewardSpec f;
    if (!j.contains("kind")) throw ConfigError(path + "/kind: missing key");
    try {
        f.kind = reward_kind_from_string(j.at("kind").get<std::string>());
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(path + "/kind: type mismatch");
    }
    f.k = get_or(j, "k", 1.0, path);
    f.b = get_or(j, "b", 0.0, path);
    f.gamma = get_or(j, "gamma", 1.0, path);
    f.m = get_or(j, "m", 0.0, path);
    if (j.contains("table")) {
        try {
            for (const auto& row : j.at("table")) {
                if (!row.is_array() || row.size() != 2)
                    throw ConfigError(path + "/table: each knot must be [x, f]");
                f.table.emplace_back(row[0].get<double>(), row[1].get<double>());
            }
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(path + "/table: type mismatch");
        }
    }
    try {
        f.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(path.empty() ? e.what() : path + ": " + e.what());
    }
    return f;
}

nlohmann::json game_to_json(const GameConfig& g) {
    nlohmann::json j;
    j["x1"] = g.x1;
    j["x2"] = g.x2;
    j["reward"] = reward_to_json(g.reward);
    j["T_max"] = g.T_max;
    j["dt"] = g.dt;
    j["n_paths"] = g.n_paths;
    j["seed"] = g.seed;
    return j;
}

GameConfig game_from_json(const nlohmann::json& j, const std::string& path) {
    require_keys(j, {"x1", "x2", "reward", "T_max", "dt", "n_paths", "seed"}, path);
    GameConfig g;
    g.x1 = get_or(j, "x1", 0.0, path);
    g.x2 = get_or(j, "x2", 0.0, path);
    if (j.contains("reward")) g.reward = reward_from_json(j.at("reward"), path + "/reward");
    g.T_max = get_or(j, "T_max", defaults::kTMax, path);
    g.dt = get_or(j, "dt", defaults::kDt, path);
    g.n_paths = get_or<std::int64_t>(j, "n_paths", defaults::kNPaths, path);
    g.seed = get_or<std::uint64_t>(j, "seed", defaults::kSeed, path);
    try {
        g.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(path.empty() ? e.what() : path + ": " + e.what());
    }
    return g;
}

} // namespace stoplab
