#include "stoplab/pathsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace stoplab {

namespace {

constexpr std::uint64_t combine_tag(std::uint64_t stream_tag, std::uint64_t purpose) {
    return (stream_tag << 8) ^ purpose;
}

// exp(-e) below this exponent is under 4e-18; skip the draw entirely.
constexpr double kBridgeSkipExponent = 40.0;

} // namespace

void BoundarySpec::validate() const {
    switch (kind) {
        case BoundaryKind::constant:
            break;
        case BoundaryKind::square_root:
            if (!(a > 0.0)) throw ValidationError("square-root boundary requires a > 0");
            break;
        case BoundaryKind::lil:
            if (!(T >= 3.0)) throw ValidationError("lil boundary requires T >= 3");
            break;
        case BoundaryKind::tabulated:
            if (knots.size() < 2)
                throw ValidationError("tabulated boundary requires at least 2 knots");
            for (std::size_t i = 1; i < knots.size(); ++i)
                if (!(knots[i].first > knots[i - 1].first))
                    throw ValidationError("tabulated boundary knots must be increasing in t");
            break;
    }
}

bool BoundarySpec::active(double t) const {
    switch (kind) {
        case BoundaryKind::constant: return t >= 0.0;
        case BoundaryKind::square_root: return t >= t0;
        case BoundaryKind::lil: return t >= std::max(T, 3.0);
        case BoundaryKind::tabulated:
            return t >= knots.front().first && t <= knots.back().first;
    }
    return false;
}

double BoundarySpec::value(double t) const {
    switch (kind) {
        case BoundaryKind::constant:
            return level;
        case BoundaryKind::square_root:
            if (t < t0) throw DomainError("square-root boundary undefined for t < t0");
            return a * std::sqrt(t - t0 + 1.0);
        case BoundaryKind::lil: {
            if (!active(t)) throw DomainError("lil boundary inactive before max(T, 3)");
            return std::sqrt(t * std::log(std::log(t)));
        }
        case BoundaryKind::tabulated: {
            if (!active(t)) throw DomainError("tabulated boundary undefined outside knot range");
            auto it = std::upper_bound(knots.begin(), knots.end(), t,
                                       [](double v, const auto& kn) { return v < kn.first; });
            if (it == knots.begin()) return knots.front().second;
            if (it == knots.end()) return knots.back().second;
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            const double w = (t - lo.first) / (hi.first - lo.first);
            return lo.second + w * (hi.second - lo.second);
        }
    }
    return 0.0;
}

void StoppingRule::validate() const {
    switch (kind) {
        case RuleKind::immediate:
        case RuleKind::never:
            break;
        case RuleKind::deterministic:
            if (!(t_star >= 0.0)) throw ValidationError("deterministic rule requires t_star >= 0");
            break;
        case RuleKind::hit:
            boundary.validate();
            break;
        case RuleKind::composite_tau_a:
            if (!(a > 0.0)) throw ValidationError("composite rule requires a > 0");
            break;
        case RuleKind::law_sampled:
            if (law_b > 0.0) break;
            if (law_table.size() < 2)
                throw ValidationError("law-sampled rule requires law_b > 0 or a survival table");
            break;
    }
}

StoppingRule make_immediate(double x) {
    StoppingRule r;
    r.kind = RuleKind::immediate;
    r.x = x;
    return r;
}

StoppingRule make_deterministic(double x, double t_star) {
    StoppingRule r;
    r.kind = RuleKind::deterministic;
    r.x = x;
    r.t_star = t_star;
    return r;
}

StoppingRule make_never(double x) {
    StoppingRule r;
    r.kind = RuleKind::never;
    r.x = x;
    return r;
}

StoppingRule make_hit(double x, BoundarySpec boundary, bool bridge) {
    StoppingRule r;
    r.kind = RuleKind::hit;
    r.x = x;
    r.boundary = std::move(boundary);
    r.bridge_correction = bridge;
    return r;
}

StoppingRule make_composite_tau_a(double x, double a, bool bridge) {
    StoppingRule r;
    r.kind = RuleKind::composite_tau_a;
    r.x = x;
    r.a = a;
    r.bridge_correction = bridge;
    return r;
}

StoppingRule make_hyperbolic_law(double x, double b) {
    StoppingRule r;
    r.kind = RuleKind::law_sampled;
    r.x = x;
    r.law_b = b;
    return r;
}

PathSample simulate_path(std::uint64_t master_seed, std::uint64_t seed_id, double dt,
                         double T_max) {
    if (!(dt > 0.0)) throw ValidationError("simulate_path requires dt > 0");
    if (T_max < 0.0) throw ValidationError("simulate_path requires T_max >= 0");
    const auto n = static_cast<std::int64_t>(std::llround(T_max / dt));
    if (n > 200'000'000) throw CapacityError("path grid too large: " + std::to_string(n) + " steps");

    PathSample path;
    path.dt = dt;
    path.T_max = T_max;
    path.master_seed = master_seed;
    path.seed_id = seed_id;
    path.values.resize(static_cast<std::size_t>(n) + 1);
    path.values[0] = 0.0;

    Substream inc(master_seed, combine_tag(0, rng::kTagIncrements), seed_id);
    const double sqrt_dt = std::sqrt(dt);
    double w = 0.0;
    for (std::int64_t k = 1; k <= n; ++k) {
        w += sqrt_dt * inc.normal();
        path.values[static_cast<std::size_t>(k)] = w;
    }
    return path;
}

namespace {

struct BarrierState {
    bool prev_active = false;
    double prev_level = 0.0;   // barrier frozen at the previous grid point
    double prev_signed = 0.0;  // distance to crossing at the previous point
    double prev_t = 0.0;
};

// Checks one grid point against the barrier; returns true with `out` filled
// when the rule stops at or before time t.
//
// `signed_dist` is positive while the path has not crossed.
inline bool barrier_step(const BoundarySpec& bnd, double t, double p, double dt, bool bridge,
                         const Substream& bridge_stream, std::uint64_t bridge_counter,
                         BarrierState& st, StopOutcome& out) {
    const bool act = bnd.active(t);
    if (act) {
        const double lvl = bnd.value(t);
        const double signed_dist = bnd.side == BoundarySide::upper ? lvl - p : p - lvl;

        if (bridge && st.prev_active) {
            // crossing of the frozen barrier inside (prev_t, t)
            const double d1 = st.prev_signed;
            const double d2 = bnd.side == BoundarySide::upper ? st.prev_level - p : p - st.prev_level;
            if (d2 <= 0.0) {
                const double frac = d1 / (d1 - d2 > 0.0 ? d1 - d2 : 1.0);
                out.status = StopOutcome::Status::stopped;
                out.time = st.prev_t + frac * dt;
                out.position = st.prev_level;
                return true;
            }
            const double e = 2.0 * d1 * d2 / dt;
            if (e < kBridgeSkipExponent &&
                bridge_stream.uniform_at(bridge_counter) < std::exp(-e)) {
                out.status = StopOutcome::Status::stopped;
                out.time = st.prev_t + (d1 / (d1 + d2)) * dt;
                out.position = st.prev_level;
                return true;
            }
        }

        if (signed_dist <= 0.0) {
            out.status = StopOutcome::Status::stopped;
            out.time = t;
            out.position = p;
            return true;
        }
        st.prev_active = true;
        st.prev_level = lvl;
        st.prev_signed = signed_dist;
    } else {
        st.prev_active = false;
    }
    st.prev_t = t;
    return false;
}

// Evaluates a rule against W values supplied sequentially by `w_at(k)`.
template <typename Source>
StopOutcome eval_rule(const StoppingRule& rule, Source&& w_at, std::int64_t n_steps, double dt,
                      const Substream& bridge_stream, const Substream& law_stream) {
    rule.validate();
    StopOutcome out;

    switch (rule.kind) {
        case RuleKind::immediate:
            out.status = StopOutcome::Status::stopped;
            out.time = 0.0;
            out.position = rule.x;
            return out;

        case RuleKind::never:
            out.status = StopOutcome::Status::never;
            return out;

        case RuleKind::deterministic: {
            const auto k = static_cast<std::int64_t>(std::llround(rule.t_star / dt));
            if (k > n_steps) return out; // censored
            out.status = StopOutcome::Status::stopped;
            out.time = static_cast<double>(k) * dt;
            out.position = rule.x + w_at(k);
            return out;
        }

        case RuleKind::law_sampled: {
            const double u = law_stream.uniform_at(0);
            double tau;
            if (rule.law_b > 0.0) {
                tau = rule.law_b * u / (1.0 - u);
            } else {
                // invert the tabulated survival: tau = S^{-1}(u)
                const auto& tab = rule.law_table;
                if (u >= tab.front().second) {
                    tau = tab.front().first;
                } else if (u <= tab.back().second) {
                    return out; // beyond the table: censored
                } else {
                    tau = tab.back().first;
                    for (std::size_t i = 1; i < tab.size(); ++i) {
                        if (u >= tab[i].second) {
                            const double s0 = tab[i - 1].second, s1 = tab[i].second;
                            const double t0 = tab[i - 1].first, t1 = tab[i].first;
                            const double w = s0 == s1 ? 1.0 : (s0 - u) / (s0 - s1);
                            tau = t0 + w * (t1 - t0);
                            break;
                        }
                    }
                }
            }
            if (tau > static_cast<double>(n_steps) * dt) return out; // censored
            const auto k = std::min<std::int64_t>(
                n_steps, static_cast<std::int64_t>(std::llround(tau / dt)));
            out.status = StopOutcome::Status::stopped;
            out.time = tau;
            out.position = rule.x + w_at(k);
            return out;
        }

        case RuleKind::hit: {
            BarrierState st;
            for (std::int64_t k = 0; k <= n_steps; ++k) {
                const double t = static_cast<double>(k) * dt;
                const double p = rule.x + w_at(k);
                if (barrier_step(rule.boundary, t, p, dt, rule.bridge_correction, bridge_stream,
                                 static_cast<std::uint64_t>(k), st, out))
                    return out;
            }
            return out; // censored
        }

        case RuleKind::composite_tau_a: {
            // phase 1: hit level 0 from x
            BoundarySpec origin;
            origin.kind = BoundaryKind::constant;
            origin.level = 0.0;
            origin.side = rule.x >= 0.0 ? BoundarySide::lower : BoundarySide::upper;

            BoundarySpec root;
            root.kind = BoundaryKind::square_root;
            root.side = BoundarySide::upper;
            root.a = rule.a;

            bool phase2 = false;
            double sigma = 0.0;
            BarrierState st;
            for (std::int64_t k = 0; k <= n_steps; ++k) {
                const double t = static_cast<double>(k) * dt;
                const double p = rule.x + w_at(k);
                if (!phase2) {
                    StopOutcome hit0;
                    if (barrier_step(origin, t, p, dt, rule.bridge_correction, bridge_stream,
                                     static_cast<std::uint64_t>(k), st, hit0)) {
                        sigma = hit0.time;
                        phase2 = true;
                        root.t0 = sigma;
                        st = BarrierState{};
                        // the boundary clock restarts at sigma; check this grid
                        // point against the square-root barrier as well
                        if (barrier_step(root, t, p, dt, rule.bridge_correction, bridge_stream,
                                         static_cast<std::uint64_t>(k) | (1ull << 62), st, out))
                            return out;
                    }
                } else {
                    if (barrier_step(root, t, p, dt, rule.bridge_correction, bridge_stream,
                                     static_cast<std::uint64_t>(k) | (1ull << 62), st, out))
                        return out;
                }
            }
            return out; // censored
        }
    }
    return out;
}

struct PathSource {
    const std::vector<double>& values;
    double operator()(std::int64_t k) { return values[static_cast<std::size_t>(k)]; }
};

struct StreamSource {
    Substream inc;
    double sqrt_dt;
    double w = 0.0;
    std::int64_t at = 0;

    double operator()(std::int64_t k) {
        while (at < k) {
            w += sqrt_dt * inc.normal();
            ++at;
        }
        return w;
    }
};

} // namespace

StopOutcome first_hitting(const PathSample& path, const BoundarySpec& boundary, double x,
                          bool bridge_correction) {
    boundary.validate();
    StoppingRule r = make_hit(x, boundary, bridge_correction);
    return sample_stop(r, path);
}

StopOutcome sample_stop(const StoppingRule& rule, const PathSample& path) {
    const Substream bridge(path.master_seed, combine_tag(0, rng::kTagBridge), path.seed_id);
    const Substream law(path.master_seed, combine_tag(0, rng::kTagLaw), path.seed_id);
    PathSource src{path.values};
    return eval_rule(rule, src, static_cast<std::int64_t>(path.steps()), path.dt, bridge, law);
}

StopOutcome run_rule(const StoppingRule& rule, std::uint64_t master_seed,
                     std::uint64_t stream_tag, std::uint64_t seed_id, double dt, double T_max) {
    if (!(dt > 0.0)) throw ValidationError("run_rule requires dt > 0");
    const auto n = static_cast<std::int64_t>(std::llround(T_max / dt));
    const Substream bridge(master_seed, combine_tag(stream_tag, rng::kTagBridge), seed_id);
    const Substream law(master_seed, combine_tag(stream_tag, rng::kTagLaw), seed_id);
    StreamSource src{Substream(master_seed, combine_tag(stream_tag, rng::kTagIncrements), seed_id),
                     std::sqrt(dt)};
    return eval_rule(rule, src, n, dt, bridge, law);
}

void write_paths_binary(std::ostream& os, const std::vector<PathSample>& paths) {
    const char magic[4] = {'S', 'P', 'L', 'B'};
    os.write(magic, 4);
    const double dt = paths.empty() ? 0.0 : paths.front().dt;
    const double T_max = paths.empty() ? 0.0 : paths.front().T_max;
    const auto n = static_cast<std::uint64_t>(paths.size());
    os.write(reinterpret_cast<const char*>(&dt), sizeof dt);
    os.write(reinterpret_cast<const char*>(&T_max), sizeof T_max);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    for (const auto& p : paths) {
        os.write(reinterpret_cast<const char*>(&p.master_seed), sizeof p.master_seed);
        os.write(reinterpret_cast<const char*>(&p.seed_id), sizeof p.seed_id);
        os.write(reinterpret_cast<const char*>(p.values.data()),
                 static_cast<std::streamsize>(p.values.size() * sizeof(double)));
    }
}

std::vector<PathSample> read_paths_binary(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SPLB", 4) != 0)
        throw ValidationError("bad path dump header");
    double dt = 0.0, T_max = 0.0;
    std::uint64_t n = 0;
    is.read(reinterpret_cast<char*>(&dt), sizeof dt);
    is.read(reinterpret_cast<char*>(&T_max), sizeof T_max);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    const auto steps = static_cast<std::size_t>(std::llround(T_max / dt));
    std::vector<PathSample> out;
    out.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        PathSample p;
        p.dt = dt;
        p.T_max = T_max;
        is.read(reinterpret_cast<char*>(&p.master_seed), sizeof p.master_seed);
        is.read(reinterpret_cast<char*>(&p.seed_id), sizeof p.seed_id);
        p.values.resize(steps + 1);
        is.read(reinterpret_cast<char*>(p.values.data()),
                static_cast<std::streamsize>(p.values.size() * sizeof(double)));
        if (!is) throw ValidationError("truncated path dump");
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace stoplab
