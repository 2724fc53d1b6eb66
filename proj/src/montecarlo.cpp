#include "stoplab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "stoplab/defaults.hpp"
#include "stoplab/parallel.hpp"

namespace stoplab {

namespace {

constexpr double kAtomTimeTol = 1e-9;

void format_double(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

} // namespace

double SurvivalCurve::survival_at(double t) const {
    if (t <= t_grid.front()) return survival.front();
    if (t >= t_grid.back()) {
        if (t <= t_grid.back() * (1.0 + 1e-12) + 1e-15) return survival.back();
        return horizon_truncated ? 0.0 : p_infinite;
    }
    const auto it = std::upper_bound(t_grid.begin(), t_grid.end(), t);
    const auto hi = static_cast<std::size_t>(it - t_grid.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - t_grid[lo]) / (t_grid[hi] - t_grid[lo]);
    return survival[lo] + w * (survival[hi] - survival[lo]);
}

double SurvivalCurve::atom_mass_at(double t) const {
    for (const auto& [at, mass] : atoms)
        if (std::abs(t - at) <= kAtomTimeTol * std::max(1.0, std::abs(at))) return mass;
    return 0.0;
}

double SurvivalCurve::c_at(double t) const {
    if (std::isinf(t)) return 0.0;
    if (t > ess_sup + kAtomTimeTol * std::max(1.0, std::abs(ess_sup))) return 0.0;
    return survival_at(t) + 0.5 * atom_mass_at(t);
}

void SurvivalCurve::validate() const {
    if (t_grid.empty() || t_grid.size() != survival.size())
        throw ValidationError("survival curve: grid/survival size mismatch");
    if (t_grid.front() != 0.0) throw ValidationError("survival curve: grid must start at 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > t_grid[i - 1]))
            throw ValidationError("survival curve: grid must be strictly increasing");
        if (survival[i] > survival[i - 1] + 1e-12)
            throw ValidationError("survival curve: survival must be non-increasing");
    }
    for (std::size_t i = 0; i < survival.size(); ++i) {
        if (survival[i] < -1e-15 || survival[i] > 1.0 + 1e-15)
            throw ValidationError("survival curve: values outside [0,1]");
        if (survival[i] < p_infinite - 1e-9)
            throw ValidationError("survival curve: survival below p_infinite");
    }
    double atom_total = 0.0;
    for (const auto& [t, mass] : atoms) {
        if (mass < 0.0 || mass > 1.0 + 1e-15)
            throw ValidationError("survival curve: atom mass outside [0,1]");
        atom_total += mass;
        const double c = survival_at(t) + 0.5 * mass;
        if (c < -1e-12 || c > 1.0 + 1e-12)
            throw ValidationError("survival curve: c(t) outside [0,1]");
    }
    if (atom_total + p_infinite > 1.0 + 1e-9)
        throw ValidationError("survival curve: masses exceed 1");
}

SurvivalCurve SurvivalCurve::exact_immediate(double horizon) {
    SurvivalCurve c;
    c.t_grid = {0.0, std::max(horizon, 1.0)};
    c.survival = {0.0, 0.0};
    c.atoms = {{0.0, 1.0}};
    c.ess_sup = 0.0;
    return c;
}

SurvivalCurve SurvivalCurve::exact_deterministic(double t_star, double horizon) {
    if (t_star <= 0.0) return exact_immediate(horizon);
    SurvivalCurve c;
    const double t_minus = t_star * (1.0 - 1e-12);
    c.t_grid = {0.0, t_minus, t_star};
    c.survival = {1.0, 1.0, 0.0};
    if (horizon > t_star) {
        c.t_grid.push_back(horizon);
        c.survival.push_back(0.0);
    }
    c.atoms = {{t_star, 1.0}};
    c.ess_sup = t_star;
    return c;
}

SurvivalCurve SurvivalCurve::exact_never(double horizon) {
    SurvivalCurve c;
    c.t_grid = {0.0, std::max(horizon, 1.0)};
    c.survival = {1.0, 1.0};
    c.p_infinite = 1.0;
    return c;
}

SurvivalCurve SurvivalCurve::from_function(const std::function<double(double)>& s,
                                           std::vector<double> grid) {
    SurvivalCurve c;
    c.t_grid = std::move(grid);
    c.survival.reserve(c.t_grid.size());
    for (double t : c.t_grid) c.survival.push_back(s(t));
    c.validate();
    return c;
}

SurvivalCurve SurvivalCurve::hyperbolic(double b, std::vector<double> grid) {
    if (!(b > 0.0)) throw ValidationError("hyperbolic survival requires b > 0");
    return from_function([b](double t) { return b / (b + t); }, std::move(grid));
}

void SurvivalCurve::write_csv(std::ostream& os) const {
    os << "# stoplab survival-curve v1 p_infinite=";
    format_double(os, p_infinite);
    os << " ess_sup=";
    format_double(os, ess_sup);
    os << " truncated=" << (horizon_truncated ? 1 : 0) << "\n";
    os << "t,survival,atom_mass,c_value\n";
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        format_double(os, t_grid[i]);
        os << ',';
        format_double(os, survival[i]);
        os << ',';
        format_double(os, atom_mass_at(t_grid[i]));
        os << ',';
        format_double(os, c_at(t_grid[i]));
        os << '\n';
    }
}

SurvivalCurve SurvivalCurve::read_csv(std::istream& is) {
    SurvivalCurve c;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line);
            std::string tok;
            while (meta >> tok) {
                if (tok.rfind("p_infinite=", 0) == 0) c.p_infinite = std::stod(tok.substr(11));
                if (tok.rfind("ess_sup=", 0) == 0) c.ess_sup = std::stod(tok.substr(8));
                if (tok.rfind("truncated=", 0) == 0)
                    c.horizon_truncated = tok.substr(10) != "0";
            }
            continue;
        }
        if (!have_header) {
            if (line.rfind("t,", 0) != 0) throw ValidationError("survival CSV: missing header row");
            have_header = true;
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        double vals[4];
        for (int i = 0; i < 4; ++i) {
            if (!std::getline(row, cell, ',')) throw ValidationError("survival CSV: short row");
            vals[i] = std::stod(cell);
        }
        c.t_grid.push_back(vals[0]);
        c.survival.push_back(vals[1]);
        if (vals[2] > 0.0) c.atoms.emplace_back(vals[0], vals[2]);
    }
    c.validate();
    return c;
}

std::vector<double> uniform_grid(double horizon, double step) {
    const auto n = static_cast<std::size_t>(std::llround(horizon / step));
    std::vector<double> g(n + 1);
    for (std::size_t i = 0; i <= n; ++i) g[i] = step * static_cast<double>(i);
    return g;
}

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g;
    g.push_back(0.0);
    const double ratio = std::log(hi / lo) / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) g.push_back(lo * std::exp(ratio * static_cast<double>(i)));
    return g;
}

std::vector<StopOutcome> simulate_outcomes(const StoppingRule& rule, double x,
                                           std::int64_t n_paths, const McOptions& opt) {
    rule.validate();
    StoppingRule bound = rule;
    bound.x = x;
    std::vector<StopOutcome> out(static_cast<std::size_t>(n_paths));
    const int threads = resolve_thread_count(opt.threads);
    for_each_block(n_paths, 4096, threads, [&](std::int64_t lo, std::int64_t hi, std::int64_t) {
        for (std::int64_t r = lo; r < hi; ++r)
            out[static_cast<std::size_t>(r)] = run_rule(
                bound, opt.seed, opt.stream_tag, static_cast<std::uint64_t>(r), opt.dt, opt.T_max);
    });
    return out;
}

SurvivalCurve survival_from_outcomes(const std::vector<StopOutcome>& outcomes,
                                     std::vector<double> t_grid, double atom_min_mass) {
    const std::size_t g_count = t_grid.size();
    std::vector<std::int64_t> stop_hist(g_count + 1, 0);
    std::map<double, std::int64_t> exact_times;
    std::int64_t censored = 0, never = 0;
    double max_stop = 0.0;
    for (const StopOutcome& o : outcomes) {
        if (o.status == StopOutcome::Status::stopped) {
            const auto it = std::lower_bound(t_grid.begin(), t_grid.end(), o.time);
            stop_hist[static_cast<std::size_t>(it - t_grid.begin())] += 1;
            exact_times[o.time] += 1;
            max_stop = std::max(max_stop, o.time);
        } else if (o.status == StopOutcome::Status::censored) {
            ++censored;
        } else {
            ++never;
        }
    }

    SurvivalCurve curve;
    curve.t_grid = std::move(t_grid);
    curve.survival.resize(g_count);
    curve.survival_se.resize(g_count);
    const double n = static_cast<double>(outcomes.size());
    std::int64_t stopped_so_far = 0;
    for (std::size_t g = 0; g < g_count; ++g) {
        stopped_so_far += stop_hist[g];
        const double p = 1.0 - static_cast<double>(stopped_so_far) / n;
        curve.survival[g] = p;
        curve.survival_se[g] = std::sqrt(std::max(0.0, p * (1.0 - p)) / n);
    }
    const auto atom_threshold =
        std::max<std::int64_t>(2, static_cast<std::int64_t>(std::ceil(atom_min_mass * n)));
    for (const auto& [t, cnt] : exact_times)
        if (cnt >= atom_threshold) curve.atoms.emplace_back(t, static_cast<double>(cnt) / n);
    curve.p_infinite = static_cast<double>(never) / n;
    curve.horizon_truncated = censored > 0;
    if (curve.horizon_truncated || curve.p_infinite > 0.0)
        curve.ess_sup = std::numeric_limits<double>::infinity();
    else
        curve.ess_sup = max_stop;
    return curve;
}

SurvivalCurve estimate_survival(const StoppingRule& rule, double x, std::int64_t n_paths,
                                std::vector<double> t_grid, const McOptions& opt) {
    rule.validate();
    if (t_grid.size() < 2 || t_grid.front() != 0.0)
        throw ValidationError("estimate_survival: grid must start at 0 with >= 2 points");
    if (t_grid.back() < opt.T_max * (1.0 - 1e-12))
        throw ValidationError("estimate_survival: grid must cover [0, T_max]");

    // rules with known laws produce exact curves
    switch (rule.kind) {
        case RuleKind::immediate:
            return SurvivalCurve::exact_immediate(t_grid.back());
        case RuleKind::deterministic: {
            if (rule.t_star <= opt.T_max) {
                return SurvivalCurve::exact_deterministic(rule.t_star, t_grid.back());
            }
            auto c = SurvivalCurve::exact_never(t_grid.back());
            c.p_infinite = 0.0;
            c.horizon_truncated = true;
            return c;
        }
        case RuleKind::never:
            return SurvivalCurve::exact_never(t_grid.back());
        case RuleKind::law_sampled:
            if (rule.law_b > 0.0) {
                auto c = SurvivalCurve::hyperbolic(rule.law_b, t_grid);
                c.horizon_truncated = true; // mass remains beyond any grid
                return c;
            }
            break;
        default:
            break;
    }

    return survival_from_outcomes(simulate_outcomes(rule, x, n_paths, opt), std::move(t_grid),
                                  opt.atom_min_mass);
}

EstimateWithCI payoff_reduced(const StoppingRule& rule, double x, const SurvivalCurve& opponent,
                              const RewardSpec& f, std::int64_t n_paths, const McOptions& opt) {
    rule.validate();
    f.validate();
    EstimateWithCI est;
    est.horizon = opt.T_max;

    if (rule.kind == RuleKind::immediate) {
        est.mean = opponent.c_at(0.0) * eval_reward(f, x);
        est.standard_error = 0.0;
        est.n = n_paths;
        return est;
    }

    StoppingRule bound = rule;
    bound.x = x;

    if (opponent.ess_sup <= 0.0) {
        // the opponent is gone after time zero; only a time-zero stop collects,
        // and the time-zero decision of an adapted rule is deterministic
        const StopOutcome probe = run_rule(bound, opt.seed, opt.stream_tag, 0, opt.dt, opt.T_max);
        est.mean = probe.stopped() && probe.time == 0.0 ? opponent.c_at(0.0) * eval_reward(f, x)
                                                        : 0.0;
        est.n = n_paths;
        return est;
    }
    const int threads = resolve_thread_count(opt.threads);
    const std::int64_t block = 4096;
    const std::int64_t nblocks = block_count(n_paths, block);
    MeanAccumulator acc(nblocks);
    std::vector<std::uint8_t> block_warn(static_cast<std::size_t>(nblocks), 0);

    const double grid_end = opponent.t_grid.back();
    for_each_block(n_paths, block, threads, [&](std::int64_t lo, std::int64_t hi, std::int64_t bi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const StopOutcome o =
                run_rule(bound, opt.seed, opt.stream_tag, static_cast<std::uint64_t>(r), opt.dt,
                         opt.T_max);
            double v = 0.0;
            if (o.status == StopOutcome::Status::stopped) {
                if (o.time > grid_end * (1.0 + 1e-12) && opponent.horizon_truncated)
                    block_warn[static_cast<std::size_t>(bi)] = 1;
                v = opponent.c_at(o.time) * eval_reward(f, o.position);
            }
            acc.add(bi, v);
        }
    });
    acc.n = n_paths;
    est.mean = acc.mean();
    est.standard_error = acc.standard_error();
    est.n = n_paths;
    for (auto w : block_warn) est.truncation_warning |= w != 0;
    return est;
}

std::pair<EstimateWithCI, EstimateWithCI> payoff_direct(const StoppingRule& rule1,
                                                        const StoppingRule& rule2, double x1,
                                                        double x2, const RewardSpec& f,
                                                        std::int64_t n_pairs,
                                                        const McOptions& opt) {
    rule1.validate();
    rule2.validate();
    f.validate();
    StoppingRule r1 = rule1, r2 = rule2;
    r1.x = x1;
    r2.x = x2;

    const int threads = resolve_thread_count(opt.threads);
    const std::int64_t block = 4096;
    const std::int64_t nblocks = block_count(n_pairs, block);
    MeanAccumulator acc1(nblocks), acc2(nblocks);

    for_each_block(n_pairs, block, threads, [&](std::int64_t lo, std::int64_t hi, std::int64_t bi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const auto rep = static_cast<std::uint64_t>(r);
            const StopOutcome o1 = run_rule(r1, opt.seed, rng::kTagPlayer1, rep, opt.dt, opt.T_max);
            const StopOutcome o2 = run_rule(r2, opt.seed, rng::kTagPlayer2, rep, opt.dt, opt.T_max);
            double p1 = 0.0, p2 = 0.0;
            const bool s1 = o1.status == StopOutcome::Status::stopped;
            const bool s2 = o2.status == StopOutcome::Status::stopped;
            if (s1 && s2) {
                if (o1.time < o2.time) {
                    p1 = eval_reward(f, o1.position);
                } else if (o2.time < o1.time) {
                    p2 = eval_reward(f, o2.position);
                } else {
                    p1 = 0.5 * eval_reward(f, o1.position);
                    p2 = 0.5 * eval_reward(f, o2.position);
                }
            } else if (s1) {
                p1 = eval_reward(f, o1.position);
            } else if (s2) {
                p2 = eval_reward(f, o2.position);
            }
            acc1.add(bi, p1);
            acc2.add(bi, p2);
        }
    });
    acc1.n = n_pairs;
    acc2.n = n_pairs;

    EstimateWithCI e1, e2;
    e1.mean = acc1.mean();
    e1.standard_error = acc1.standard_error();
    e1.n = n_pairs;
    e1.horizon = opt.T_max;
    e2.mean = acc2.mean();
    e2.standard_error = acc2.standard_error();
    e2.n = n_pairs;
    e2.horizon = opt.T_max;
    return {e1, e2};
}

ConsistencyReport reduction_consistency(const StoppingRule& rule1, const StoppingRule& rule2,
                                        double x1, double x2, const RewardSpec& f,
                                        std::int64_t n, const McOptions& opt) {
    f.validate();
    // Each player's outcomes are simulated once on the payoff_direct
    // substreams; the direct pair estimator, the opponent curves, and both
    // reduced estimators are all evaluated on those common samples.
    McOptions opt1 = opt;
    opt1.stream_tag = rng::kTagPlayer1;
    McOptions opt2 = opt;
    opt2.stream_tag = rng::kTagPlayer2;
    const std::vector<StopOutcome> out1 = simulate_outcomes(rule1, x1, n, opt1);
    const std::vector<StopOutcome> out2 = simulate_outcomes(rule2, x2, n, opt2);

    const auto grid = uniform_grid(opt.T_max, opt.T_max / 512.0);
    auto curve_of = [&](const StoppingRule& rule, const std::vector<StopOutcome>& outs,
                        const McOptions& o) {
        switch (rule.kind) {
            case RuleKind::immediate:
            case RuleKind::deterministic:
            case RuleKind::never:
                return estimate_survival(rule, rule.x, 1, grid, o);
            case RuleKind::law_sampled:
                if (rule.law_b > 0.0) return estimate_survival(rule, rule.x, 1, grid, o);
                break;
            default:
                break;
        }
        return survival_from_outcomes(outs, grid, o.atom_min_mass);
    };
    const SurvivalCurve curve1 = curve_of(rule1, out1, opt1);
    const SurvivalCurve curve2 = curve_of(rule2, out2, opt2);

    const std::int64_t nblocks = block_count(n, 4096);
    MeanAccumulator d1(nblocks), d2(nblocks), r1(nblocks), r2(nblocks);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t bi = i / 4096;
        const StopOutcome& o1 = out1[static_cast<std::size_t>(i)];
        const StopOutcome& o2 = out2[static_cast<std::size_t>(i)];
        const bool s1 = o1.status == StopOutcome::Status::stopped;
        const bool s2 = o2.status == StopOutcome::Status::stopped;
        double p1 = 0.0, p2 = 0.0;
        if (s1 && s2) {
            if (o1.time < o2.time) p1 = eval_reward(f, o1.position);
            else if (o2.time < o1.time) p2 = eval_reward(f, o2.position);
            else {
                p1 = 0.5 * eval_reward(f, o1.position);
                p2 = 0.5 * eval_reward(f, o2.position);
            }
        } else if (s1) {
            p1 = eval_reward(f, o1.position);
        } else if (s2) {
            p2 = eval_reward(f, o2.position);
        }
        d1.add(bi, p1);
        d2.add(bi, p2);
        r1.add(bi, s1 ? curve2.c_at(o1.time) * eval_reward(f, o1.position) : 0.0);
        r2.add(bi, s2 ? curve1.c_at(o2.time) * eval_reward(f, o2.position) : 0.0);
    }
    d1.n = d2.n = r1.n = r2.n = n;

    ConsistencyReport rep;
    auto fill = [&](EstimateWithCI& e, const MeanAccumulator& a) {
        e.mean = a.mean();
        e.standard_error = a.standard_error();
        e.n = n;
        e.horizon = opt.T_max;
    };
    fill(rep.direct1, d1);
    fill(rep.direct2, d2);
    fill(rep.reduced1, r1);
    fill(rep.reduced2, r2);

    rep.discrepancy1 = std::abs(rep.direct1.mean - rep.reduced1.mean);
    rep.discrepancy2 = std::abs(rep.direct2.mean - rep.reduced2.mean);
    rep.se1 = std::hypot(rep.direct1.standard_error, rep.reduced1.standard_error);
    rep.se2 = std::hypot(rep.direct2.standard_error, rep.reduced2.standard_error);
    rep.se_units1 = rep.se1 > 0.0 ? rep.discrepancy1 / rep.se1 : (rep.discrepancy1 > 0.0 ? 1e300 : 0.0);
    rep.se_units2 = rep.se2 > 0.0 ? rep.discrepancy2 / rep.se2 : (rep.discrepancy2 > 0.0 ? 1e300 : 0.0);
    return rep;
}

} // namespace stoplab
