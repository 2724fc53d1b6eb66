#include "stoplab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "stoplab/defaults.hpp"
#include "stoplab/parallel.hpp"

namespace stoplab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 7-point Gauss-Hermite rule for E[g(Z)], Z ~ N(0,1). Physicists' nodes and
// weights, rescaled.
struct GaussHermite7 {
    double z[7];
    double w[7];
    GaussHermite7() {
        static const double xs[7] = {-2.6519613568352334, -1.6735516287674714,
                                     -0.8162878828589647, 0.0,
                                     0.8162878828589647,  1.6735516287674714,
                                     2.6519613568352334};
        static const double ws[7] = {0.0009717812450995192, 0.05451558281912703,
                                     0.4256072526101278,    0.8102646175568073,
                                     0.4256072526101278,    0.05451558281912703,
                                     0.0009717812450995192};
        const double sqrt2 = std::sqrt(2.0);
        const double sqrt_pi = std::sqrt(3.141592653589793238462643383279503);
        for (int i = 0; i < 7; ++i) {
            z[i] = sqrt2 * xs[i];
            w[i] = ws[i] / sqrt_pi;
        }
    }
};

const GaussHermite7& gh7() {
    static const GaussHermite7 rule;
    return rule;
}

// Fritsch-Butland monotone slopes, in value-per-cell units.
void monotone_slopes(const std::vector<double>& v, std::vector<double>& m) {
    const std::size_t n = v.size();
    for (std::size_t j = 0; j < n; ++j) {
        const double left = j > 0 ? v[j] - v[j - 1] : 0.0;
        const double right = j + 1 < n ? v[j + 1] - v[j] : 0.0;
        if (j == 0) {
            m[j] = right;
        } else if (j + 1 == n) {
            m[j] = left;
        } else if (left * right > 0.0) {
            m[j] = 2.0 * left * right / (left + right);
        } else {
            m[j] = 0.0;
        }
    }
}

} // namespace

double Lattice::value_at0(double x) const {
    if (x <= x_grid.front()) return v0.front();
    if (x >= x_grid.back()) return v0.back();
    const double dx = x_grid[1] - x_grid[0];
    const auto j = static_cast<std::size_t>((x - x_grid.front()) / dx);
    const std::size_t jj = std::min(j, x_grid.size() - 2);
    const double w = (x - x_grid[jj]) / dx;
    return v0[jj] + w * (v0[jj + 1] - v0[jj]);
}

double Lattice::boundary_at(double t) const {
    const double dt = t_grid.size() > 1 ? t_grid[1] - t_grid[0] : 1.0;
    auto k = static_cast<std::size_t>(std::llround(t / dt));
    k = std::min(k, boundary.size() - 1);
    return boundary[k];
}

void Lattice::write_boundary_csv(std::ostream& os) const {
    os << "t,b\n";
    char buf[80];
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t_grid[k], boundary[k]);
        os << buf;
    }
}

void Lattice::write_values_binary(std::ostream& os) const {
    const char magic[4] = {'S', 'L', 'A', 'B'};
    os.write(magic, 4);
    const std::uint64_t ns = stored_idx.size();
    const std::uint64_t nxx = x_grid.size();
    const double dt = t_grid.size() > 1 ? t_grid[1] - t_grid[0] : 0.0;
    const double dx = x_grid.size() > 1 ? x_grid[1] - x_grid[0] : 0.0;
    const double x0 = x_grid.front();
    os.write(reinterpret_cast<const char*>(&ns), sizeof ns);
    os.write(reinterpret_cast<const char*>(&nxx), sizeof nxx);
    os.write(reinterpret_cast<const char*>(&dt), sizeof dt);
    os.write(reinterpret_cast<const char*>(&dx), sizeof dx);
    os.write(reinterpret_cast<const char*>(&x0), sizeof x0);
    for (std::size_t s : stored_idx) {
        const double t = t_grid[s];
        os.write(reinterpret_cast<const char*>(&t), sizeof t);
    }
    os.write(reinterpret_cast<const char*>(value.data()),
             static_cast<std::streamsize>(value.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(stop_flag.data()),
             static_cast<std::streamsize>(stop_flag.size()));
}

Lattice best_response(const SurvivalCurve& c, const RewardSpec& f, const LatticeParams& params) {
    c.validate();
    f.validate();
    if (!(params.dt > 0.0) || !(params.dx > 0.0) || !(params.T_max >= params.dt))
        throw ConfigError("lattice requires dt > 0, dx > 0, T_max >= dt");
    if (!params.allow_narrow && params.width_sigmas < 6.0)
        throw ConfigError("lattice width rule requires width_sigmas >= 6");
    if (c.t_grid.back() < params.T_max * (1.0 - 1e-12) && !(c.ess_sup <= c.t_grid.back()))
        throw DomainError("survival curve does not cover the lattice horizon");

    const auto nt = static_cast<std::size_t>(std::llround(params.T_max / params.dt));
    const double half = params.width_sigmas * std::sqrt(params.T_max) + params.x_pad;
    const auto jm = static_cast<std::size_t>(std::ceil(half / params.dx));
    const std::size_t nx = 2 * jm + 1;
    if (nt * nx > 20'000'000'000ull) throw CapacityError("lattice too large");

    Lattice lat;
    lat.t_grid.resize(nt + 1);
    for (std::size_t k = 0; k <= nt; ++k) lat.t_grid[k] = params.dt * static_cast<double>(k);
    lat.x_grid.resize(nx);
    for (std::size_t j = 0; j < nx; ++j)
        lat.x_grid[j] = params.x_center + params.dx * (static_cast<double>(j) - static_cast<double>(jm));
    lat.boundary.assign(nt + 1, kInf);

    // precomputed pieces
    std::vector<double> c_vals(nt + 1);
    for (std::size_t k = 0; k <= nt; ++k) c_vals[k] = c.c_at(lat.t_grid[k]);
    std::vector<double> fx(nx);
    for (std::size_t j = 0; j < nx; ++j) fx[j] = eval_reward(f, lat.x_grid[j]);

    const auto& gh = gh7();
    const double sdt = std::sqrt(params.dt);
    std::ptrdiff_t shift[7];
    double frac[7];
    double h00[7], h01[7], h10[7], h11[7];
    std::ptrdiff_t max_reach = 0;
    for (int i = 0; i < 7; ++i) {
        const double off = gh.z[i] * sdt / params.dx;
        const double fl = std::floor(off);
        shift[i] = static_cast<std::ptrdiff_t>(fl);
        frac[i] = off - fl;
        const double u = frac[i];
        h00[i] = (2.0 * u - 3.0) * u * u + 1.0;
        h01[i] = (3.0 - 2.0 * u) * u * u;
        h10[i] = ((u - 2.0) * u + 1.0) * u;
        h11[i] = (u - 1.0) * u * u;
        max_reach = std::max(max_reach, std::abs(shift[i]) + 2);
    }
    const auto margin = static_cast<std::size_t>(max_reach) + 1;
    if (2 * margin + 1 >= nx) throw ConfigError("lattice too small for the stencil");
    const std::size_t jlo = margin, jhi = nx - 1 - margin;

    const bool affine = f.kind == RewardKind::affine;
    const bool cubic = params.interp == LatticeInterp::cubic;

    // slice storage plan
    const std::size_t stride =
        std::max<std::size_t>(1, nt / static_cast<std::size_t>(
                                          std::max(1, params.max_stored_slices - 1)));
    std::vector<std::int64_t> store_row(nt + 1, -1);
    {
        std::int64_t row = 0;
        for (std::size_t k = 0; k <= nt; ++k)
            if (k % stride == 0 || k == nt) store_row[k] = row++;
        lat.stored_idx.reserve(static_cast<std::size_t>(row));
        for (std::size_t k = 0; k <= nt; ++k)
            if (store_row[k] >= 0) lat.stored_idx.push_back(k);
        lat.value.assign(static_cast<std::size_t>(row) * nx, 0.0);
        lat.stop_flag.assign(static_cast<std::size_t>(row) * nx, 0);
    }

    std::vector<double> v_next(nx), v_cur(nx), slopes(nx, 0.0);
    std::vector<std::uint8_t> flags(nx, 0);

    auto finish_slice = [&](std::size_t k, const std::vector<double>& v,
                            const std::vector<std::uint8_t>& fl) {
        // boundary: smallest flagged x
        for (std::size_t j = 0; j < nx; ++j) {
            if (fl[j]) {
                lat.boundary[k] = lat.x_grid[j];
                break;
            }
        }
        if (affine && std::isfinite(lat.boundary[k])) {
            bool seen = false;
            for (std::size_t j = 0; j < nx; ++j) {
                if (fl[j]) seen = true;
                else if (seen) ++lat.upclosed_violations;
            }
        }
        if (store_row[k] >= 0) {
            const auto row = static_cast<std::size_t>(store_row[k]);
            std::copy(v.begin(), v.end(), lat.value.begin() + static_cast<std::ptrdiff_t>(row * nx));
            std::copy(fl.begin(), fl.end(),
                      lat.stop_flag.begin() + static_cast<std::ptrdiff_t>(row * nx));
        }
        if (k == 0) {
            lat.v0 = v;
            lat.stop0 = fl;
        }
    };

    // terminal slice
    for (std::size_t j = 0; j < nx; ++j) {
        const double imm = c_vals[nt] * fx[j];
        v_next[j] = std::max(imm, 0.0);
        flags[j] = imm >= 0.0 ? 1 : 0;
    }
    finish_slice(nt, v_next, flags);

    for (std::size_t kk = nt; kk-- > 0;) {
        const double ck = c_vals[kk];
        // the terminal slice has a kink at the sign change of f; one linear
        // step smooths it before the cubic stencil takes over
        const bool cubic_step = cubic && kk + 1 < nt;
        if (cubic_step) monotone_slopes(v_next, slopes);

        for (std::size_t j = 0; j < jlo; ++j) {
            const double imm = ck * fx[j];
            v_cur[j] = std::max(imm, 0.0);
            flags[j] = imm >= 0.0 ? 1 : 0;
        }
        for (std::size_t j = jhi + 1; j < nx; ++j) {
            const double imm = ck * fx[j];
            v_cur[j] = std::max(imm, 0.0);
            flags[j] = imm >= 0.0 ? 1 : 0;
        }

        const double* vn = v_next.data();
        const double* m = slopes.data();
        // ties stop, at floating-point granularity (relative so that scaling
        // f by a power of two leaves every flag unchanged)
        constexpr double kTieRel = 1e-12;
        if (cubic_step) {
            for (std::size_t j = jlo; j <= jhi; ++j) {
                double cont = 0.0;
                for (int i = 0; i < 7; ++i) {
                    const std::size_t b = static_cast<std::size_t>(
                        static_cast<std::ptrdiff_t>(j) + shift[i]);
                    cont += gh.w[i] * (h00[i] * vn[b] + h01[i] * vn[b + 1] + h10[i] * m[b] +
                                       h11[i] * m[b + 1]);
                }
                const double imm = ck * fx[j];
                v_cur[j] = imm >= cont ? imm : cont;
                flags[j] = imm >= cont - kTieRel * (std::abs(imm) + std::abs(cont)) ? 1 : 0;
            }
        } else {
            for (std::size_t j = jlo; j <= jhi; ++j) {
                double cont = 0.0;
                for (int i = 0; i < 7; ++i) {
                    const std::size_t b = static_cast<std::size_t>(
                        static_cast<std::ptrdiff_t>(j) + shift[i]);
                    cont += gh.w[i] * ((1.0 - frac[i]) * vn[b] + frac[i] * vn[b + 1]);
                }
                const double imm = ck * fx[j];
                v_cur[j] = imm >= cont ? imm : cont;
                flags[j] = imm >= cont - kTieRel * (std::abs(imm) + std::abs(cont)) ? 1 : 0;
            }
        }
        finish_slice(kk, v_cur, flags);
        v_next.swap(v_cur);
    }
    return lat;
}

DivergenceReport classify_divergence(const std::function<SurvivalCurve(double)>& curve_for_horizon,
                                     const RewardSpec& f, std::span<const double> horizons,
                                     double x_eval, const LatticeParams& base,
                                     double growth_factor) {
    if (horizons.size() < 4)
        throw ValidationError("classify_divergence requires >= 4 doubling horizons");
    for (std::size_t i = 1; i < horizons.size(); ++i)
        if (!(horizons[i] > horizons[i - 1]))
            throw ValidationError("horizons must be increasing");

    DivergenceReport rep;
    rep.growth_factor = growth_factor;
    rep.horizons.assign(horizons.begin(), horizons.end());

    SurvivalCurve last_curve;
    for (double T : horizons) {
        LatticeParams p = base;
        p.T_max = T;
        last_curve = curve_for_horizon(T);
        const Lattice lat = best_response(last_curve, f, p);
        rep.values.push_back(lat.value_at0(x_eval));
    }
    for (std::size_t i = 1; i < rep.values.size(); ++i) {
        const double prev = rep.values[i - 1];
        const double cur = rep.values[i];
        if (cur < prev - 1e-9 * std::max(1.0, std::abs(prev)))
            throw NumericalInconsistencyError(
                "value decreased with the horizon: " + std::to_string(prev) + " -> " +
                std::to_string(cur));
        rep.ratios.push_back(prev > 0.0 ? cur / prev : (cur > 0.0 ? kInf : 1.0));
    }

    const int need = defaults::kGrowthDoublings;
    bool inf_growth = rep.ratios.size() >= static_cast<std::size_t>(need);
    for (std::size_t i = rep.ratios.size() - static_cast<std::size_t>(need);
         inf_growth && i < rep.ratios.size(); ++i)
        inf_growth = rep.ratios[i] >= growth_factor;
    rep.infinite = inf_growth;

    // Eq-style proxy: min of c(t) sqrt(t log log t) over the last decade
    {
        const double T = rep.horizons.back();
        double lo = std::max(3.0, T / 10.0);
        double proxy = kInf;
        for (int i = 0; i <= 64; ++i) {
            const double t = lo + (T - lo) * static_cast<double>(i) / 64.0;
            if (t <= std::exp(1.0)) continue;
            proxy = std::min(proxy, last_curve.c_at(t) * std::sqrt(t * std::log(std::log(t))));
        }
        rep.lil_proxy = proxy;
    }
    return rep;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::equilibrium_consistent: return "equilibrium-consistent";
        case Verdict::profitable_deviation_found: return "profitable-deviation-found";
        case Verdict::infinite_payoff_regime: return "infinite-payoff-regime";
    }
    return "?";
}

nlohmann::json EquilibriumReport::to_json() const {
    auto player = [](const PlayerReport& p) {
        nlohmann::json j;
        j["j_mean"] = p.j.mean;
        j["j_se"] = p.j.standard_error;
        j["n"] = p.j.n;
        j["best_response_value"] = p.v;
        j["gap"] = p.gap;
        j["gap_threshold"] = p.gap_threshold;
        j["divergent"] = p.divergent;
        j["best_deviation"] = p.best_deviation;
        j["best_deviation_se"] = p.best_deviation_se;
        j["best_deviation_rule"] = p.best_deviation_name;
        return j;
    };
    nlohmann::json j;
    j["player1"] = player(player1);
    j["player2"] = player(player2);
    j["verdict"] = to_string(verdict);
    j["significance"] = significance;
    return j;
}

namespace {

std::vector<std::pair<std::string, StoppingRule>> deviation_candidates(double x, double T_max) {
    std::vector<std::pair<std::string, StoppingRule>> out;
    out.emplace_back("never", make_never(x));
    for (double frac : {1.0 / 64.0, 1.0 / 16.0, 1.0 / 4.0})
        out.emplace_back("deterministic(" + std::to_string(T_max * frac) + ")",
                         make_deterministic(x, T_max * frac));
    for (double lift : {0.5, 1.0, 2.0}) {
        BoundarySpec b;
        b.kind = BoundaryKind::constant;
        b.side = BoundarySide::upper;
        b.level = x + lift;
        out.emplace_back("hit-upper(" + std::to_string(b.level) + ")", make_hit(x, b));
    }
    out.emplace_back("composite-tau-a(1)", make_composite_tau_a(x, 1.0));
    return out;
}

} // namespace

EquilibriumReport verify_equilibrium(const StoppingRule& rule1, const StoppingRule& rule2,
                                     const GameConfig& config, double significance,
                                     const VerifyOptions& opt) {
    config.validate();
    rule1.validate();
    rule2.validate();

    McOptions mc;
    mc.dt = config.dt;
    mc.T_max = config.T_max;
    mc.seed = config.seed;
    mc.threads = opt.threads;

    EquilibriumReport rep;
    rep.significance = significance;

    auto [j1, j2] = payoff_direct(rule1, rule2, config.x1, config.x2, config.reward,
                                  config.n_paths, mc);
    rep.player1.j = j1;
    rep.player2.j = j2;

    // opponent survival curves on a grid that covers the lattice horizon
    const auto grid = uniform_grid(config.T_max, config.T_max / 512.0);
    McOptions c1opt = mc;
    c1opt.stream_tag = rng::kTagPlayer1;
    McOptions c2opt = mc;
    c2opt.stream_tag = rng::kTagPlayer2;
    const SurvivalCurve curve1 = estimate_survival(rule1, config.x1, config.n_paths, grid, c1opt);
    const SurvivalCurve curve2 = estimate_survival(rule2, config.x2, config.n_paths, grid, c2opt);

    LatticeParams lp = opt.lattice;
    lp.T_max = config.T_max;

    auto do_player = [&](PlayerReport& pr, const SurvivalCurve& opp, double x) {
        LatticeParams p = lp;
        p.x_center = x;
        const Lattice lat = best_response(opp, config.reward, p);
        pr.v = lat.value_at0(x);
        pr.gap = pr.v - pr.j.mean;
        pr.gap_threshold = significance * pr.j.standard_error +
                           defaults::kLatticeValueRtol * std::max(std::abs(pr.v), std::abs(pr.j.mean));
        if (opt.deviation_search) {
            const std::int64_t n_dev = opt.deviation_n > 0 ? opt.deviation_n : config.n_paths;
            McOptions dev_opt = mc;
            dev_opt.stream_tag = 0x77;
            bool first = true;
            for (const auto& [name, rule] : deviation_candidates(x, config.T_max)) {
                const EstimateWithCI e = payoff_reduced(rule, x, opp, config.reward, n_dev, dev_opt);
                if (first || e.mean > pr.best_deviation) {
                    pr.best_deviation = e.mean;
                    pr.best_deviation_se = e.standard_error;
                    pr.best_deviation_name = name;
                    first = false;
                }
            }
        }
    };
    do_player(rep.player1, curve2, config.x1);
    do_player(rep.player2, curve1, config.x2);

    auto deviates = [&](const PlayerReport& pr) {
        if (pr.gap > pr.gap_threshold) return true;
        if (opt.deviation_search) {
            const double se = std::hypot(pr.j.standard_error, pr.best_deviation_se);
            if (pr.best_deviation - pr.j.mean > significance * se &&
                pr.best_deviation - pr.j.mean > 1e-12)
                return true;
        }
        return false;
    };
    rep.verdict = (deviates(rep.player1) || deviates(rep.player2))
                      ? Verdict::profitable_deviation_found
                      : Verdict::equilibrium_consistent;
    return rep;
}

EstimateWithCI negative_stop_audit(const StoppingRule& rule, const SurvivalCurve& opponent,
                                   double x, std::int64_t n_paths, const McOptions& opt) {
    rule.validate();
    StoppingRule bound = rule;
    bound.x = x;
    const int threads = resolve_thread_count(opt.threads);
    const std::int64_t block = 4096;
    const std::int64_t nblocks = block_count(n_paths, block);
    std::vector<std::int64_t> hits(static_cast<std::size_t>(nblocks), 0);
    for_each_block(n_paths, block, threads, [&](std::int64_t lo, std::int64_t hi, std::int64_t bi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const StopOutcome o =
                run_rule(bound, opt.seed, opt.stream_tag, static_cast<std::uint64_t>(r), opt.dt,
                         opt.T_max);
            if (o.status == StopOutcome::Status::stopped && o.position < 0.0 &&
                opponent.c_at(o.time) > 0.0)
                hits[static_cast<std::size_t>(bi)] += 1;
        }
    });
    std::int64_t total = 0;
    for (auto h : hits) total += h;
    EstimateWithCI est;
    est.n = n_paths;
    est.horizon = opt.T_max;
    const double n = static_cast<double>(n_paths);
    est.mean = static_cast<double>(total) / n;
    est.standard_error = std::sqrt(std::max(0.0, est.mean * (1.0 - est.mean)) / n);
    return est;
}

} // namespace stoplab
