#include "stoplab/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "stoplab/defaults.hpp"
#include "stoplab/parallel.hpp"
#include "stoplab/rng.hpp"

namespace stoplab {

namespace {
constexpr double kPi = 3.141592653589793238462643383279503;
constexpr double kSqrt2 = 1.414213562373095048801688724209698;
constexpr double kSqrt2Pi = 2.506628274631000502415765284811045;
} // namespace

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double hitting_tail(double x, double t) {
    if (t < 0.0) throw DomainError("hitting_tail requires t >= 0");
    if (t == 0.0) return x == 0.0 ? 0.0 : 1.0;
    if (x == 0.0) return 0.0;
    return 2.0 * norm_cdf(std::abs(x) / std::sqrt(t)) - 1.0;
}

double hitting_tail_lower_bound(double x, double t) {
    if (!(t > 0.0)) throw DomainError("hitting_tail_lower_bound requires t > 0");
    return std::abs(x) / std::sqrt(kPi * t);
}

namespace {

double adaptive_simpson_rec(const std::function<double(double)>& f, double lo, double hi,
                            double flo, double fmid, double fhi, double whole, double tol,
                            int depth) {
    const double mid = 0.5 * (lo + hi);
    const double lmid = 0.5 * (lo + mid);
    const double rmid = 0.5 * (mid + hi);
    const double flmid = f(lmid);
    const double frmid = f(rmid);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flmid + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frmid + fhi);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, lo, mid, flo, flmid, fmid, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, mid, hi, fmid, frmid, fhi, right, 0.5 * tol, depth - 1);
}

} // namespace

double integrate(const std::function<double(double)>& f, double lo, double hi, double tol) {
    const double mid = 0.5 * (lo + hi);
    const double flo = f(lo), fmid = f(mid), fhi = f(hi);
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    return adaptive_simpson_rec(f, lo, hi, flo, fmid, fhi, whole, tol, 48);
}

double shepp_F(double alpha) {
    // integrand decays like exp(-(lambda-alpha)^2/2); truncate 14 sigmas past
    // the peak
    const double hi = std::max(1.0, alpha) + 14.0;
    const double integral = integrate(
        [alpha](double lam) { return std::exp(lam * alpha - 0.5 * lam * lam); }, 0.0, hi, 1e-14);
    return alpha - (1.0 - alpha * alpha) * integral;
}

double shepp_F_closed_form(double alpha) {
    const double integral = kSqrt2Pi * std::exp(0.5 * alpha * alpha) * norm_cdf(alpha);
    return alpha - (1.0 - alpha * alpha) * integral;
}

double shepp_alpha(double tolerance) {
    if (!(tolerance > 0.0)) throw DomainError("shepp_alpha requires tolerance > 0");
    if (tolerance < 1e-12)
        throw PrecisionError("tolerance below achievable quadrature accuracy (1e-12)");
    double lo = 0.0, hi = 1.0; // F(0) = -sqrt(pi/2) < 0, F(1) = 1 > 0
    double flo = shepp_F(lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = shepp_F(mid);
        if (std::abs(fmid) < tolerance) return mid;
        if ((flo < 0.0) == (fmid < 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        if (hi - lo < std::numeric_limits<double>::epsilon())
            break;
    }
    throw PrecisionError("shepp_alpha did not reach the requested tolerance");
}

double novikov_floor(std::span<const double> stopped_values) {
    if (stopped_values.empty()) throw ValidationError("novikov_floor requires a non-empty sample");
    NeumaierSum s;
    for (double v : stopped_values) s.add(v);
    const double mean = s.value() / static_cast<double>(stopped_values.size());
    if (!std::isfinite(mean)) throw ValidationError("novikov_floor requires a finite sample mean");
    return std::sqrt(2.0 / kPi) * std::abs(mean);
}

std::vector<double> sample_sqrt_rule(double a, std::int64_t n_paths, double t_max, double ds,
                                     std::uint64_t seed, std::uint64_t stream_tag, int threads,
                                     std::vector<double>* positions) {
    if (!(a > 0.0)) throw ValidationError("sample_sqrt_rule requires a > 0");
    if (!(t_max > 0.0) || !(ds > 0.0))
        throw ValidationError("sample_sqrt_rule requires t_max > 0 and ds > 0");

    // grid uniform in s = log(1+t); boundary value at node j is a*exp(s_j/2)
    const double s_max = std::log1p(t_max);
    const auto m = static_cast<std::int64_t>(std::ceil(s_max / ds));
    if (m > 100'000'000) throw CapacityError("sample_sqrt_rule grid too large");
    std::vector<double> node_t(static_cast<std::size_t>(m) + 1);
    std::vector<double> sqrt_dt(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<double> bnd(static_cast<std::size_t>(m) + 1);
    for (std::int64_t j = 0; j <= m; ++j) {
        const double s = ds * static_cast<double>(j);
        node_t[static_cast<std::size_t>(j)] = std::expm1(s);
        bnd[static_cast<std::size_t>(j)] = a * std::exp(0.5 * s);
    }
    for (std::int64_t j = 1; j <= m; ++j)
        sqrt_dt[static_cast<std::size_t>(j)] = std::sqrt(
            node_t[static_cast<std::size_t>(j)] - node_t[static_cast<std::size_t>(j - 1)]);

    std::vector<double> times(static_cast<std::size_t>(n_paths));
    if (positions) positions->assign(static_cast<std::size_t>(n_paths),
                                     std::numeric_limits<double>::quiet_NaN());

    const int nthreads = resolve_thread_count(threads);
    for_each_block(n_paths, 4096, nthreads, [&](std::int64_t b, std::int64_t e, std::int64_t) {
        for (std::int64_t r = b; r < e; ++r) {
            Substream inc(seed, stream_tag, static_cast<std::uint64_t>(r));
            double w = 0.0;
            double tau = std::numeric_limits<double>::infinity();
            double pos = std::numeric_limits<double>::quiet_NaN();
            for (std::int64_t j = 1; j <= m; ++j) {
                w += sqrt_dt[static_cast<std::size_t>(j)] * inc.normal();
                if (w >= bnd[static_cast<std::size_t>(j)]) {
                    tau = node_t[static_cast<std::size_t>(j)];
                    pos = w;
                    break;
                }
            }
            times[static_cast<std::size_t>(r)] = tau;
            if (positions) (*positions)[static_cast<std::size_t>(r)] = pos;
        }
    });
    return times;
}

TailEstimate breiman_exponent(double a, std::int64_t n_paths, std::span<const double> t_grid,
                              std::uint64_t seed, double ds, int threads) {
    if (!(a > 0.0)) throw ValidationError("breiman_exponent requires a > 0");
    if (t_grid.size() < 2) throw ValidationError("breiman_exponent requires a t-grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1]))
            throw ValidationError("t-grid must be strictly increasing");
    const double t_lo_pos = t_grid.front() > 0.0 ? t_grid.front() : t_grid[1];
    if (!(t_grid.back() / t_lo_pos >= 100.0))
        throw ValidationError("t-grid must span at least 2 decades");

    TailEstimate est;
    est.t_grid.assign(t_grid.begin(), t_grid.end());

    const std::vector<double> times =
        sample_sqrt_rule(a, n_paths, t_grid.back(), ds, seed, rng::kTagTail, threads);

    std::vector<std::int64_t> survivors(t_grid.size(), 0);
    for (double tau : times)
        for (std::size_t g = 0; g < survivors.size(); ++g)
            if (tau > est.t_grid[g]) ++survivors[g];

    est.survival.resize(t_grid.size());
    est.survival_se.resize(t_grid.size());
    const double n = static_cast<double>(n_paths);
    for (std::size_t g = 0; g < survivors.size(); ++g) {
        const double p = static_cast<double>(survivors[g]) / n;
        est.survival[g] = p;
        est.survival_se[g] = std::sqrt(p * (1.0 - p) / n);
    }

    // fit window: last decade of the grid, extended to two decades when it
    // holds fewer than 3 usable points
    auto collect = [&](double lo) {
        std::vector<std::size_t> idx;
        for (std::size_t g = 0; g < est.t_grid.size(); ++g)
            if (est.t_grid[g] >= lo && est.t_grid[g] > 0.0 && survivors[g] > 0)
                idx.push_back(g);
        return idx;
    };
    auto idx = collect(est.t_grid.back() / 10.0);
    if (idx.size() < 3) idx = collect(est.t_grid.back() / 100.0);

    if (idx.size() < 2) {
        est.exponent = std::numeric_limits<double>::quiet_NaN();
        est.unreliable_fit = true;
        return est;
    }

    est.fit_t_lo = est.t_grid[idx.front()];
    est.fit_t_hi = est.t_grid[idx.back()];
    est.n_fit_points = idx.size();
    est.tail_survivors = survivors[idx.back()];

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t g : idx) {
        const double lx = std::log(est.t_grid[g]);
        const double ly = std::log(est.survival[g]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double nn = static_cast<double>(idx.size());
    const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / nn;
    est.exponent = -slope;

    double rss = 0;
    for (std::size_t g : idx) {
        const double pred = intercept + slope * std::log(est.t_grid[g]);
        const double r = std::log(est.survival[g]) - pred;
        rss += r * r;
    }
    est.residual = std::sqrt(rss / nn);
    est.unreliable_fit = est.tail_survivors < defaults::kMinTailSurvivors;
    return est;
}

const char* PathEvent::name() const {
    switch (kind) {
        case Kind::terminal_above: return "terminal-above";
        case Kind::upper_hit_by: return "upper-hit-by";
        case Kind::lower_survives: return "lower-survives";
    }
    return "?";
}

PathEvent event_terminal_above(double level, double T) {
    PathEvent e;
    e.kind = PathEvent::Kind::terminal_above;
    e.level = level;
    e.T = T;
    return e;
}

PathEvent event_upper_hit_by(double level, double slope, double T) {
    PathEvent e;
    e.kind = PathEvent::Kind::upper_hit_by;
    e.level = level;
    e.slope = slope;
    e.T = T;
    return e;
}

PathEvent event_lower_survives(double y, double T) {
    PathEvent e;
    e.kind = PathEvent::Kind::lower_survives;
    e.y = y;
    e.T = T;
    return e;
}

namespace {

struct EventState {
    bool hit_upper = false;
    bool hit_lower = false;
    double terminal = 0.0;

    void update(const PathEvent& e, double t, double w, double T_tol) {
        switch (e.kind) {
            case PathEvent::Kind::terminal_above:
                if (std::abs(t - e.T) <= T_tol) terminal = w;
                break;
            case PathEvent::Kind::upper_hit_by:
                if (t <= e.T + T_tol && w >= e.level + e.slope * t) hit_upper = true;
                break;
            case PathEvent::Kind::lower_survives:
                if (t < e.T - T_tol && w <= e.y) hit_lower = true;
                break;
        }
    }

    bool indicator(const PathEvent& e) const {
        switch (e.kind) {
            case PathEvent::Kind::terminal_above: return terminal > e.level;
            case PathEvent::Kind::upper_hit_by: return hit_upper;
            case PathEvent::Kind::lower_survives: return !hit_lower;
        }
        return false;
    }
};

} // namespace

FkgResult fkg_check(const PathEvent& a, const PathEvent& b, std::int64_t n_paths,
                    std::uint64_t seed, double dt, int threads) {
    if (n_paths < 1) throw ValidationError("fkg_check requires n_paths >= 1");
    const double T_sim = std::max(a.T, b.T);
    const auto n_steps = static_cast<std::int64_t>(std::llround(T_sim / dt));
    const double sqrt_dt = std::sqrt(dt);
    const double t_tol = 0.5 * dt;

    const int nthreads = resolve_thread_count(threads);
    const std::int64_t nblocks = block_count(n_paths, 4096);
    struct Counts {
        std::int64_t ca = 0, cb = 0, cab = 0;
    };
    std::vector<Counts> block_counts(static_cast<std::size_t>(nblocks));

    for_each_block(n_paths, 4096, nthreads, [&](std::int64_t lo, std::int64_t hi, std::int64_t bi) {
        auto& c = block_counts[static_cast<std::size_t>(bi)];
        for (std::int64_t r = lo; r < hi; ++r) {
            Substream inc(seed, rng::kTagEvents, static_cast<std::uint64_t>(r));
            EventState sa, sb;
            double w = 0.0;
            for (std::int64_t k = 0; k <= n_steps; ++k) {
                if (k > 0) w += sqrt_dt * inc.normal();
                const double t = static_cast<double>(k) * dt;
                sa.update(a, t, w, t_tol);
                sb.update(b, t, w, t_tol);
            }
            const bool ia = sa.indicator(a);
            const bool ib = sb.indicator(b);
            c.ca += ia;
            c.cb += ib;
            c.cab += ia && ib;
        }
    });

    std::int64_t ca = 0, cb = 0, cab = 0;
    for (const auto& c : block_counts) {
        ca += c.ca;
        cb += c.cb;
        cab += c.cab;
    }

    FkgResult res;
    res.n = n_paths;
    const double n = static_cast<double>(n_paths);
    res.p_a = static_cast<double>(ca) / n;
    res.p_b = static_cast<double>(cb) / n;
    res.p_joint = static_cast<double>(cab) / n;
    res.p_product = res.p_a * res.p_b;
    res.se_a = std::sqrt(res.p_a * (1.0 - res.p_a) / n);
    res.se_b = std::sqrt(res.p_b * (1.0 - res.p_b) / n);
    res.se_joint = std::sqrt(res.p_joint * (1.0 - res.p_joint) / n);
    res.se_gap = std::sqrt(res.se_joint * res.se_joint + res.p_b * res.p_b * res.se_a * res.se_a +
                           res.p_a * res.p_a * res.se_b * res.se_b);
    return res;
}

} // namespace stoplab
