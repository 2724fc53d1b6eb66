#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stoplab/analytics.hpp"
#include "stoplab/pathsim.hpp"

using namespace stoplab;

namespace {

BoundarySpec constant_barrier(double level, BoundarySide side) {
    BoundarySpec b;
    b.kind = BoundaryKind::constant;
    b.level = level;
    b.side = side;
    return b;
}

} // namespace

TEST_CASE("simulate_path trivia") {
    const PathSample p0 = simulate_path(1, 0, 1.0, 0.0);
    CHECK(p0.values.size() == 1);
    CHECK(p0.values[0] == 0.0);

    const PathSample a = simulate_path(7, 13, 0.01, 2.0);
    const PathSample b = simulate_path(7, 13, 0.01, 2.0);
    CHECK(a.values == b.values);
    const PathSample c = simulate_path(7, 14, 0.01, 2.0);
    CHECK(a.values != c.values);

    CHECK_THROWS_AS(simulate_path(1, 0, 1e-9, 1e9), CapacityError);
    CHECK_THROWS_AS(simulate_path(1, 0, 0.0, 1.0), ValidationError);
}

TEST_CASE("terminal variance matches the generator contract") {
    // W_1 over n paths at dt=1: sample variance within 3 chi^2 standard errors
    const std::int64_t n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const PathSample p = simulate_path(2024, static_cast<std::uint64_t>(i), 1.0, 1.0);
        sum += p.values[1];
        sumsq += p.values[1] * p.values[1];
    }
    const double mean = sum / static_cast<double>(n);
    const double var = (sumsq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
    const double se = std::sqrt(2.0 / static_cast<double>(n - 1));
    CHECK(std::abs(var - 1.0) < 3.0 * se);
}

TEST_CASE("first_hitting trivia") {
    const PathSample p = simulate_path(3, 1, 0.01, 1.0);
    // starts on the barrier
    const StopOutcome o = first_hitting(p, constant_barrier(0.0, BoundarySide::lower), 0.0, false);
    CHECK(o.stopped());
    CHECK(o.time == 0.0);
    CHECK(o.position == 0.0);

    // strictly below an upper barrier throughout: censored
    PathSample flat;
    flat.dt = 0.1;
    flat.T_max = 1.0;
    flat.values.assign(11, -1.0);
    flat.values[0] = 0.0;
    const StopOutcome c = first_hitting(flat, constant_barrier(5.0, BoundarySide::upper), 0.0, true);
    CHECK(c.status == StopOutcome::Status::censored);
}

TEST_CASE("MC survival of a level hit matches the reflection closed form") {
    // lower barrier -1 from x=0 over [0,1]: P(no hit) = 2*Phi(1) - 1
    const std::int64_t n = 20000;
    std::int64_t surv = 0;
    const StoppingRule rule = make_hit(0.0, constant_barrier(-1.0, BoundarySide::lower));
    for (std::int64_t i = 0; i < n; ++i) {
        const StopOutcome o = run_rule(rule, 99, 0, static_cast<std::uint64_t>(i), 1e-3, 1.0);
        if (!o.stopped()) ++surv;
    }
    const double p_hat = static_cast<double>(surv) / static_cast<double>(n);
    const double p_true = hitting_tail(1.0, 1.0);
    const double se = std::sqrt(p_true * (1.0 - p_true) / static_cast<double>(n));
    CHECK(std::abs(p_hat - p_true) < 3.0 * se);
}

TEST_CASE("rules are adapted: the decision by time t only sees the path up to t") {
    for (int variant = 0; variant < 2; ++variant) {
        int checked = 0;
        for (std::uint64_t id = 0; id < 40; ++id) {
            const PathSample p = simulate_path(11, id, 1e-2, 4.0);
            const StoppingRule rule = variant == 0
                                          ? make_hit(0.0, constant_barrier(0.5, BoundarySide::upper))
                                          : make_composite_tau_a(0.3, 0.8);
            const StopOutcome o = sample_stop(rule, p);
            if (!o.stopped()) continue;
            // tamper with the path strictly after the stop decision
            PathSample q = p;
            const auto cut = static_cast<std::size_t>(std::ceil(o.time / p.dt)) + 1;
            for (std::size_t k = cut; k < q.values.size(); ++k) q.values[k] += 37.0;
            const StopOutcome o2 = sample_stop(rule, q);
            CHECK(o2.stopped());
            CHECK(o2.time == o.time);
            CHECK(o2.position == o.position);
            ++checked;
        }
        CHECK(checked > 10);
    }
}

TEST_CASE("composite rule stops no earlier than the origin hit, path by path") {
    const BoundarySpec origin = constant_barrier(0.0, BoundarySide::lower);
    for (std::uint64_t id = 0; id < 200; ++id) {
        const PathSample p = simulate_path(5, id, 1e-2, 8.0);
        const StopOutcome sigma = first_hitting(p, origin, 1.0, true);
        const StopOutcome tau = sample_stop(make_composite_tau_a(1.0, 1.0), p);
        if (tau.stopped()) {
            REQUIRE(sigma.stopped());
            CHECK(tau.time >= sigma.time);
            CHECK(tau.position > 0.0);
        }
    }
}

TEST_CASE("composite rule from the origin: position sits on the square-root barrier") {
    // x = 0: the origin leg has length 0 and the stop position is a*sqrt(t+1)
    // up to one-step overshoot
    const double a = 1.0;
    double sum_pos = 0.0, sum_bnd = 0.0;
    std::int64_t stopped = 0;
    for (std::uint64_t id = 0; id < 4000; ++id) {
        const StopOutcome o = run_rule(make_composite_tau_a(0.0, a), 17, 0, id, 1e-3, 8.0);
        if (!o.stopped()) continue;
        ++stopped;
        sum_pos += o.position;
        sum_bnd += a * std::sqrt(o.time + 1.0);
        CHECK(o.position >= a * (1.0 - 1e-12));
    }
    REQUIRE(stopped > 1500);
    // self-consistency of E[position] with E[a*sqrt(tau+1)] from the same runs
    CHECK(std::abs(sum_pos / sum_bnd - 1.0) < 0.02);
}

TEST_CASE("bridge correction never increases the hitting time") {
    for (std::uint64_t id = 0; id < 500; ++id) {
        const PathSample p = simulate_path(23, id, 1e-2, 2.0);
        const BoundarySpec b = constant_barrier(0.8, BoundarySide::upper);
        const StopOutcome with = first_hitting(p, b, 0.0, true);
        const StopOutcome without = first_hitting(p, b, 0.0, false);
        const double t_with = with.stopped() ? with.time : 1e300;
        const double t_without = without.stopped() ? without.time : 1e300;
        CHECK(t_with <= t_without);
    }
}

TEST_CASE("halving dt shrinks the discretization bias toward the closed form") {
    // no bridge: grid detection misses crossings, inflating survival
    const double p_true = hitting_tail(1.0, 1.0);
    auto survival = [&](double dt, std::uint64_t master) {
        const std::int64_t n = 30000;
        StoppingRule rule = make_hit(1.0, constant_barrier(0.0, BoundarySide::lower), false);
        std::int64_t surv = 0;
        for (std::int64_t i = 0; i < n; ++i)
            if (!run_rule(rule, master, 0, static_cast<std::uint64_t>(i), dt, 1.0).stopped())
                ++surv;
        return static_cast<double>(surv) / static_cast<double>(n);
    };
    const double coarse = survival(0.02, 31);
    const double fine = survival(0.005, 32);
    CHECK(coarse > p_true);
    CHECK(fine > p_true);
    CHECK(coarse - fine > 0.01); // bias roughly halves; noise is ~0.008 at 3 SE
}

TEST_CASE("streaming evaluation matches evaluation on the materialized path") {
    std::vector<StoppingRule> rules;
    rules.push_back(make_immediate(2.0));
    rules.push_back(make_deterministic(1.0, 0.5));
    rules.push_back(make_never(0.0));
    rules.push_back(make_hit(0.0, constant_barrier(0.7, BoundarySide::upper)));
    rules.push_back(make_composite_tau_a(0.5, 1.2));
    BoundarySpec lil;
    lil.kind = BoundaryKind::lil;
    lil.T = 3.0;
    rules.push_back(make_hit(0.0, lil));
    for (const auto& rule : rules) {
        for (std::uint64_t id = 0; id < 25; ++id) {
            const PathSample p = simulate_path(41, id, 5e-3, 12.0);
            const StopOutcome a = sample_stop(rule, p);
            const StopOutcome b = run_rule(rule, 41, 0, id, 5e-3, 12.0);
            CHECK(a.status == b.status);
            if (a.stopped()) {
                CHECK(a.time == b.time);
                CHECK(a.position == b.position);
            }
        }
    }
}

TEST_CASE("rule kinds behave per contract") {
    const PathSample p = simulate_path(1, 2, 1e-2, 1.0);
    const StopOutcome imm = sample_stop(make_immediate(5.0), p);
    CHECK(imm.time == 0.0);
    CHECK(imm.position == 5.0);

    const StopOutcome nev = sample_stop(make_never(0.0), p);
    CHECK(nev.status == StopOutcome::Status::never);

    const StopOutcome beyond = sample_stop(make_deterministic(0.0, 2.0), p);
    CHECK(beyond.status == StopOutcome::Status::censored);

    const StopOutcome det = sample_stop(make_deterministic(1.0, 0.5), p);
    CHECK(det.stopped());
    CHECK(det.time == doctest::Approx(0.5));
    CHECK(det.position == doctest::Approx(1.0 + p.values[50]));
}

TEST_CASE("stopping times land on the grid or within one step of it") {
    const StoppingRule rule = make_hit(0.5, constant_barrier(0.0, BoundarySide::lower));
    for (std::uint64_t id = 0; id < 300; ++id) {
        const StopOutcome o = run_rule(rule, 71, 0, id, 1e-2, 4.0);
        if (!o.stopped()) continue;
        const double k = std::round(o.time / 1e-2);
        CHECK(std::abs(o.time - k * 1e-2) <= 1e-2);
    }
}

TEST_CASE("hyperbolic law sampling matches its survival function") {
    const double b = 1.0;
    const std::int64_t n = 20000;
    const StoppingRule rule = make_hyperbolic_law(0.0, b);
    std::vector<double> checkpoints{0.5, 1.0, 2.0, 5.0};
    std::vector<std::int64_t> alive(checkpoints.size(), 0);
    for (std::int64_t i = 0; i < n; ++i) {
        const StopOutcome o = run_rule(rule, 55, 0, static_cast<std::uint64_t>(i), 1e-2, 100.0);
        const double tau = o.stopped() ? o.time : 1e300;
        for (std::size_t c = 0; c < checkpoints.size(); ++c)
            if (tau > checkpoints[c]) ++alive[c];
    }
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        const double p_true = b / (b + checkpoints[c]);
        const double p_hat = static_cast<double>(alive[c]) / static_cast<double>(n);
        const double se = std::sqrt(p_true * (1.0 - p_true) / static_cast<double>(n));
        CHECK(std::abs(p_hat - p_true) < 3.0 * se);
    }
}

TEST_CASE("boundary validation") {
    BoundarySpec sq;
    sq.kind = BoundaryKind::square_root;
    sq.a = 0.0;
    CHECK_THROWS_AS(sq.validate(), ValidationError);
    BoundarySpec lil;
    lil.kind = BoundaryKind::lil;
    lil.T = 2.0;
    CHECK_THROWS_AS(lil.validate(), ValidationError);
    lil.T = 3.0;
    CHECK_NOTHROW(lil.validate());
    CHECK_FALSE(lil.active(2.9));
    CHECK(lil.active(3.0));
    CHECK(lil.value(10.0) == doctest::Approx(std::sqrt(10.0 * std::log(std::log(10.0)))));
}

TEST_CASE("binary path dump round trip") {
    std::vector<PathSample> paths;
    for (std::uint64_t id = 0; id < 3; ++id) paths.push_back(simulate_path(9, id, 0.25, 1.0));
    std::stringstream ss;
    write_paths_binary(ss, paths);
    const auto back = read_paths_binary(ss);
    REQUIRE(back.size() == paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        CHECK(back[i].values == paths[i].values);
        CHECK(back[i].seed_id == paths[i].seed_id);
    }
}
