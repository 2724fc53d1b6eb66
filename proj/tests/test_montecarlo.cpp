#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stoplab/analytics.hpp"
#include "stoplab/montecarlo.hpp"

using namespace stoplab;

namespace {

RewardSpec linear_reward() { return RewardSpec{}; } // f(x) = x

StoppingRule lower_hit(double x, double level) {
    BoundarySpec b;
    b.kind = BoundaryKind::constant;
    b.side = BoundarySide::lower;
    b.level = level;
    return make_hit(x, b);
}

StoppingRule upper_hit(double x, double level) {
    BoundarySpec b;
    b.kind = BoundaryKind::constant;
    b.side = BoundarySide::upper;
    b.level = level;
    return make_hit(x, b);
}

} // namespace

TEST_CASE("exact curves: immediate, deterministic, never") {
    const SurvivalCurve imm = SurvivalCurve::exact_immediate(4.0);
    CHECK(imm.survival_at(0.0) == 0.0);
    CHECK(imm.c_at(0.0) == 0.5);
    CHECK(imm.c_at(1.0) == 0.0);
    CHECK(imm.ess_sup == 0.0);

    const SurvivalCurve det = SurvivalCurve::exact_deterministic(2.0, 4.0);
    CHECK(det.survival_at(1.0) == 1.0);
    CHECK(det.c_at(1.0) == 1.0);
    CHECK(det.c_at(2.0) == 0.5); // half-atom at t*
    CHECK(det.c_at(3.0) == 0.0);
    CHECK(det.ess_sup == 2.0);

    const SurvivalCurve nev = SurvivalCurve::exact_never(4.0);
    CHECK(nev.c_at(0.0) == 1.0);
    CHECK(nev.c_at(100.0) == 1.0); // beyond the grid: p_infinite mass
    CHECK(nev.p_infinite == 1.0);
    CHECK(std::isinf(nev.ess_sup));
}

TEST_CASE("curve validation catches malformed data") {
    SurvivalCurve c;
    c.t_grid = {0.0, 1.0};
    c.survival = {0.5, 0.9};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.survival = {0.9, 0.5};
    CHECK_NOTHROW(c.validate());
    c.t_grid = {0.5, 1.0};
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("estimate_survival produces exact curves for law-known rules") {
    McOptions opt;
    opt.T_max = 4.0;
    const auto grid = uniform_grid(4.0, 0.5);

    const SurvivalCurve det = estimate_survival(make_deterministic(0.0, 2.0), 0.0, 10, grid, opt);
    CHECK(det.atoms.size() == 1);
    CHECK(det.atoms[0].first == 2.0);
    CHECK(det.atoms[0].second == 1.0);
    CHECK(det.c_at(2.0) == 0.5);

    const SurvivalCurve hyp =
        estimate_survival(make_hyperbolic_law(0.0, 2.0), 0.0, 10, grid, opt);
    CHECK(hyp.survival_at(2.0) == doctest::Approx(0.5));
}

TEST_CASE("estimated survival of a level hit tracks the reflection closed form") {
    // lower barrier -1 from x = 0
    McOptions opt;
    opt.dt = 1e-3;
    opt.T_max = 4.0;
    opt.seed = 2025;
    const auto grid = uniform_grid(4.0, 0.5);
    const SurvivalCurve c = estimate_survival(lower_hit(0.0, -1.0), 0.0, 20000, grid, opt);
    CHECK(c.horizon_truncated);
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const double p_true = hitting_tail(1.0, grid[g]);
        CHECK(std::abs(c.survival[g] - p_true) < 3.0 * c.survival_se[g] + 0.01);
        CHECK(c.survival[g] <= c.survival[g - 1]);
        CHECK(c.survival[g] >= 0.0);
        CHECK(c.survival[g] <= 1.0);
    }
}

TEST_CASE("payoff_reduced: immediate rule is exact") {
    McOptions opt;
    opt.T_max = 4.0;
    const SurvivalCurve nev = SurvivalCurve::exact_never(4.0);
    const EstimateWithCI e = payoff_reduced(make_immediate(3.0), 3.0, nev, linear_reward(), 100, opt);
    CHECK(e.mean == 3.0);
    CHECK(e.standard_error == 0.0);
}

TEST_CASE("payoff_reduced: bounded deterministic stop is a martingale evaluation") {
    McOptions opt;
    opt.dt = 1e-2;
    opt.T_max = 2.0;
    opt.seed = 7;
    const SurvivalCurve nev = SurvivalCurve::exact_never(2.0);
    const EstimateWithCI e =
        payoff_reduced(make_deterministic(1.5, 1.0), 1.5, nev, linear_reward(), 20000, opt);
    CHECK(std::abs(e.mean - 1.5) < 3.0 * e.standard_error);
}

TEST_CASE("payoff_reduced flags stops beyond a truncated opponent grid") {
    SurvivalCurve c;
    c.t_grid = {0.0, 1.0};
    c.survival = {1.0, 0.6};
    c.horizon_truncated = true;
    McOptions opt;
    opt.dt = 1e-2;
    opt.T_max = 3.0;
    const EstimateWithCI e =
        payoff_reduced(make_deterministic(0.0, 2.0), 0.0, c, linear_reward(), 50, opt);
    CHECK(e.truncation_warning);
    CHECK(e.mean == 0.0); // beyond the truncated grid contributes 0
}

TEST_CASE("payoff_direct trivia") {
    McOptions opt;
    opt.dt = 1e-3;
    opt.T_max = 4.0;

    // both immediate: the tie splits the rewards
    auto [a1, a2] = payoff_direct(make_immediate(2.0), make_immediate(4.0), 2.0, 4.0,
                                  linear_reward(), 500, opt);
    CHECK(a1.mean == 1.0);
    CHECK(a2.mean == 2.0);
    CHECK(a1.standard_error == 0.0);
    CHECK(a2.standard_error == 0.0);

    // strict priority of player 1
    auto [b1, b2] = payoff_direct(make_immediate(3.0), make_deterministic(0.0, 1.0), 3.0, 0.0,
                                  linear_reward(), 500, opt);
    CHECK(b1.mean == 3.0);
    CHECK(b2.mean == 0.0);

    // deterministic ordering: player 1 stops at 1, player 2 would stop at 2
    auto [c1, c2] = payoff_direct(make_deterministic(5.0, 1.0), make_deterministic(0.0, 2.0), 5.0,
                                  0.0, linear_reward(), 20000, opt);
    CHECK(std::abs(c1.mean - 5.0) < 3.0 * c1.standard_error);
    CHECK(c2.mean == 0.0);

    // both never: zero payoffs
    auto [d1, d2] = payoff_direct(make_never(1.0), make_never(1.0), 1.0, 1.0, linear_reward(),
                                  100, opt);
    CHECK(d1.mean == 0.0);
    CHECK(d2.mean == 0.0);
}

TEST_CASE("payoff_direct swaps with its arguments") {
    McOptions opt;
    opt.dt = 1e-3;
    opt.T_max = 2.0;
    auto [a1, a2] = payoff_direct(make_immediate(1.0), make_deterministic(2.0, 0.5), 1.0, 2.0,
                                  linear_reward(), 300, opt);
    auto [b1, b2] = payoff_direct(make_deterministic(2.0, 0.5), make_immediate(1.0), 2.0, 1.0,
                                  linear_reward(), 300, opt);
    CHECK(a1.mean == b2.mean);
    CHECK(a2.mean == b1.mean);
}

TEST_CASE("scaling the reward by a power of two scales payoffs exactly") {
    McOptions opt;
    opt.dt = 1e-2;
    opt.T_max = 2.0;
    RewardSpec f2 = linear_reward();
    f2.k = 2.0;
    const auto r1 = payoff_direct(upper_hit(0.0, 0.5), lower_hit(0.0, -0.5), 0.0, 0.0,
                                  linear_reward(), 2000, opt);
    const auto r2 = payoff_direct(upper_hit(0.0, 0.5), lower_hit(0.0, -0.5), 0.0, 0.0, f2, 2000,
                                  opt);
    CHECK(r2.first.mean == 2.0 * r1.first.mean);
    CHECK(r2.second.mean == 2.0 * r1.second.mean);

    const SurvivalCurve nev = SurvivalCurve::exact_never(2.0);
    const auto e1 = payoff_reduced(upper_hit(0.0, 0.5), 0.0, nev, linear_reward(), 2000, opt);
    const auto e2 = payoff_reduced(upper_hit(0.0, 0.5), 0.0, nev, f2, 2000, opt);
    CHECK(e2.mean == 2.0 * e1.mean);
}

TEST_CASE("non-negative rewards give non-negative payoff estimates") {
    RewardSpec absval;
    absval.kind = RewardKind::tabulated;
    absval.table = {{-1.0, 1.0}, {0.0, 0.0}, {1.0, 1.0}};
    McOptions opt;
    opt.dt = 1e-2;
    opt.T_max = 2.0;
    const auto r = payoff_direct(upper_hit(0.0, 0.4), lower_hit(0.0, -0.4), 0.0, 0.0, absval,
                                 2000, opt);
    CHECK(r.first.mean >= 0.0);
    CHECK(r.second.mean >= 0.0);
}

TEST_CASE("reduction consistency: exact on deterministic rule pairs") {
    McOptions opt;
    opt.dt = 1e-3;
    opt.T_max = 4.0;
    opt.seed = 31;

    const auto imm = reduction_consistency(make_immediate(1.0), make_immediate(2.0), 1.0, 2.0,
                                           linear_reward(), 2000, opt);
    CHECK(imm.discrepancy1 == 0.0);
    CHECK(imm.discrepancy2 == 0.0);

    const auto det = reduction_consistency(make_deterministic(1.0, 1.0),
                                           make_deterministic(0.0, 2.0), 1.0, 0.0,
                                           linear_reward(), 20000, opt);
    // common random numbers make the two estimators coincide sample by sample
    CHECK(det.discrepancy1 == 0.0);
    CHECK(det.discrepancy2 == 0.0);
}

TEST_CASE("reduction consistency: barrier rules agree within 3 SE") {
    McOptions opt;
    opt.dt = 1e-3;
    opt.T_max = 16.0;
    opt.seed = 33;
    const auto rep = reduction_consistency(upper_hit(0.0, 1.0), lower_hit(0.0, -1.0), 0.0, 0.0,
                                           linear_reward(), 20000, opt);
    CHECK(rep.se_units1 < 3.0);
    CHECK(rep.se_units2 < 3.0);
}

TEST_CASE("survival curve CSV round trip") {
    McOptions opt;
    opt.dt = 1e-2;
    opt.T_max = 2.0;
    const SurvivalCurve c =
        estimate_survival(lower_hit(0.5, 0.0), 0.5, 4000, uniform_grid(2.0, 0.25), opt);
    std::stringstream ss;
    c.write_csv(ss);
    const SurvivalCurve back = SurvivalCurve::read_csv(ss);
    REQUIRE(back.t_grid.size() == c.t_grid.size());
    for (std::size_t i = 0; i < c.t_grid.size(); ++i) {
        CHECK(back.t_grid[i] == c.t_grid[i]);
        CHECK(back.survival[i] == c.survival[i]);
    }
    CHECK(back.horizon_truncated == c.horizon_truncated);
    CHECK(back.p_infinite == c.p_infinite);
}

TEST_CASE("estimator outputs do not depend on the worker count") {
    McOptions one;
    one.dt = 1e-3;
    one.T_max = 2.0;
    one.threads = 1;
    McOptions two = one;
    two.threads = 2;
    const auto grid = uniform_grid(2.0, 0.25);
    const SurvivalCurve c1 = estimate_survival(lower_hit(0.0, -0.5), 0.0, 8000, grid, one);
    const SurvivalCurve c2 = estimate_survival(lower_hit(0.0, -0.5), 0.0, 8000, grid, two);
    CHECK(c1.survival == c2.survival);

    const auto p1 = payoff_direct(upper_hit(0.0, 0.5), lower_hit(0.0, -0.5), 0.0, 0.0,
                                  linear_reward(), 8000, one);
    const auto p2 = payoff_direct(upper_hit(0.0, 0.5), lower_hit(0.0, -0.5), 0.0, 0.0,
                                  linear_reward(), 8000, two);
    CHECK(p1.first.mean == p2.first.mean);
    CHECK(p1.second.mean == p2.second.mean);
    CHECK(p1.first.standard_error == p2.first.standard_error);
}
