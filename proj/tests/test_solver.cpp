#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stoplab/analytics.hpp"
#include "stoplab/montecarlo.hpp"
#include "stoplab/solver.hpp"

using namespace stoplab;

namespace {

RewardSpec linear_reward(double k = 1.0, double b = 0.0) {
    RewardSpec f;
    f.k = k;
    f.b = b;
    return f;
}

LatticeParams quick_params(double T, double x_center) {
    LatticeParams p;
    p.dt = 1e-3;
    p.dx = 0.02;
    p.T_max = T;
    p.x_center = x_center;
    return p;
}

SurvivalCurve curve_of(const std::function<double(double)>& s, double T, double dt) {
    return SurvivalCurve::from_function(s, uniform_grid(T, dt));
}

} // namespace

TEST_CASE("zero discount kills all payoffs") {
    const auto c = curve_of([](double) { return 0.0; }, 2.0, 1e-3);
    const Lattice lat = best_response(c, linear_reward(), quick_params(2.0, 0.0));
    for (double v : lat.v0) CHECK(v == 0.0);
    // ties flagged as stop
    for (auto f : lat.stop0) CHECK(f == 1);
}

TEST_CASE("hyperbolic discount: immediate stopping above the threshold") {
    const double alpha = shepp_alpha(1e-10);
    const auto c = SurvivalCurve::hyperbolic(1.0, uniform_grid(20.0, 2e-3));
    LatticeParams p = quick_params(20.0, 1.0);
    p.dt = 2e-3;
    const Lattice lat = best_response(c, linear_reward(), p);
    double first_stop = 1e300;
    for (std::size_t j = 0; j < lat.nx(); ++j)
        if (lat.stop0[j]) {
            first_stop = lat.x_grid[j];
            break;
        }
    // the finite-horizon stop region reaches down to (and slightly below) the
    // infinite-horizon threshold alpha*sqrt(b)
    CHECK(first_stop <= alpha * 1.02);
    CHECK(first_stop >= 0.70);
    // stopping value is exact at x = 1 >= alpha
    CHECK(lat.value_at0(1.0) == 1.0);
}

TEST_CASE("hyperbolic discount: stop threshold converges with the grid") {
    // at two refinement levels the time-zero stop region reaches down to
    // alpha*sqrt(b) within a shrinking grid tolerance
    const double alpha = shepp_alpha(1e-10);
    auto first_stop = [&](double dx, double dt) {
        LatticeParams p;
        p.dx = dx;
        p.dt = dt;
        p.T_max = 20.0;
        p.x_center = 1.0;
        const auto c = SurvivalCurve::hyperbolic(1.0, uniform_grid(20.0, dt));
        const Lattice lat = best_response(c, linear_reward(), p);
        for (std::size_t j = 0; j < lat.nx(); ++j)
            if (lat.stop0[j]) return lat.x_grid[j];
        return 1e300;
    };
    const double coarse = first_stop(0.04, 4e-3);
    const double fine = first_stop(0.02, 2e-3);
    CHECK(coarse <= alpha * 1.05);
    CHECK(fine <= alpha * 1.02);
    CHECK(coarse > 0.6);
    CHECK(fine > 0.6);
}

TEST_CASE("exponential discount: extracted boundary near the smooth-fit oracle") {
    // c(t) = e^{-rt}, f(x) = x: boundary = 1/sqrt(2r), from 0.5*V'' = r*V with
    // value matching and smooth fit at the boundary
    const double r = 0.5;
    const auto c = curve_of([r](double t) { return std::exp(-r * t); }, 14.0, 1e-3);
    const Lattice lat = best_response(c, linear_reward(), quick_params(14.0, 1.0));
    const double oracle = 1.0 / std::sqrt(2.0 * r);
    for (double t : {0.0, 0.5, 1.0})
        CHECK(std::abs(lat.boundary_at(t) - oracle) <= 0.05 * oracle);
}

TEST_CASE("lattice invariants: dominance, up-closedness, stored slices") {
    const auto c = curve_of([](double t) { return 1.0 / (1.0 + t); }, 4.0, 1e-3);
    RewardSpec f = linear_reward(2.0, 1.0);
    const Lattice lat = best_response(c, f, quick_params(4.0, 0.0));
    CHECK(lat.upclosed_violations == 0);
    for (std::size_t s = 0; s < lat.stored_idx.size(); ++s) {
        const std::size_t k = lat.stored_idx[s];
        const double ck = c.c_at(lat.t_grid[k]);
        for (std::size_t j = 0; j < lat.nx(); ++j) {
            const double imm = ck * eval_reward(f, lat.x_grid[j]);
            CHECK(lat.value[s * lat.nx() + j] >= imm - 1e-12 * std::max(1.0, std::abs(imm)));
        }
    }
}

TEST_CASE("value is monotone in the horizon") {
    const auto cf = [](double t) { return std::exp(-0.5 * t); };
    LatticeParams p = quick_params(2.0, 0.0);
    const Lattice l2 = best_response(curve_of(cf, 2.0, 1e-3), linear_reward(), p);
    p.T_max = 4.0;
    const Lattice l4 = best_response(curve_of(cf, 4.0, 1e-3), linear_reward(), p);
    const std::size_t off = (l4.nx() - l2.nx()) / 2;
    REQUIRE(l4.x_grid[off] == doctest::Approx(l2.x_grid[0]));
    for (std::size_t j = 0; j < l2.nx(); ++j) CHECK(l4.v0[j + off] >= l2.v0[j]);
}

TEST_CASE("stop flags are invariant under scaling the reward by two") {
    const auto c = SurvivalCurve::hyperbolic(1.0, uniform_grid(6.0, 1e-3));
    const Lattice a = best_response(c, linear_reward(1.0), quick_params(6.0, 1.0));
    const Lattice b = best_response(c, linear_reward(2.0), quick_params(6.0, 1.0));
    CHECK(a.stop0 == b.stop0);
    for (std::size_t j = 0; j < a.nx(); ++j) CHECK(b.v0[j] == 2.0 * a.v0[j]);
    CHECK(a.boundary == b.boundary);
}

TEST_CASE("lattice configuration errors") {
    const auto c = curve_of([](double) { return 1.0; }, 1.0, 1e-2);
    LatticeParams p = quick_params(2.0, 0.0);
    // curve does not cover the horizon
    CHECK_THROWS_AS(best_response(c, linear_reward(), p), DomainError);
    LatticeParams narrow = quick_params(1.0, 0.0);
    narrow.width_sigmas = 2.0;
    const auto c1 = curve_of([](double) { return 1.0; }, 1.0, 1e-2);
    CHECK_THROWS_AS(best_response(c1, linear_reward(), narrow), ConfigError);
}

TEST_CASE("classification: exponential discount is finite and stabilizes") {
    LatticeParams base = quick_params(1.0, 0.0);
    const std::vector<double> horizons{2.0, 4.0, 8.0, 16.0};
    const auto rep = classify_divergence(
        [](double T) { return curve_of([](double t) { return std::exp(-t); }, T, 1e-3); },
        linear_reward(), horizons, 0.0, base, 1.1);
    CHECK_FALSE(rep.infinite);
    CHECK(rep.ratios.back() < 1.01); // relative change < 1% at the last doubling
}

TEST_CASE("classification: no discount diverges like sqrt(T)") {
    LatticeParams base = quick_params(1.0, 0.0);
    const std::vector<double> horizons{4.0, 8.0, 16.0, 32.0};
    const auto rep = classify_divergence(
        [](double T) { return curve_of([](double) { return 1.0; }, T, 2e-3); }, linear_reward(),
        horizons, 0.0, base, 1.1);
    CHECK(rep.infinite);
    for (double r : rep.ratios) {
        CHECK(r > 1.30);
        CHECK(r < 1.50);
    }
    CHECK(rep.lil_proxy > 0.5); // min of sqrt(t log log t) at the decade start
}

TEST_CASE("classification: t^{-1/4} discount still diverges") {
    LatticeParams base = quick_params(1.0, 0.0);
    const std::vector<double> horizons{8.0, 16.0, 32.0, 64.0};
    const auto rep = classify_divergence(
        [](double T) {
            return curve_of([](double t) { return std::min(1.0, std::pow(t, -0.25)); }, T, 2e-3);
        },
        linear_reward(), horizons, 0.0, base, 1.1);
    CHECK(rep.infinite);
    for (double r : rep.ratios) CHECK(r > 1.1);
}

TEST_CASE("classification rejects non-monotone traces") {
    LatticeParams base = quick_params(1.0, 0.0);
    const std::vector<double> horizons{2.0, 4.0, 8.0, 16.0};
    // a discount that collapses for longer horizons shrinks the value
    CHECK_THROWS_AS(classify_divergence(
                        [](double T) {
                            const double level = T < 5.0 ? 1.0 : 1e-6;
                            return curve_of([level](double) { return level; }, T, 1e-2);
                        },
                        linear_reward(), horizons, 0.0, base, 1.5),
                    NumericalInconsistencyError);
}

TEST_CASE("LIL stopping rule certifies unbounded truncated payoffs") {
    // under c == 1, payoffs from the LIL rule grow with its activation time
    const SurvivalCurve nev = SurvivalCurve::exact_never(1e9);
    McOptions opt;
    opt.dt = 0.05;
    opt.seed = 12;
    double prev = 0.0;
    for (double T : {3.0, 10.0, 30.0}) {
        BoundarySpec lil;
        lil.kind = BoundaryKind::lil;
        lil.T = T;
        opt.T_max = 48.0 * T;
        const EstimateWithCI e =
            payoff_reduced(make_hit(0.0, lil), 0.0, nev, linear_reward(), 2000, opt);
        CHECK(e.mean > prev);
        prev = e.mean;
    }
    CHECK(prev > 3.0); // beats sqrt(30 log log 30) / 2 comfortably
}

TEST_CASE("negative-region stop audit") {
    McOptions opt;
    opt.dt = 1e-3;
    opt.T_max = 4.0;
    const SurvivalCurve nev = SurvivalCurve::exact_never(4.0);

    const EstimateWithCI clean = negative_stop_audit(make_immediate(3.0), nev, 3.0, 2000, opt);
    CHECK(clean.mean == 0.0);

    const EstimateWithCI half =
        negative_stop_audit(make_deterministic(0.0, 1.0), nev, 0.0, 20000, opt);
    CHECK(std::abs(half.mean - 0.5) < 3.0 * half.standard_error);

    const EstimateWithCI comp = negative_stop_audit(make_composite_tau_a(0.0, 1.0), nev, 0.0,
                                                    2000, opt);
    CHECK(comp.mean == 0.0);
}

TEST_CASE("verify_equilibrium: both trivial rules at non-negative starts") {
    GameConfig g;
    g.x1 = 1.0;
    g.x2 = 2.0;
    g.T_max = 4.0;
    g.n_paths = 2000;
    g.seed = 3;
    VerifyOptions vo;
    vo.lattice = quick_params(4.0, 0.0);
    const auto rep = verify_equilibrium(make_immediate(1.0), make_immediate(2.0), g, 3.0, vo);
    CHECK(rep.player1.j.mean == 0.5);
    CHECK(rep.player2.j.mean == 1.0);
    CHECK(rep.player1.v == 0.5);
    CHECK(rep.player2.v == 1.0);
    CHECK(rep.verdict == Verdict::equilibrium_consistent);
}

TEST_CASE("verify_equilibrium: a negative start player deviates to never") {
    GameConfig g;
    g.x1 = -1.0;
    g.x2 = 2.0;
    g.T_max = 4.0;
    g.n_paths = 2000;
    g.seed = 3;
    VerifyOptions vo;
    vo.lattice = quick_params(4.0, 0.0);
    const auto rep = verify_equilibrium(make_immediate(-1.0), make_immediate(2.0), g, 3.0, vo);
    CHECK(rep.player1.j.mean == -0.5);
    CHECK(rep.verdict == Verdict::profitable_deviation_found);
    CHECK(rep.player1.v == 0.0); // waiting forever yields zero
    CHECK(rep.player1.best_deviation >= 0.0);
    const auto j = rep.to_json();
    CHECK(j.at("verdict").get<std::string>() == "profitable-deviation-found");
}

TEST_CASE("lattice exports") {
    const auto c = curve_of([](double t) { return std::exp(-t); }, 1.0, 1e-2);
    LatticeParams p = quick_params(1.0, 0.0);
    p.dt = 1e-2;
    const Lattice lat = best_response(c, linear_reward(), p);
    std::stringstream csv;
    lat.write_boundary_csv(csv);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "t,b");
    std::stringstream bin;
    lat.write_values_binary(bin);
    CHECK(bin.str().size() > 32);
}
