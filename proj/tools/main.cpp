// stoplab command line: canned experiments, closed-form helpers, lattice best
// responses, and equilibrium verification.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stoplab/analytics.hpp"
#include "stoplab/defaults.hpp"
#include "stoplab/montecarlo.hpp"
#include "stoplab/scenarios.hpp"
#include "stoplab/solver.hpp"

namespace {

int fail_json(const std::string& kind, const std::string& message) {
    nlohmann::json j;
    j["error"]["kind"] = kind;
    j["error"]["message"] = message;
    std::cerr << j.dump() << "\n";
    return 1;
}

std::string default_out_dir() {
    if (const char* env = std::getenv("STOPLAB_OUT_DIR")) return env;
    return ".";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stoplab: a numerical laboratory for two-player stopping games"};
    app.require_subcommand(1);

    // --- run ---
    auto* run = app.add_subcommand("run", "run a canned scenario from a JSON config");
    std::string run_config;
    std::string run_out;
    int run_threads = 0;
    run->add_option("config", run_config, "scenario config JSON")->required();
    run->add_option("--out", run_out, "output directory (overrides config)");
    run->add_option("--threads", run_threads, "worker thread count");

    // --- alpha ---
    auto* alpha = app.add_subcommand("alpha", "root of the immediate-stopping threshold equation");
    double alpha_tol = 1e-10;
    alpha->add_option("--tol", alpha_tol, "residual tolerance");

    // --- tail ---
    auto* tail = app.add_subcommand("tail", "first-passage survival P(sigma > t) from x");
    double tail_x = 1.0, tail_t = 1.0;
    tail->add_option("x", tail_x, "starting distance from the barrier")->required();
    tail->add_option("t", tail_t, "time")->required();

    // --- best-response ---
    auto* br = app.add_subcommand("best-response",
                                  "lattice best response against a survival curve");
    std::string br_curve, br_reward, br_out;
    double br_T = 16.0, br_dt = 1e-3, br_dx = 0.02, br_x0 = 0.0;
    br->add_option("curve", br_curve, "survival curve CSV")->required();
    br->add_option("reward", br_reward, "reward JSON file")->required();
    br->add_option("--T", br_T, "horizon");
    br->add_option("--dt", br_dt, "time step");
    br->add_option("--dx", br_dx, "space step");
    br->add_option("--x0", br_x0, "evaluation point / lattice center");
    br->add_option("--out", br_out, "output directory");

    // --- verify ---
    auto* verify = app.add_subcommand("verify", "equilibrium check for a rule pair");
    std::string verify_rules, verify_out;
    verify->add_option("rules", verify_rules, "rules JSON file")->required();
    verify->add_option("--out", verify_out, "write the report JSON here");

    // --- defaults ---
    app.add_subcommand("defaults", "print the versioned defaults table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            stoplab::ScenarioConfig cfg;
            try {
                cfg = stoplab::parse_config(run_config);
            } catch (const stoplab::ConfigError& e) {
                return fail_json("config", e.what());
            } catch (const stoplab::ValidationError& e) {
                return fail_json("config", e.what());
            }
            if (!run_out.empty()) cfg.output_dir = run_out;
            if (run_threads > 0) cfg.threads = run_threads;
            const stoplab::ScenarioResult res = stoplab::run_scenario(cfg);
            for (const auto& c : res.checks)
                std::cout << (c.pass ? "PASS" : "FAIL") << ": " << c.name << " — " << c.detail
                          << "\n";
            std::cout << (res.pass ? "PASS" : "FAIL") << ": " << to_string(cfg.scenario) << "\n";
            return res.pass ? 0 : 2;
        }

        if (alpha->parsed()) {
            const double a = stoplab::shepp_alpha(alpha_tol);
            std::printf("alpha = %.12f\n", a);
            std::printf("residual (quadrature)  = %.3e\n", stoplab::shepp_F(a));
            std::printf("residual (closed form) = %.3e\n", stoplab::shepp_F_closed_form(a));
            return 0;
        }

        if (tail->parsed()) {
            const double p = stoplab::hitting_tail(tail_x, tail_t);
            std::printf("P(sigma > t)           = %.12f\n", p);
            if (tail_t > 0.0) {
                const double bound = stoplab::hitting_tail_lower_bound(tail_x, tail_t);
                std::printf("lower bound |x|/sqrt(pi t) = %.12f%s\n", bound,
                            tail_t >= tail_x * tail_x ? "" : "  (valid for t >= x^2)");
            }
            return 0;
        }

        if (br->parsed()) {
            std::ifstream cs(br_curve);
            if (!cs) return fail_json("io", "cannot open curve CSV: " + br_curve);
            const stoplab::SurvivalCurve curve = stoplab::SurvivalCurve::read_csv(cs);
            std::ifstream rs(br_reward);
            if (!rs) return fail_json("io", "cannot open reward JSON: " + br_reward);
            nlohmann::json rj;
            rs >> rj;
            const stoplab::RewardSpec reward = stoplab::reward_from_json(rj);
            stoplab::LatticeParams p;
            p.T_max = br_T;
            p.dt = br_dt;
            p.dx = br_dx;
            p.x_center = br_x0;
            const stoplab::Lattice lat = stoplab::best_response(curve, reward, p);
            const std::filesystem::path dir = br_out.empty() ? default_out_dir() : br_out;
            std::filesystem::create_directories(dir);
            {
                std::ofstream os(dir / "boundary.csv", std::ios::binary);
                lat.write_boundary_csv(os);
            }
            {
                std::ofstream os(dir / "values.bin", std::ios::binary);
                lat.write_values_binary(os);
            }
            std::printf("V(0, %.6g) = %.12g\n", br_x0, lat.value_at0(br_x0));
            std::printf("boundary at t=0: %.12g\n", lat.boundary.front());
            std::printf("wrote %s and %s\n", (dir / "boundary.csv").c_str(),
                        (dir / "values.bin").c_str());
            return 0;
        }

        if (verify->parsed()) {
            std::ifstream rs(verify_rules);
            if (!rs) return fail_json("io", "cannot open rules JSON: " + verify_rules);
            nlohmann::json j;
            try {
                rs >> j;
            } catch (const nlohmann::json::exception& e) {
                return fail_json("config", std::string("rules file is not valid JSON: ") + e.what());
            }
            stoplab::GameConfig game;
            stoplab::StoppingRule r1, r2;
            double significance = stoplab::defaults::kSeMultiplier;
            try {
                if (j.contains("game")) game = stoplab::game_from_json(j.at("game"), "/game");
                if (!j.contains("rule1") || !j.contains("rule2"))
                    return fail_json("config", "/rule1 and /rule2 are required");
                r1 = stoplab::rule_from_json(j.at("rule1"), "/rule1");
                r2 = stoplab::rule_from_json(j.at("rule2"), "/rule2");
                if (j.contains("significance")) significance = j.at("significance").get<double>();
            } catch (const stoplab::ConfigError& e) {
                return fail_json("config", e.what());
            }
            const stoplab::EquilibriumReport rep =
                stoplab::verify_equilibrium(r1, r2, game, significance);
            const std::string text = rep.to_json().dump(2);
            if (!verify_out.empty()) {
                std::ofstream os(verify_out, std::ios::binary);
                os << text << '\n';
            }
            std::cout << text << "\n";
            return rep.verdict == stoplab::Verdict::profitable_deviation_found ? 3 : 0;
        }

        // defaults
        std::cout << stoplab::defaults::table_json() << "\n";
        return 0;
    } catch (const stoplab::NumericalInconsistencyError& e) {
        std::cerr << "numerical inconsistency: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        return fail_json("runtime", e.what());
    }
}
