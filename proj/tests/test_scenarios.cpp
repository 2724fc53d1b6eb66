#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "stoplab/scenarios.hpp"

using namespace stoplab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "stoplab-tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("minimal scenario config populates documented defaults") {
    nlohmann::json j;
    j["scenario"] = "E2-trivial-equilibrium";
    const ScenarioConfig cfg = scenario_from_json(j);
    CHECK(cfg.game.dt == 1e-3);
    CHECK(cfg.game.n_paths == 100000);
    CHECK(cfg.fkg_seeds == 10);
}

TEST_CASE("unknown keys are named in config errors") {
    nlohmann::json j;
    j["scenario"] = "E2-trivial-equilibrium";
    j["game"]["gama"] = 1.0;
    CHECK_THROWS_WITH_AS(scenario_from_json(j), "/game/gama: unknown key", ConfigError);

    nlohmann::json top;
    top["scenario"] = "E2-trivial-equilibrium";
    top["outputdir"] = "/tmp";
    CHECK_THROWS_AS(scenario_from_json(top), ConfigError);
}

TEST_CASE("game preconditions surface as config errors") {
    nlohmann::json j;
    j["scenario"] = "E2-trivial-equilibrium";
    j["game"]["dt"] = 0.0;
    CHECK_THROWS_AS(scenario_from_json(j), ConfigError);
}

TEST_CASE("rule and boundary JSON") {
    nlohmann::json j;
    j["kind"] = "composite-tau-a";
    j["a"] = 2.0;
    j["x"] = -1.0;
    const StoppingRule r = rule_from_json(j);
    CHECK(r.kind == RuleKind::composite_tau_a);
    CHECK(r.a == 2.0);

    nlohmann::json h;
    h["kind"] = "hit";
    h["boundary"]["kind"] = "square-root";
    h["boundary"]["a"] = 1.5;
    h["boundary"]["side"] = "upper";
    const StoppingRule hr = rule_from_json(h);
    CHECK(hr.boundary.kind == BoundaryKind::square_root);

    nlohmann::json bad;
    bad["kind"] = "law-survival";
    CHECK_THROWS_AS(rule_from_json(bad), ConfigError); // needs law_b or a table

    nlohmann::json unknown;
    unknown["kind"] = "psychic";
    CHECK_THROWS_AS(rule_from_json(unknown), ConfigError);
}

TEST_CASE("E2 writes exact payoffs, a manifest, and no orphan artifacts") {
    ScenarioConfig cfg;
    cfg.scenario = ScenarioId::e2_trivial_equilibrium;
    cfg.game.x1 = 1.0;
    cfg.game.x2 = 2.0;
    cfg.game.T_max = 2.0;
    cfg.game.n_paths = 2000;
    cfg.game.seed = 5;
    const auto dir = fresh_dir("e2");
    cfg.output_dir = dir.string();
    const ScenarioResult res = run_scenario(cfg);
    CHECK(res.pass);

    const std::string payoffs = slurp(dir / "payoffs.csv");
    CHECK(payoffs.find("1,0.5,") != std::string::npos);
    CHECK(payoffs.find("2,1,") != std::string::npos);

    // every file in the output dir is referenced by the manifest
    std::set<std::string> listed(res.artifacts.begin(), res.artifacts.end());
    for (const auto& entry : fs::directory_iterator(dir))
        CHECK(listed.count(entry.path().filename().string()) == 1);
    CHECK(res.manifest.at("pass").get<bool>());
}

TEST_CASE("E2 detects the deviation for a negative start") {
    ScenarioConfig cfg;
    cfg.scenario = ScenarioId::e2_trivial_equilibrium;
    cfg.game.x1 = -1.0;
    cfg.game.x2 = 2.0;
    cfg.game.T_max = 2.0;
    cfg.game.n_paths = 2000;
    cfg.game.seed = 5;
    cfg.output_dir = fresh_dir("e2neg").string();
    const ScenarioResult res = run_scenario(cfg);
    CHECK(res.pass); // PASS by detecting the deviation
    bool found = false;
    for (const auto& c : res.checks)
        if (c.name.find("deviation") != std::string::npos) found = found || c.pass;
    CHECK(found);
}

TEST_CASE("scenario CSV artifacts are byte-identical across thread counts") {
    auto run_with = [&](int threads, const std::string& tag) {
        ScenarioConfig cfg;
        cfg.scenario = ScenarioId::e2_trivial_equilibrium;
        cfg.game.x1 = 1.0;
        cfg.game.x2 = 2.0;
        cfg.game.T_max = 2.0;
        cfg.game.n_paths = 4000;
        cfg.game.seed = 11;
        cfg.threads = threads;
        const auto dir = fresh_dir(tag);
        cfg.output_dir = dir.string();
        run_scenario(cfg);
        return slurp(dir / "payoffs.csv");
    };
    CHECK(run_with(1, "t1") == run_with(2, "t2"));
}

TEST_CASE("E1 rejects nonzero starts and writes a monotone growth table") {
    ScenarioConfig bad;
    bad.scenario = ScenarioId::e1_infinite_equilibria;
    bad.game.x1 = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    ScenarioConfig cfg;
    cfg.scenario = ScenarioId::e1_infinite_equilibria;
    cfg.game.n_paths = 20000;
    cfg.game.seed = 9;
    cfg.a_list = {4.0};
    cfg.horizons = {16.0, 32.0, 64.0, 128.0};
    const auto dir = fresh_dir("e1");
    cfg.output_dir = dir.string();
    const ScenarioResult res = run_scenario(cfg);
    REQUIRE(res.checks.size() == 1);

    std::ifstream csv(dir / "growth_a4.csv");
    std::string line;
    std::getline(csv, line); // header
    double prev = -1.0;
    int rows = 0;
    while (std::getline(csv, line)) {
        std::stringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        std::getline(row, cell, ',');
        const double j = std::stod(cell);
        CHECK(j >= prev); // truncated payoffs increase with the horizon
        prev = j;
        ++rows;
    }
    CHECK(rows == 4);
}

TEST_CASE("E4 passes on the built-in suite at small n") {
    ScenarioConfig cfg;
    cfg.scenario = ScenarioId::e4_fkg;
    cfg.game.n_paths = 2000;
    cfg.game.dt = 1e-2;
    cfg.game.seed = 17;
    cfg.fkg_seeds = 2;
    cfg.output_dir = fresh_dir("e4").string();
    const ScenarioResult res = run_scenario(cfg);
    CHECK(res.pass);
}

TEST_CASE("E5 orders the tail exponents at small n") {
    ScenarioConfig cfg;
    cfg.scenario = ScenarioId::e5_breiman_table;
    cfg.game.n_paths = 3000;
    cfg.game.seed = 21;
    cfg.a_list = {1.0, 3.0};
    cfg.output_dir = fresh_dir("e5").string();
    const ScenarioResult res = run_scenario(cfg);
    CHECK(res.pass);
}

TEST_CASE("E3 verifies the one-sided equilibrium at small n") {
    ScenarioConfig cfg;
    cfg.scenario = ScenarioId::e3_shepp_equilibrium;
    cfg.game.x1 = 1.0;
    cfg.game.x2 = -0.5;
    cfg.game.T_max = 8.0;
    cfg.game.n_paths = 2000;
    cfg.game.seed = 23;
    cfg.b = 1.0;
    cfg.output_dir = fresh_dir("e3").string();
    const ScenarioResult res = run_scenario(cfg);
    for (const auto& c : res.checks)
        INFO(c.name, ": ", c.detail);
    CHECK(res.pass);
}
