#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "stoplab/analytics.hpp"
#include "stoplab/core.hpp"
#include "stoplab/pathsim.hpp"
#include "stoplab/solver.hpp"

namespace stoplab {

enum class ScenarioId {
    e1_infinite_equilibria,
    e2_trivial_equilibrium,
    e3_shepp_equilibrium,
    e4_fkg,
    e5_breiman_table,
    e6_novikov,
};

const char* to_string(ScenarioId id);
ScenarioId scenario_from_string(const std::string& s);

struct EventPairSpec {
    PathEvent a, b;
};

struct ScenarioConfig {
    ScenarioId scenario = ScenarioId::e2_trivial_equilibrium;
    GameConfig game;
    std::vector<double> a_list;    // E1/E5
    double b = 1.0;                // E3
    std::vector<double> horizons;  // E1 doubling horizons
    std::vector<EventPairSpec> events; // E4; empty: built-in suite
    int fkg_seeds = 10;            // E4
    std::string output_dir = ".";
    int threads = 0;

    void validate() const;
};

// Strict JSON parsing; unknown keys raise ConfigError with JSON-pointer paths.
ScenarioConfig parse_config(const std::string& file_path);
ScenarioConfig scenario_from_json(const nlohmann::json& j);

StoppingRule rule_from_json(const nlohmann::json& j, const std::string& path = "");
nlohmann::json rule_to_json(const StoppingRule& r);
BoundarySpec boundary_from_json(const nlohmann::json& j, const std::string& path = "");

struct CheckLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ScenarioResult {
    bool pass = false;
    std::vector<CheckLine> checks;
    std::vector<std::string> artifacts; // file names inside output_dir
    nlohmann::json manifest;
};

// Runs one canned experiment, writing per-scenario CSV tables and a manifest
// into config.output_dir. Every output file is referenced by the manifest.
ScenarioResult run_scenario(const ScenarioConfig& config);

// Built-in increasing-event suite for E4.
std::vector<EventPairSpec> builtin_event_suite();

} // namespace stoplab
