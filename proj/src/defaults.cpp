#include "stoplab/defaults.hpp"

#include <json.hpp>

namespace stoplab::defaults {

std::string table_json() {
    nlohmann::json j;
    j["defaults_version"] = kVersion;
    j["project_version"] = kProjectVersion;
    j["se_multiplier"] = kSeMultiplier;
    j["growth_factor"] = kGrowthFactor;
    j["growth_doublings"] = kGrowthDoublings;
    j["boundary_rtol"] = kBoundaryRtol;
    j["lattice_value_rtol"] = kLatticeValueRtol;
    j["dt"] = kDt;
    j["n_paths"] = kNPaths;
    j["T_max"] = kTMax;
    j["seed"] = kSeed;
    j["atom_min_mass"] = kAtomMinMass;
    j["min_tail_survivors"] = kMinTailSurvivors;
    return j.dump(2);
}

} // namespace stoplab::defaults
