#pragma once

#include <cstdint>
#include <string>

namespace stoplab::defaults {

// Versioned table of verdict thresholds and simulation defaults. Every
// acceptance check reads these constants; nothing is tuned per call site.
inline constexpr int kVersion = 1;
inline constexpr const char* kProjectVersion = "0.1.0";

// MC comparisons pass when within this many standard errors.
inline constexpr double kSeMultiplier = 3.0;

// Horizon-doubling growth factor that certifies an unbounded value trace.
inline constexpr double kGrowthFactor = 1.5;
inline constexpr int kGrowthDoublings = 3;

// Relative tolerance for extracted free boundaries.
inline constexpr double kBoundaryRtol = 0.05;

// Relative tolerance granted to lattice values when compared against exact
// payoffs (grid bias floor for deviation verdicts).
inline constexpr double kLatticeValueRtol = 0.005;

// Simulation defaults.
inline constexpr double kDt = 1e-3;
inline constexpr std::int64_t kNPaths = 100000;
inline constexpr double kTMax = 64.0;
inline constexpr std::uint64_t kSeed = 1;

// Empirical survival curves record an atom only when a single exact stop time
// carries at least this mass.
inline constexpr double kAtomMinMass = 0.01;

// Survivor count below which a tail-exponent fit is flagged unreliable.
inline constexpr std::int64_t kMinTailSurvivors = 100;

// JSON dump of the table (the generated reference page).
std::string table_json();

} // namespace stoplab::defaults
