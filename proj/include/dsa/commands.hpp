#pragma once

#include <string>
#include <vector>

#include "dsa/io.hpp"

namespace dsa {

// design: optional electrode placement, then the sequence search (or the
// override sequence), reported with the full candidate table.
Json run_design(const RunConfig& cfg);

// validate: success-rate estimates for `model` (continuous, discrete, both).
// The discrete model runs on the schedule retimed with discrete settling times.
Json run_validate(const RunConfig& cfg, const Schedule& sched, int trials, const std::string& model);

// simulate: one continuous trajectory from a uniform initial state.
Trajectory run_simulate(const RunConfig& cfg, const Schedule& sched, std::uint64_t seed);

struct SweepResult {
  std::vector<Json> reports;
  std::string csv;              // sigma,N_min,p_total,p_total_std_err
  int electrode_candidates = 0; // geometries evaluated over all grid points
};

// Grid over "sigma" and "N_min" lists (either may be absent; an explicitly
// empty list or an object with neither key gives an empty grid).
SweepResult run_sweep(const RunConfig& cfg, const Json& sweep);

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

}  // namespace dsa
