#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dsa/control_design.hpp"
#include "dsa/discrete.hpp"
#include "dsa/random.hpp"
#include "dsa/steady_prob.hpp"
#include "dsa/types.hpp"

namespace dsa {

// Rejection recursion reached its floor without an admissible step.
class StepFloor : public ConvergenceFailure {
 public:
  StepFloor(const std::string& what, State at, double t) : ConvergenceFailure(what), position(std::move(at)), time(t) {}
  State position;
  double time;
};

// Sampled path. `stage` is the 0-based index of the control in force;
// stages.size() marks the static control.
struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<int> stage;
  std::vector<double> events;  // switch instants crossed
};

struct JumpTrajectory {
  std::vector<double> times;  // jump instants, first entry 0
  std::vector<int> states;    // state index held from times[k] on
  std::vector<int> stage;
  std::vector<double> events;
  double t_end = 0.0;
};

struct SdeOptions {
  std::size_t max_samples = 10000;  // output decimation
  bool record = true;               // false keeps only the terminal state
  int max_halvings = 30;            // floor dt / 2^30; 10 gives the classic dt / 1024
};

// Schedule holding one control for `duration` (no dynamic stages).
Schedule constant_schedule(const Geometry& g, const Pattern& p, const ControlVector& u, double sigma,
                           double duration);

// Euler-Maruyama. A step that breaks the ordering, leaves (q_0, q_c), moves a
// particle across an electrode charged in the current stage, or whose drift
// displacement exceeds half the distance to the next neighbour or charged
// electrode ahead is split in two halves with a Brownian-bridge draw of the
// midpoint increment.
Trajectory simulate_sde(const State& x0, const Schedule& sched, const NoiseParams& np, double dt, std::uint64_t seed,
                        const SdeOptions& opts = {});

// Gillespie's direct method on the generator of each stage in turn.
JumpTrajectory simulate_ssa(int z0, const Schedule& sched, const std::vector<Generator>& generators,
                            std::uint64_t seed, bool record = true);
JumpTrajectory simulate_ssa(int z0, const Schedule& sched, const DiscreteStateSpace& ss, const NoiseParams& np,
                            std::uint64_t seed);

// One generator per stage followed by the static one.
std::vector<Generator> stage_generators(const Schedule& sched, const DiscreteStateSpace& ss, const NoiseParams& np);

// Time spent in each state.
Eigen::VectorXd occupation_times(const JumpTrajectory& traj, int states);

enum class Model { Continuous, Discrete };

struct SimOptions {
  double dt = 1e-4;
  int max_halvings = 30;
  double min_gap = 0.02;  // continuous initial states: least particle-particle and particle-electrode gap
  int state_cap = 20;  // discrete model
};

// Uniform initial state over S_0 (sorted uniform draws), redrawn while any
// gap between neighbours or to an electrode is below `min_gap`.
State uniform_initial_state(const Geometry& g, Rng& rng, double min_gap = kSingularFloor);

ProbEstimate estimate_success(const Schedule& sched, const Pattern& p, Model model, int trials, std::uint64_t seed,
                              const SimOptions& opts = {});

// Same schedule with every duration replaced by the discrete settling time
// of its starting block, each capped at `max_duration`.
struct Retimed {
  Schedule schedule;
  std::vector<double> settling;  // uncapped discrete settling per stage, static last
  bool capped = false;
};

Retimed retime_discrete(const Schedule& sched, const DiscreteStateSpace& ss, double max_duration);

// Header t,x1,...,xn,stage.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace dsa
