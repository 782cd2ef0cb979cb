#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dsa/roa.hpp"
#include "dsa/steady_prob.hpp"
#include "dsa/types.hpp"

namespace dsa {

class InfeasiblePattern : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InconsistentRefinement : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class TooManySequences : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct DesignOptions {
  double u_max = 50.0;
  double u_min = 0.05;            // lower bound on every free charge
  int restarts = 8;               // random starts; the warm start is extra
  bool warm_start = true;
  int objective_samples = 8192;   // fixed per optimizer run (common random numbers)
  int final_samples = 200000;     // fresh exact-MC re-estimate of the result
  int max_evaluations = 1500;     // per restart
  double f_tol = 1e-7;
  double x_tol = 1e-3;
  double initial_step = 0.3;
  double saturation = 0.999;      // probabilities above this count as certain
  double tie_weight = 1e-6;       // weight of sum (ln u_k)^2 among equal probabilities
  int max_interior = 4;           // enumeration cap for the sequence search
  std::uint64_t seed = 1;
};

struct OptimizerDiagnostics {
  int evaluations = 0;
  int restarts_run = 0;
  int stalled_restarts = 0;       // restarts that exhausted max_evaluations
  double objective = 0.0;         // best objective value found
  std::vector<double> restart_objectives;
  bool stalled() const { return stalled_restarts == restarts_run && restarts_run > 0; }
};

struct StaticDesign {
  ControlVector u;
  State x_ss;
  ProbEstimate prob;              // final exact-MC estimate
  ProbEstimate prob_saddle;       // final saddle-point estimate
  double settling = 0.0;
  OptimizerDiagnostics diag;
};

struct StagePlan {
  ActiveSet active;
  ControlVector u;
  Composition from_nu;
  Composition target_nu;
  State x_eq;
  ProbEstimate p_stage;           // final exact-MC estimate
  ProbEstimate p_stage_saddle;
  double duration = 0.0;
  OptimizerDiagnostics diag;
};

// Ordered set partition of the interior electrodes.
using ActivationSequence = std::vector<std::vector<int>>;

std::string to_string(const ActivationSequence& seq);

struct Schedule {
  Geometry geometry;
  Pattern pattern;
  double sigma = 0.0;
  ActivationSequence sequence;
  std::vector<StagePlan> stages;
  ControlVector static_u;
  State static_x_ss;
  ProbEstimate p_static;
  double static_settling = 0.0;
  std::vector<double> switch_times;  // t_d^1 .. t_d^D, t_f
  double p_total = 0.0;
  double p_total_std_err = 0.0;      // delta method over the factors

  double t_final() const { return switch_times.back(); }
  // Control in force at time t: stage i on [t_d^{i-1}, t_d^i), static afterwards.
  const ControlVector& control_at(double t) const;
  int stage_at(double t) const;      // 0-based stage index, stages.size() for static
};

enum class SurrogateVariant { InfNorm, MeanSquare };

ProbEstimate p_stage_estimate(const Composition& from, const Composition& to, const State& x_eq,
                              const ControlVector& u, const Geometry& g, const NoiseParams& np, int samples,
                              std::uint64_t seed, ProbMethod method);

ControlVector surrogate_static(const Pattern& p, const Geometry& g, const NoiseParams& np, SurrogateVariant variant,
                              const DesignOptions& opts = {});

StaticDesign optimize_static(const Pattern& p, const Geometry& g, const NoiseParams& np,
                             const DesignOptions& opts = {});

StagePlan optimize_stage(const Composition& from_nu, const Composition& to_nu, const ActiveSet& active,
                         const Geometry& g, const NoiseParams& np, const DesignOptions& opts = {});

// Reuses stage and static results across schedules of the same pattern.
class DesignCache {
 public:
  const StaticDesign& static_design(const Pattern& p, const Geometry& g, const NoiseParams& np,
                                    const DesignOptions& opts);
  const StagePlan& stage(const Composition& from, const Composition& to, const ActiveSet& active,
                         const Geometry& g, const NoiseParams& np, const DesignOptions& opts);

 private:
  std::vector<std::pair<std::string, StaticDesign>> statics_;
  std::map<std::string, StagePlan> stages_;
};

Schedule plan_schedule(const Pattern& p, const Geometry& g, const NoiseParams& np, const ActivationSequence& sequence,
                       const DesignOptions& opts = {}, DesignCache* cache = nullptr);

// All ordered set partitions of `items`, fewer blocks first, then lexicographic.
std::vector<ActivationSequence> ordered_set_partitions(const std::vector<int>& items);

struct SequenceSearch {
  std::vector<Schedule> candidates;  // one per sequence, enumeration order
  std::size_t best_index = 0;
  const Schedule& best() const { return candidates.at(best_index); }
};

// Ties: candidates within two combined standard errors of the largest
// p_total are equal. Among those, fewer stages win, then the shorter t_f,
// then the first in enumeration order.
SequenceSearch search_activation_sequences(const Pattern& p, const Geometry& g, const NoiseParams& np,
                                           const DesignOptions& opts = {});

// Weak compositions of `cells` into `parts` parts, each at least `min_part`, lexicographic.
std::vector<std::vector<int>> gap_compositions(int cells, int parts, int min_part);

struct ElectrodeSearch {
  std::vector<int> gaps;
  StaticDesign design;
  std::vector<std::pair<std::vector<int>, double>> table;  // prob per candidate
};

ElectrodeSearch optimize_electrodes(const Pattern& p, const Geometry& base, int n_min, const NoiseParams& np,
                                    const DesignOptions& opts = {});

}  // namespace dsa
