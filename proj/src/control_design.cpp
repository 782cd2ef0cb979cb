#include "dsa/control_design.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "dsa/energy.hpp"
#include "dsa/equilibrium.hpp"
#include "dsa/nelder_mead.hpp"
#include "dsa/random.hpp"

namespace dsa {

namespace {

// Stream tags for seed splitting.
constexpr std::uint64_t kStaticTag = 11;
constexpr std::uint64_t kStageTag = 12;
constexpr std::uint64_t kRestartTag = 13;
constexpr std::uint64_t kFinalTag = 14;

constexpr double kFailed = 1.0;  // objective value of controls with no usable equilibrium

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string key_of(const ActiveSet& a) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < a.size(); ++i) os << (i ? "," : "") << a[i];
  os << '}';
  return os.str();
}

std::string key_of(const Composition& nu) { return nu.str() + key_of(nu.active); }

ControlVector expand(const Eigen::VectorXd& v, const ActiveSet& active, int electrodes) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(electrodes);
  for (std::size_t i = 0; i < active.size(); ++i) u[active[i]] = v[static_cast<Eigen::Index>(i)];
  return ControlVector(u);
}

double tie_term(const Eigen::VectorXd& v) { return v.array().log().square().sum(); }

NelderMeadOptions nm_options(const DesignOptions& opts) {
  NelderMeadOptions o;
  o.max_evaluations = opts.max_evaluations;
  o.f_tol = opts.f_tol;
  o.x_tol = opts.x_tol;
  o.initial_step = opts.initial_step;
  return o;
}

void check_options(const DesignOptions& opts) {
  if (!(opts.u_min > 0.0) || !(opts.u_max > opts.u_min)) throw InvalidArgument("need 0 < u_min < u_max");
  if (opts.restarts < 1) throw InvalidArgument("need at least one restart");
  if (opts.objective_samples < kBatches) throw InvalidArgument("objective_samples below batch count");
  if (opts.final_samples < 1000) throw InvalidArgument("final_samples must be at least 1000");
}

void check_pattern(const Pattern& p, const Geometry& g) {
  if (p.cells() != g.cells()) throw InvalidArgument("pattern length does not match the cell count");
  if (p.count() != g.particles()) throw InvalidArgument("pattern popcount does not match the particle count");
  const Composition nu = roa_of_pattern(p, g, all_electrodes(g));
  for (std::size_t k = 0; k < nu.counts.size(); ++k) {
    if (nu.counts[k] > g.gaps()[k]) {
      throw InfeasiblePattern("interval " + std::to_string(k) + " holds more particles than cells");
    }
  }
}

// Starting points: unit charges, then log-uniform draws in [1/4, 4].
std::vector<Eigen::VectorXd> random_starts(int dim, const DesignOptions& opts, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> starts;
  for (int r = 0; r < opts.restarts; ++r) {
    Eigen::VectorXd x = Eigen::VectorXd::Ones(dim);
    if (r > 0) {
      Rng rng = make_stream(seed, kRestartTag, static_cast<std::uint64_t>(r));
      std::uniform_real_distribution<double> unif(-std::log(4.0), std::log(4.0));
      for (int k = 0; k < dim; ++k) x[k] = std::exp(unif(rng));
    }
    starts.push_back(x.cwiseMax(opts.u_min).cwiseMin(opts.u_max));
  }
  return starts;
}

struct MultiStart {
  Eigen::VectorXd x;
  OptimizerDiagnostics diag;
};

MultiStart multi_start(const std::function<double(const Eigen::VectorXd&)>& f,
                       const std::vector<Eigen::VectorXd>& starts, const DesignOptions& opts) {
  const Eigen::Index dim = starts.front().size();
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, opts.u_min);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, opts.u_max);
  const NelderMeadOptions o = nm_options(opts);
  MultiStart best;
  best.diag.objective = std::numeric_limits<double>::infinity();
  for (const auto& x0 : starts) {
    NelderMeadResult r = nelder_mead(f, x0, lo, hi, o);
    best.diag.evaluations += r.evaluations;
    best.diag.restarts_run += 1;
    if (!r.converged) best.diag.stalled_restarts += 1;
    best.diag.restart_objectives.push_back(r.f);
    // strict: earlier starts win ties
    if (r.f < best.diag.objective) {
      best.diag.objective = r.f;
      best.x = r.x;
    }
  }
  return best;
}

}  // namespace

std::string to_string(const ActivationSequence& seq) {
  std::ostringstream os;
  for (std::size_t b = 0; b < seq.size(); ++b) {
    if (b) os << ' ';
    os << '{';
    for (std::size_t i = 0; i < seq[b].size(); ++i) os << (i ? "," : "") << seq[b][i];
    os << '}';
  }
  return os.str();
}

const ControlVector& Schedule::control_at(double t) const {
  int s = stage_at(t);
  return s < static_cast<int>(stages.size()) ? stages[static_cast<std::size_t>(s)].u : static_u;
}

int Schedule::stage_at(double t) const {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (t < switch_times[i]) return static_cast<int>(i);
  }
  return static_cast<int>(stages.size());
}

ProbEstimate p_stage_estimate(const Composition& from, const Composition& to, const State& x_eq,
                              const ControlVector& u, const Geometry& g, const NoiseParams& np, int samples,
                              std::uint64_t seed, ProbMethod method) {
  auto safe = [&g](const Composition& nu) {
    return [&g, &nu](const State& x) {
      try {
        return contains(nu, x, g);
      } catch (const InvalidArgument&) {
        return false;
      }
    };
  };
  return gibbs_ratio(x_eq, u, g, np, safe(from), safe(to), samples, seed, method);
}

ControlVector surrogate_static(const Pattern& p, const Geometry& g, const NoiseParams& np, SurrogateVariant variant,
                              const DesignOptions& opts) {
  check_options(opts);
  check_pattern(p, g);
  const ActiveSet active = all_electrodes(g);
  const Composition nu = roa_of_pattern(p, g, active);
  const State xi = pattern_midpoints(p, g);
  const double half_var = 0.5 * np.sigma * np.sigma;
  auto f = [&](const Eigen::VectorXd& v) {
    ControlVector u = expand(v, active, g.electrodes());
    try {
      EquilibriumResult eq = solve_fixed_point(nu, u, g);
      const State d = eq.x - xi;
      if (variant == SurrogateVariant::InfNorm) return d.lpNorm<Eigen::Infinity>();
      const Eigen::MatrixXd h = hessian(eq.x, u, g);
      Eigen::LLT<Eigen::MatrixXd> llt(h);
      if (llt.info() != Eigen::Success) return kFailed * 1e6;
      const double tr = llt.solve(Eigen::MatrixXd::Identity(h.rows(), h.cols())).trace();
      return d.squaredNorm() + half_var * tr;
    } catch (const Error&) {
      return kFailed * 1e6;
    }
  };
  const auto starts = random_starts(static_cast<int>(active.size()), opts, derive_seed(opts.seed, kStaticTag));
  return expand(multi_start(f, starts, opts).x, active, g.electrodes());
}

StaticDesign optimize_static(const Pattern& p, const Geometry& g, const NoiseParams& np, const DesignOptions& opts) {
  check_options(opts);
  check_pattern(p, g);
  const ActiveSet active = all_electrodes(g);
  const Composition nu = roa_of_pattern(p, g, active);
  const PatternBox box = pattern_box(p, g);
  const std::uint64_t seed = derive_seed(opts.seed, kStaticTag);

  auto probability = [&](const State& x, const ControlVector& u, int samples, std::uint64_t s, ProbMethod m) {
    return gibbs_ratio(
        x, u, g, np, [&](const State& y) { return contains(nu, y, g); },
        [&](const State& y) { return box.contains(y); }, samples, s, m);
  };
  auto f = [&](const Eigen::VectorXd& v) {
    ControlVector u = expand(v, active, g.electrodes());
    try {
      EquilibriumResult eq = solve_fixed_point(nu, u, g);
      ProbEstimate pr = probability(eq.x, u, opts.objective_samples, seed, ProbMethod::SaddlePoint);
      return -std::min(pr.value, opts.saturation) + opts.tie_weight * tie_term(v);
    } catch (const Error&) {
      return kFailed;
    }
  };

  auto starts = random_starts(static_cast<int>(active.size()), opts, seed);
  if (opts.warm_start) {
    ControlVector w = surrogate_static(p, g, np, SurrogateVariant::MeanSquare, opts);
    Eigen::VectorXd x0(static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) x0[static_cast<Eigen::Index>(i)] = w[active[i]];
    starts.push_back(x0);
  }
  MultiStart best = multi_start(f, starts, opts);

  StaticDesign out;
  out.u = expand(best.x, active, g.electrodes());
  out.diag = best.diag;
  EquilibriumResult eq = solve_fixed_point(nu, out.u, g);
  out.x_ss = eq.x;
  const std::uint64_t fresh = derive_seed(opts.seed, kStaticTag, kFinalTag);
  out.prob = probability(eq.x, out.u, opts.final_samples, fresh, ProbMethod::ExactMC);
  out.prob_saddle = probability(eq.x, out.u, opts.final_samples, fresh, ProbMethod::SaddlePoint);
  out.settling = settling_time(eq.x, out.u, g);
  return out;
}

StagePlan optimize_stage(const Composition& from_nu, const Composition& to_nu, const ActiveSet& active,
                         const Geometry& g, const NoiseParams& np, const DesignOptions& opts) {
  check_options(opts);
  if (!is_valid_active_set(active, g)) throw InvalidArgument("invalid active set " + key_of(active));
  if (from_nu.active != active) throw InvalidArgument("from composition is not relative to the stage active set");
  if (!refines(from_nu, to_nu)) {
    throw InconsistentRefinement(key_of(to_nu) + " does not refine " + key_of(from_nu));
  }
  const std::uint64_t seed = derive_seed(opts.seed, kStageTag, fnv1a(key_of(from_nu) + key_of(to_nu)));

  auto f = [&](const Eigen::VectorXd& v) {
    ControlVector u = expand(v, active, g.electrodes());
    try {
      EquilibriumResult eq = solve_fixed_point(from_nu, u, g);
      ProbEstimate pr =
          p_stage_estimate(from_nu, to_nu, eq.x, u, g, np, opts.objective_samples, seed, ProbMethod::SaddlePoint);
      return -std::min(pr.value, opts.saturation) + opts.tie_weight * tie_term(v);
    } catch (const Error&) {
      return kFailed;
    }
  };
  MultiStart best = multi_start(f, random_starts(static_cast<int>(active.size()), opts, seed), opts);

  StagePlan plan;
  plan.active = active;
  plan.u = expand(best.x, active, g.electrodes());
  plan.from_nu = from_nu;
  plan.target_nu = to_nu;
  plan.diag = best.diag;
  EquilibriumResult eq = solve_fixed_point(from_nu, plan.u, g);
  plan.x_eq = eq.x;
  const std::uint64_t fresh = derive_seed(opts.seed, kStageTag, fnv1a(key_of(from_nu) + key_of(to_nu)) ^ kFinalTag);
  plan.p_stage = p_stage_estimate(from_nu, to_nu, eq.x, plan.u, g, np, opts.final_samples, fresh, ProbMethod::ExactMC);
  plan.p_stage_saddle =
      p_stage_estimate(from_nu, to_nu, eq.x, plan.u, g, np, opts.final_samples, fresh, ProbMethod::SaddlePoint);
  plan.duration = settling_time(eq.x, plan.u, g);
  return plan;
}

const StaticDesign& DesignCache::static_design(const Pattern& p, const Geometry& g, const NoiseParams& np,
                                               const DesignOptions& opts) {
  std::ostringstream os;
  os << p.str() << '|';
  for (int gap : g.gaps()) os << gap << ',';
  os << g.cell_width() << '|' << np.sigma;
  const std::string key = os.str();
  for (const auto& [k, d] : statics_) {
    if (k == key) return d;
  }
  statics_.emplace_back(key, optimize_static(p, g, np, opts));
  return statics_.back().second;
}

const StagePlan& DesignCache::stage(const Composition& from, const Composition& to, const ActiveSet& active,
                                    const Geometry& g, const NoiseParams& np, const DesignOptions& opts) {
  const std::string key = key_of(from) + "->" + key_of(to);
  auto it = stages_.find(key);
  if (it != stages_.end()) return it->second;
  return stages_.emplace(key, optimize_stage(from, to, active, g, np, opts)).first->second;
}

Schedule plan_schedule(const Pattern& p, const Geometry& g, const NoiseParams& np, const ActivationSequence& sequence,
                       const DesignOptions& opts, DesignCache* cache) {
  check_pattern(p, g);
  std::set<int> seen;
  for (const auto& block : sequence) {
    if (block.empty()) throw InvalidArgument("activation sequence has an empty block");
    for (int e : block) {
      if (e <= 0 || e >= g.intervals()) throw InvalidArgument("block holds a non-interior electrode");
      if (!seen.insert(e).second) throw InvalidArgument("electrode activated twice");
    }
  }
  if (static_cast<int>(seen.size()) != g.intervals() - 1) {
    throw InvalidArgument("activation sequence must cover every interior electrode");
  }
  DesignCache local;
  DesignCache& c = cache ? *cache : local;

  Schedule s{g, p, np.sigma, sequence, {}, {}, {}, {}, 0.0, {}, 0.0, 0.0};
  ActiveSet active = endpoints_only(g);
  double t = 0.0;
  double rel_var = 0.0;
  s.p_total = 1.0;
  for (const auto& block : sequence) {
    ActiveSet next = active;
    next.insert(next.end(), block.begin(), block.end());
    std::sort(next.begin(), next.end());
    const Composition from = roa_of_pattern(p, g, active);
    const Composition to = roa_of_pattern(p, g, next);
    const StagePlan& plan = c.stage(from, to, active, g, np, opts);
    s.stages.push_back(plan);
    t += plan.duration;
    s.switch_times.push_back(t);
    s.p_total *= plan.p_stage.value;
    if (plan.p_stage.value > 0.0) rel_var += std::pow(plan.p_stage.std_err / plan.p_stage.value, 2);
    active = next;
  }
  const StaticDesign& st = c.static_design(p, g, np, opts);
  s.static_u = st.u;
  s.static_x_ss = st.x_ss;
  s.p_static = st.prob;
  s.static_settling = st.settling;
  t += st.settling;
  s.switch_times.push_back(t);
  s.p_total *= st.prob.value;
  if (st.prob.value > 0.0) rel_var += std::pow(st.prob.std_err / st.prob.value, 2);
  s.p_total_std_err = s.p_total * std::sqrt(rel_var);
  return s;
}

std::vector<ActivationSequence> ordered_set_partitions(const std::vector<int>& items) {
  std::vector<int> sorted = items;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  std::vector<ActivationSequence> out;
  if (m == 0) return out;
  // assign each item a block label; keep labelings that use 0..k-1 surjectively
  std::vector<int> label(m, 0);
  for (std::size_t k = 1; k <= m; ++k) {
    std::fill(label.begin(), label.end(), 0);
    while (true) {
      std::vector<int> used(k, 0);
      for (int l : label) used[static_cast<std::size_t>(l)] = 1;
      if (std::all_of(used.begin(), used.end(), [](int x) { return x == 1; })) {
        ActivationSequence seq(k);
        for (std::size_t i = 0; i < m; ++i) seq[static_cast<std::size_t>(label[i])].push_back(sorted[i]);
        out.push_back(std::move(seq));
      }
      std::size_t pos = 0;
      while (pos < m && label[pos] == static_cast<int>(k) - 1) label[pos++] = 0;
      if (pos == m) break;
      ++label[pos];
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const ActivationSequence& a, const ActivationSequence& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  return out;
}

SequenceSearch search_activation_sequences(const Pattern& p, const Geometry& g, const NoiseParams& np,
                                           const DesignOptions& opts) {
  const int interior = g.intervals() - 1;
  if (interior > opts.max_interior) {
    throw TooManySequences(std::to_string(interior) + " interior electrodes exceed the enumeration cap of " +
                           std::to_string(opts.max_interior));
  }
  std::vector<int> items(static_cast<std::size_t>(interior));
  std::iota(items.begin(), items.end(), 1);
  std::vector<ActivationSequence> seqs = ordered_set_partitions(items);
  if (seqs.empty()) seqs.push_back({});  // no interior electrode: static control only

  DesignCache cache;
  SequenceSearch out;
  for (const auto& seq : seqs) out.candidates.push_back(plan_schedule(p, g, np, seq, opts, &cache));
  const std::vector<Schedule>& plans = out.candidates;
  std::size_t top = 0;
  for (std::size_t i = 1; i < plans.size(); ++i) {
    if (plans[i].p_total > plans[top].p_total) top = i;
  }
  // among ties: fewer stages, then shorter total time, then enumeration order
  out.best_index = top;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    double tol = 2.0 * std::hypot(plans[i].p_total_std_err, plans[top].p_total_std_err);
    if (plans[top].p_total - plans[i].p_total > tol) continue;
    const Schedule& a = plans[i];
    const Schedule& b = plans[out.best_index];
    if (a.stages.size() < b.stages.size() ||
        (a.stages.size() == b.stages.size() && a.t_final() < b.t_final())) {
      out.best_index = i;
    }
  }
  return out;
}

std::vector<std::vector<int>> gap_compositions(int cells, int parts, int min_part) {
  std::vector<std::vector<int>> out;
  if (parts <= 0 || min_part < 1 || parts * min_part > cells) return out;
  std::vector<int> cur;
  std::function<void(int, int)> rec = [&](int left, int k) {
    if (k == parts - 1) {
      cur.push_back(left);
      out.push_back(cur);
      cur.pop_back();
      return;
    }
    for (int v = min_part; v <= left - min_part * (parts - 1 - k); ++v) {
      cur.push_back(v);
      rec(left - v, k + 1);
      cur.pop_back();
    }
  };
  rec(cells, 0);
  return out;
}

ElectrodeSearch optimize_electrodes(const Pattern& p, const Geometry& base, int n_min, const NoiseParams& np,
                                    const DesignOptions& opts) {
  const int c = base.intervals();
  if (n_min < 1) throw InvalidArgument("N_min must be positive");
  if (c * n_min > base.cells()) {
    throw InfeasiblePattern("c * N_min = " + std::to_string(c * n_min) + " exceeds N = " +
                            std::to_string(base.cells()));
  }
  ElectrodeSearch out;
  double best = -1.0;
  for (const auto& gaps : gap_compositions(base.cells(), c, n_min)) {
    Geometry g(gaps, base.cell_width(), base.particles());
    double prob = 0.0;
    StaticDesign d;
    try {
      d = optimize_static(p, g, np, opts);
      prob = d.prob.value;
    } catch (const InfeasiblePattern&) {
      prob = 0.0;
    } catch (const ConvergenceFailure&) {
      prob = 0.0;
    }
    out.table.emplace_back(gaps, prob);
    if (prob > best) {
      best = prob;
      out.gaps = gaps;
      out.design = d;
    }
  }
  return out;
}

}  // namespace dsa
