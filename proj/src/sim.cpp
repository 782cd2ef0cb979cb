#include "dsa/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "dsa/energy.hpp"
#include "dsa/random.hpp"

namespace dsa {

namespace {

constexpr std::uint64_t kSdeTag = 21;
constexpr std::uint64_t kSsaTag = 22;
constexpr std::uint64_t kTrialTag = 23;

struct StepContext {
  const Composition* nu;
  const ControlVector* u;
  const Geometry* g;
  double sigma;
  double h_floor;
  Rng* rng;
};

bool admissible(const State& x, const StepContext& c, Eigen::VectorXd& f_out) {
  try {
    if (!contains(*c.nu, x, *c.g)) return false;
    f_out = force(x, *c.u, *c.g);
  } catch (const Error&) {
    return false;
  }
  return true;
}

// Drift displacement within half the distance to the next neighbour or
// charged electrode in the direction of motion. Without this the explicit
// step overshoots near the singular repulsion long before any ordering
// violation shows up.
bool drift_limited(const State& x, const Eigen::VectorXd& f, double h, const StepContext& c) {
  const Eigen::Index n = x.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double move = h * f[k];
    double gap = std::numeric_limits<double>::infinity();
    if (move < 0.0) {
      if (k > 0) gap = x[k] - x[k - 1];
      for (int e : c.nu->active) {
        if (c.g->electrode(e) < x[k]) gap = std::min(gap, x[k] - c.g->electrode(e));
      }
    } else {
      if (k + 1 < n) gap = x[k + 1] - x[k];
      for (int e : c.nu->active) {
        if (c.g->electrode(e) > x[k]) gap = std::min(gap, c.g->electrode(e) - x[k]);
      }
    }
    if (std::abs(move) > 0.5 * gap) return false;
  }
  return true;
}

// Advances x by one step of length h with Wiener increment dw; f is the drift at x.
void advance(State& x, Eigen::VectorXd& f, double h, const Eigen::VectorXd& dw, const StepContext& c, double t) {
  State trial = x + h * f + c.sigma * dw;
  Eigen::VectorXd f_trial;
  if (drift_limited(x, f, h, c) && admissible(trial, c, f_trial)) {
    x = std::move(trial);
    f = std::move(f_trial);
    return;
  }
  const double half = 0.5 * h;
  if (half < c.h_floor) {
    std::ostringstream os;
    os << "step rejected down to the floor " << c.h_floor << " at t = " << t;
    throw StepFloor(os.str(), x, t);
  }
  // Brownian bridge: W(h/2) given W(h) = dw
  std::normal_distribution<double> normal;
  Eigen::VectorXd mid(dw.size());
  for (Eigen::Index k = 0; k < dw.size(); ++k) mid[k] = 0.5 * dw[k] + 0.5 * std::sqrt(h) * normal(*c.rng);
  advance(x, f, half, mid, c, t);
  advance(x, f, half, dw - mid, c, t + half);
}

const ControlVector& stage_control(const Schedule& s, std::size_t i) {
  return i < s.stages.size() ? s.stages[i].u : s.static_u;
}

double stage_start(const Schedule& s, std::size_t i) { return i == 0 ? 0.0 : s.switch_times[i - 1]; }

}  // namespace

Schedule constant_schedule(const Geometry& g, const Pattern& p, const ControlVector& u, double sigma,
                           double duration) {
  if (!(duration > 0.0)) throw InvalidArgument("duration must be positive");
  Schedule s;
  s.geometry = g;
  s.pattern = p;
  s.sigma = sigma;
  s.static_u = u;
  s.static_settling = duration;
  s.switch_times = {duration};
  return s;
}

Trajectory simulate_sde(const State& x0, const Schedule& sched, const NoiseParams& np, double dt, std::uint64_t seed,
                        const SdeOptions& opts) {
  const Geometry& g = sched.geometry;
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (!in_state_space(x0, g)) throw InvalidArgument("initial state outside the ordered state space");
  if (sched.switch_times.size() != sched.stages.size() + 1) throw InvalidArgument("malformed schedule");

  Rng rng = make_stream(seed, kSdeTag);
  std::normal_distribution<double> normal;
  const double t_f = sched.t_final();
  const double sq = std::sqrt(dt);
  const std::size_t steps = static_cast<std::size_t>(std::ceil(t_f / dt));
  const std::size_t budget = opts.max_samples > sched.stages.size() + 3 ? opts.max_samples - sched.stages.size() - 2 : 1;
  const std::size_t stride = std::max<std::size_t>(1, (steps + budget - 1) / budget);

  Trajectory traj;
  State x = x0;
  double t = 0.0;
  std::size_t step = 0;
  auto record = [&](std::size_t stage, bool always = false) {
    if (!opts.record && !always) return;
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.stage.push_back(static_cast<int>(stage));
  };

  for (std::size_t s = 0; s <= sched.stages.size(); ++s) {
    const ControlVector& u = stage_control(sched, s);
    const double t_end = sched.switch_times[s];
    if (s > 0) traj.events.push_back(stage_start(sched, s));
    Composition nu = roa_of_state(x, g, u.active());
    StepContext ctx{&nu, &u, &g, np.sigma, dt / std::ldexp(1.0, opts.max_halvings), &rng};
    Eigen::VectorXd f = force(x, u, g);
    record(s);
    while (t < t_end) {
      double h = std::min(dt, t_end - t);
      if (t_end - (t + h) < 1e-12 * dt) h = t_end - t;
      const double scale = h == dt ? sq : std::sqrt(h);
      Eigen::VectorXd dw(x.size());
      for (Eigen::Index k = 0; k < x.size(); ++k) dw[k] = scale * normal(rng);
      advance(x, f, h, dw, ctx, t);
      t = (h == t_end - t) ? t_end : t + h;
      ++step;
      if (step % stride == 0 && t < t_end) record(s);
    }
  }
  record(sched.stages.size(), true);
  return traj;
}

std::vector<Generator> stage_generators(const Schedule& sched, const DiscreteStateSpace& ss, const NoiseParams& np) {
  std::vector<Generator> out;
  for (std::size_t s = 0; s <= sched.stages.size(); ++s) out.push_back(build_generator(ss, stage_control(sched, s), np));
  return out;
}

JumpTrajectory simulate_ssa(int z0, const Schedule& sched, const std::vector<Generator>& generators,
                            std::uint64_t seed, bool record) {
  if (generators.size() != sched.stages.size() + 1) throw InvalidArgument("one generator per stage required");
  if (z0 < 0 || z0 >= generators.front().size()) throw InvalidArgument("initial state index out of range");
  Rng rng = make_stream(seed, kSsaTag);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  JumpTrajectory traj;
  traj.t_end = sched.t_final();
  int z = z0;
  double t = 0.0;
  auto push = [&](std::size_t s) {
    if (!record && !traj.states.empty()) {
      traj.times.back() = t;
      traj.states.back() = z;
      traj.stage.back() = static_cast<int>(s);
      return;
    }
    traj.times.push_back(t);
    traj.states.push_back(z);
    traj.stage.push_back(static_cast<int>(s));
  };
  push(0);
  for (std::size_t s = 0; s < generators.size(); ++s) {
    const Generator& G = generators[s];
    const double t_end = sched.switch_times[s];
    if (s > 0) traj.events.push_back(t);
    while (true) {
      const double rate = G.exit_rate(z);
      if (!(rate > 0.0)) break;
      // 1 - U lies in (0, 1], so the log is finite
      const double hold = -std::log(1.0 - unif(rng)) / rate;
      if (t + hold >= t_end) break;
      t += hold;
      double target = unif(rng) * rate;
      int next = -1;
      for (Eigen::SparseMatrix<double>::InnerIterator it(G.lambda, z); it; ++it) {
        if (it.row() == z) continue;
        next = static_cast<int>(it.row());
        target -= it.value();
        if (target < 0.0) break;
      }
      z = next;
      push(s);
    }
    t = t_end;
  }
  if (!record) push(generators.size() - 1);
  return traj;
}

JumpTrajectory simulate_ssa(int z0, const Schedule& sched, const DiscreteStateSpace& ss, const NoiseParams& np,
                            std::uint64_t seed) {
  return simulate_ssa(z0, sched, stage_generators(sched, ss, np), seed, true);
}

Eigen::VectorXd occupation_times(const JumpTrajectory& traj, int states) {
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(states);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    double end = k + 1 < traj.times.size() ? traj.times[k + 1] : traj.t_end;
    occ[traj.states[k]] += end - traj.times[k];
  }
  return occ;
}

State uniform_initial_state(const Geometry& g, Rng& rng, double min_gap) {
  std::uniform_real_distribution<double> unif(0.0, g.length());
  const int n = g.particles();
  State x(n);
  for (;;) {
    for (int k = 0; k < n; ++k) x[k] = unif(rng);
    std::sort(x.data(), x.data() + n);
    bool ok = in_state_space(x, g);
    for (int k = 0; ok && k + 1 < n; ++k) ok = x[k + 1] - x[k] > min_gap;
    for (int k = 0; ok && k < n; ++k) {
      for (int e = 0; ok && e < g.electrodes(); ++e) ok = std::abs(x[k] - g.electrode(e)) > min_gap;
    }
    if (ok) return x;
  }
}

ProbEstimate estimate_success(const Schedule& sched, const Pattern& p, Model model, int trials, std::uint64_t seed,
                              const SimOptions& opts) {
  if (trials < 100) throw InvalidArgument("at least 100 trials required");
  const Geometry& g = sched.geometry;
  const NoiseParams np(sched.sigma);
  std::vector<char> hit(static_cast<std::size_t>(trials), 0);
  std::vector<std::string> errors(static_cast<std::size_t>(trials));

  if (model == Model::Continuous) {
    const PatternBox box = pattern_box(p, g);
    SdeOptions so;
    so.record = false;
    so.max_halvings = opts.max_halvings;
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < trials; ++k) {
      try {
        Rng rng = make_stream(seed, kTrialTag, static_cast<std::uint64_t>(k));
        State x0 = uniform_initial_state(g, rng, opts.min_gap);
        Trajectory tr = simulate_sde(x0, sched, np, opts.dt, derive_seed(seed, static_cast<std::uint64_t>(k)), so);
        hit[static_cast<std::size_t>(k)] = box.contains(tr.states.back()) ? 1 : 0;
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(k)] = e.what();
      }
    }
  } else {
    const DiscreteStateSpace ss(g, opts.state_cap);
    const std::vector<Generator> gens = stage_generators(sched, ss, np);
    const int target = ss.index_of(p);
    if (target < 0) throw InvalidArgument("pattern is not a state of the discrete model");
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < trials; ++k) {
      try {
        Rng rng = make_stream(seed, kTrialTag, static_cast<std::uint64_t>(k));
        std::uniform_int_distribution<int> pick(0, ss.size() - 1);
        int z0 = pick(rng);
        JumpTrajectory tr = simulate_ssa(z0, sched, gens, derive_seed(seed, static_cast<std::uint64_t>(k)), false);
        hit[static_cast<std::size_t>(k)] = tr.states.back() == target ? 1 : 0;
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(k)] = e.what();
      }
    }
  }
  for (int k = 0; k < trials; ++k) {
    if (!errors[static_cast<std::size_t>(k)].empty()) {
      throw ConvergenceFailure("trial " + std::to_string(k) + ": " + errors[static_cast<std::size_t>(k)]);
    }
  }
  ProbEstimate est;
  est.method = model == Model::Continuous ? ProbMethod::Simulation : ProbMethod::Discrete;
  double succ = 0.0;
  for (char h : hit) succ += h;
  est.value = succ / trials;
  est.std_err = std::sqrt(est.value * (1.0 - est.value) / trials);
  return est;
}

Retimed retime_discrete(const Schedule& sched, const DiscreteStateSpace& ss, double max_duration) {
  if (!(max_duration > 0.0)) throw InvalidArgument("max_duration must be positive");
  const NoiseParams np(sched.sigma);
  Retimed out;
  out.schedule = sched;
  double t = 0.0;
  for (std::size_t s = 0; s <= sched.stages.size(); ++s) {
    const ControlVector& u = stage_control(sched, s);
    const Composition nu = s < sched.stages.size() ? sched.stages[s].from_nu
                                                    : roa_of_pattern(sched.pattern, ss.geometry(), u.active());
    const Generator G = build_generator(ss, u, np);
    const DiscreteSettling d = discrete_settling(G, nu);
    // a single-state block has nothing to relax; hold it for one time unit
    double dur = d.single_state ? 1.0 : d.value;
    out.settling.push_back(dur);
    if (dur > max_duration) {
      dur = max_duration;
      out.capped = true;
    }
    t += dur;
    out.schedule.switch_times[s] = t;
    if (s < sched.stages.size()) {
      out.schedule.stages[s].duration = dur;
    } else {
      out.schedule.static_settling = dur;
    }
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
  os << 't';
  for (Eigen::Index k = 1; k <= n; ++k) os << ",x" << k;
  os << ",stage\n";
  os.precision(12);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    os << traj.times[i];
    for (Eigen::Index k = 0; k < n; ++k) os << ',' << traj.states[i][k];
    os << ',' << traj.stage[i] << '\n';
  }
}

}  // namespace dsa
