#include "dsa/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dsa/energy.hpp"

namespace dsa {
namespace {

// Interval index (into nu.counts) of every particle.
std::vector<int> particle_intervals(const Composition& nu) {
  std::vector<int> out;
  for (std::size_t k = 0; k < nu.counts.size(); ++k) {
    for (int j = 0; j < nu.counts[k]; ++j) out.push_back(static_cast<int>(k));
  }
  return out;
}

void require_confining(const Composition& nu, const ControlVector& u, const Geometry& g) {
  if (u.size() != g.electrodes()) throw InvalidArgument("control dimension does not match electrode count");
  if (!is_valid_active_set(nu.active, g)) throw InvalidArgument("invalid active set in composition");
  if (nu.total() != g.particles()) throw InvalidArgument("composition does not sum to the particle count");
  for (int k = 0; k < u.size(); ++k) {
    bool listed = std::find(nu.active.begin(), nu.active.end(), k) != nu.active.end();
    if (!listed && u[k] != 0.0) throw InvalidArgument("control charges an electrode outside the composition's active set");
    if (u[k] < 0.0) throw InvalidArgument("negative electrode charge");
  }
  if (!(u[0] > 0.0) || !(u[g.intervals()] > 0.0)) throw InvalidArgument("endpoint electrodes must be charged");
  for (std::size_t k = 0; k < nu.counts.size(); ++k) {
    if (nu.counts[k] == 0) continue;
    if (!(u[nu.active[k]] > 0.0) || !(u[nu.active[k + 1]] > 0.0)) {
      throw NoBracket("uncharged electrode bounds an occupied interval " + nu.str());
    }
  }
}

double scaled_residual(const Eigen::VectorXd& f, const Eigen::MatrixXd& h) {
  double r = 0.0;
  for (Eigen::Index k = 0; k < f.size(); ++k) r = std::max(r, std::abs(f[k]) / h(k, k));
  return r;
}

// Root of the strictly decreasing f_k(y) on (lo, hi); f -> +inf at lo and
// -inf at hi when both ends are charges. Safeguarded Newton inside the bracket.
double solve_component(const State& x, int k, double lo, double hi, const ControlVector& u, const Geometry& g) {
  const double width = hi - lo;
  const double probe = 1e-9 * width;
  if (!(force_component(x, k, lo + probe, u, g).value > 0.0) ||
      !(force_component(x, k, hi - probe, u, g).value < 0.0)) {
    std::ostringstream os;
    os << "no sign change for particle " << k << " on (" << lo << ", " << hi << ")";
    throw NoBracket(os.str());
  }
  double a = lo;
  double b = hi;
  double y = std::clamp(x[k], lo + 0.25 * width, hi - 0.25 * width);
  for (int it = 0; it < 200; ++it) {
    ScalarForce s = force_component(x, k, y, u, g);
    if (s.value == 0.0) return y;
    if (s.value > 0.0) a = y;
    else b = y;
    double next = y - s.value / s.slope;
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    double step = std::abs(next - y);
    y = next;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(y))) break;
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(y))) break;
  }
  return y;
}

struct Bounds {
  double lo;
  double hi;
};

Bounds component_bounds(const State& x, int k, const std::vector<int>& interval, const Composition& nu,
                        const Geometry& g) {
  const int iv = interval[static_cast<std::size_t>(k)];
  double lo = g.electrode(nu.active[static_cast<std::size_t>(iv)]);
  double hi = g.electrode(nu.active[static_cast<std::size_t>(iv) + 1]);
  if (k > 0) lo = std::max(lo, x[k - 1]);
  if (k + 1 < x.size()) hi = std::min(hi, x[k + 1]);
  return {lo, hi};
}

bool ordered_within(const State& x, const Composition& nu, const Geometry& g) {
  return contains(nu, x, g);
}

}  // namespace

EquilibriumResult solve_fixed_point(const Composition& nu, const ControlVector& u, const Geometry& g,
                                    const EquilibriumOptions& opts) {
  require_confining(nu, u, g);
  if (!(opts.step_tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  const auto interval = particle_intervals(nu);
  const int n = g.particles();

  EquilibriumResult res;
  State x = interior_point(nu, g);
  State next(n);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    for (int k = 0; k < n; ++k) {
      Bounds b = component_bounds(x, k, interval, nu, g);
      next[k] = solve_component(x, k, b.lo, b.hi, u, g);
    }
    if (!ordered_within(next, nu, g)) {
      // Jacobi sweep crossed two neighbours; fall back to a sequential sweep,
      // which keeps order because each bracket uses the updated neighbour.
      next = x;
      for (int k = 0; k < n; ++k) {
        Bounds b = component_bounds(next, k, interval, nu, g);
        next[k] = solve_component(next, k, b.lo, b.hi, u, g);
      }
    }
    double step = (next - x).lpNorm<Eigen::Infinity>();
    res.step_norms.push_back(step);
    x.swap(next);
    if (step < opts.step_tol) {
      Eigen::VectorXd f = force(x, u, g);
      Eigen::MatrixXd h = hessian(x, u, g);
      double sr = scaled_residual(f, h);
      if (sr <= opts.residual_tol) {
        res.x = x;
        res.iterations = it;
        res.residual = f.lpNorm<Eigen::Infinity>();
        res.scaled_residual = sr;
        res.min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues()[0];
        return res;
      }
    }
  }
  std::ostringstream os;
  os << "fixed-point iteration did not converge in " << opts.max_iterations << " iterations for " << nu.str()
     << " (last step " << res.step_norms.back() << ")";
  throw ConvergenceFailure(os.str());
}

EquilibriumResult solve_gradient_flow(const State& x0, const ControlVector& u, const Geometry& g,
                                      const EquilibriumOptions& opts) {
  if (!in_state_space(x0, g)) throw InvalidArgument("initial state outside the ordered state space");
  const Composition nu = roa_of_state(x0, g, u.active());
  require_confining(nu, u, g);

  constexpr double kEnergySlack = 64.0 * std::numeric_limits<double>::epsilon();
  EquilibriumResult res;
  State x = x0;
  double v = energy(x, u, g);
  double h = opts.initial_step;
  double t = 0.0;
  int accepted_run = 0;
  int samples_stride = 1;
  long accepted = 0;
  res.energies.push_back(v);

  while (t < opts.t_max) {
    Eigen::VectorXd f = force(x, u, g);
    Eigen::MatrixXd hess = hessian(x, u, g);
    double sr = scaled_residual(f, hess);
    if (sr <= opts.residual_tol) {
      res.x = x;
      res.iterations = static_cast<int>(std::min<long>(accepted, std::numeric_limits<int>::max()));
      res.residual = f.lpNorm<Eigen::Infinity>();
      res.scaled_residual = sr;
      res.min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hess, Eigen::EigenvaluesOnly).eigenvalues()[0];
      res.time = t;
      if (res.energies.back() != v) res.energies.push_back(v);
      return res;
    }
    for (;;) {
      State trial = x + h * f;
      bool ok = contains(nu, trial, g);
      double v_trial = 0.0;
      if (ok) {
        v_trial = energy(trial, u, g);
        ok = v_trial <= v + kEnergySlack * std::abs(v);
        // energy differences drown in round-off near the minimum; there an
        // overshooting step shows up as a growing force instead
        if (ok && v - v_trial <= kEnergySlack * std::abs(v)) {
          ok = force(trial, u, g).lpNorm<Eigen::Infinity>() <= f.lpNorm<Eigen::Infinity>();
        }
      }
      if (ok) {
        x = trial;
        v = v_trial;
        t += h;
        ++accepted;
        if (accepted % samples_stride == 0) {
          res.energies.push_back(v);
          if (res.energies.size() >= 10000) {
            // decimate to keep at most 10^4 samples
            std::vector<double> kept;
            for (std::size_t i = 0; i < res.energies.size(); i += 2) kept.push_back(res.energies[i]);
            res.energies.swap(kept);
            samples_stride *= 2;
          }
        }
        if (++accepted_run >= 10) {
          h *= 2.0;
          accepted_run = 0;
        }
        break;
      }
      h *= 0.5;
      accepted_run = 0;
      if (h < 1e-300) throw ConvergenceFailure("gradient flow step size underflow");
    }
  }
  Eigen::VectorXd f = force(x, u, g);
  std::ostringstream os;
  os << "gradient flow reached t_max = " << opts.t_max << " with residual " << f.lpNorm<Eigen::Infinity>();
  throw ConvergenceFailure(os.str());
}

StabilityCertificate certify_stability(const State& x, const ControlVector& u, const Geometry& g) {
  Eigen::MatrixXd h = hessian(x, u, g);
  StabilityCertificate cert;
  cert.min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues()[0];
  cert.is_stable = cert.min_eig > 0.0;
  double bound = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < h.rows(); ++k) {
    double off = h.row(k).cwiseAbs().sum() - std::abs(h(k, k));
    bound = std::min(bound, h(k, k) - off);
  }
  cert.gershgorin_bound = bound;
  return cert;
}

}  // namespace dsa
