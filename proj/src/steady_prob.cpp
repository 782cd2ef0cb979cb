#include "dsa/steady_prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dsa/energy.hpp"
#include "dsa/equilibrium.hpp"
#include "dsa/random.hpp"

namespace dsa {

std::string to_string(ProbMethod m) {
  switch (m) {
    case ProbMethod::ExactMC: return "exact-mc";
    case ProbMethod::SaddlePoint: return "saddle-point";
    case ProbMethod::Simulation: return "simulation";
    case ProbMethod::Discrete: return "discrete";
  }
  return "unknown";
}

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_hessian(const Eigen::MatrixXd& h) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw DegenerateHessian("Hessian is not positive definite");
  return llt;
}

struct BatchSums {
  double num = 0.0;
  double den = 0.0;
  double shift = -std::numeric_limits<double>::infinity();  // log-weight offset (ExactMC)
};

}  // namespace

ProbEstimate gibbs_ratio(const State& x_ss, const ControlVector& u, const Geometry& g, const NoiseParams& np,
                         const StatePredicate& within, const StatePredicate& region, int samples,
                         std::uint64_t seed, ProbMethod method) {
  np.require_positive();
  if (samples < kBatches) throw InvalidArgument("need at least one sample per batch");
  if (method != ProbMethod::ExactMC && method != ProbMethod::SaddlePoint) {
    throw InvalidArgument("gibbs_ratio supports exact-mc and saddle-point only");
  }
  const Eigen::MatrixXd h = hessian(x_ss, u, g);
  const auto llt = factor_hessian(h);
  // x = x_ss + sqrt(sigma^2/2) L^-T z has covariance sigma^2/2 H^-1.
  const Eigen::MatrixXd l_inv_t = llt.matrixU().solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
  const double scale = np.sigma / std::sqrt(2.0);
  const double beta = np.beta();
  const double v_ss = method == ProbMethod::ExactMC ? energy(x_ss, u, g) : 0.0;
  const int per_batch = (samples + kBatches - 1) / kBatches;
  const Eigen::Index n = x_ss.size();

  std::vector<BatchSums> sums(kBatches);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < kBatches; ++b) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(b));
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(n);
    std::vector<double> log_w;
    std::vector<char> hit;
    BatchSums s;
    for (int i = 0; i < per_batch; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) z[k] = normal(rng);
      Eigen::VectorXd dx = scale * (l_inv_t * z);
      State x = x_ss + dx;
      if (!within(x)) continue;
      bool in_region = region(x);
      if (method == ProbMethod::SaddlePoint) {
        s.den += 1.0;
        if (in_region) s.num += 1.0;
        continue;
      }
      double v;
      try {
        v = energy(x, u, g);
      } catch (const SingularConfiguration&) {
        continue;
      }
      // log of Gibbs density over the (unnormalized) proposal density
      double lw = -beta * (v - v_ss - 0.5 * dx.dot(h * dx));
      log_w.push_back(lw);
      hit.push_back(in_region ? 1 : 0);
    }
    if (method == ProbMethod::ExactMC && !log_w.empty()) {
      s.shift = *std::max_element(log_w.begin(), log_w.end());
      for (std::size_t i = 0; i < log_w.size(); ++i) {
        double w = std::exp(log_w[i] - s.shift);
        s.den += w;
        if (hit[i]) s.num += w;
      }
    }
    sums[static_cast<std::size_t>(b)] = s;
  }

  double shift = 0.0;
  if (method == ProbMethod::ExactMC) {
    shift = -std::numeric_limits<double>::infinity();
    for (const auto& s : sums) shift = std::max(shift, s.shift);
  }
  double num = 0.0;
  double den = 0.0;
  std::vector<double> ratios;
  for (const auto& s : sums) {
    if (s.den <= 0.0) continue;
    double f = method == ProbMethod::ExactMC ? std::exp(s.shift - shift) : 1.0;
    num += f * s.num;
    den += f * s.den;
    ratios.push_back(s.num / s.den);
  }
  if (den <= 0.0) throw DegenerateHessian("no Gaussian sample fell inside the region of attraction");

  ProbEstimate est;
  est.method = method;
  est.value = std::clamp(num / den, 0.0, 1.0);
  if (ratios.size() > 1) {
    double mean = 0.0;
    for (double r : ratios) mean += r;
    mean /= static_cast<double>(ratios.size());
    double var = 0.0;
    for (double r : ratios) var += (r - mean) * (r - mean);
    var /= static_cast<double>(ratios.size() - 1);
    est.std_err = std::sqrt(var / static_cast<double>(ratios.size()));
  }
  return est;
}

ProbEstimate p_ss_exact(const ControlVector& u, const Pattern& p, const Geometry& g, const NoiseParams& np,
                        int samples, std::uint64_t seed) {
  if (samples < 1000) throw InvalidArgument("exact estimate needs at least 1000 samples");
  const Composition nu = roa_of_pattern(p, g, u.active());
  const EquilibriumResult eq = solve_fixed_point(nu, u, g);
  const PatternBox box = pattern_box(p, g);
  return gibbs_ratio(
      eq.x, u, g, np, [&](const State& x) { return contains(nu, x, g); },
      [&](const State& x) { return box.contains(x); }, samples, seed, ProbMethod::ExactMC);
}

ProbEstimate p_ss_saddle(const State& x_ss, const ControlVector& u, const Pattern& p, const Geometry& g,
                         const NoiseParams& np, int samples, std::uint64_t seed) {
  const Composition nu = roa_of_pattern(p, g, u.active());
  const PatternBox box = pattern_box(p, g);
  return gibbs_ratio(
      x_ss, u, g, np, [&](const State& x) { return contains(nu, x, g); },
      [&](const State& x) { return box.contains(x); }, samples, seed, ProbMethod::SaddlePoint);
}

Eigen::MatrixXd steady_covariance(const State& x_ss, const ControlVector& u, const Geometry& g,
                                  const NoiseParams& np) {
  const Eigen::MatrixXd h = hessian(x_ss, u, g);
  const auto llt = factor_hessian(h);
  Eigen::MatrixXd sigma = 0.5 * np.sigma * np.sigma * llt.solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
  return 0.5 * (sigma + sigma.transpose());
}

double settling_time(const State& x_ss, const ControlVector& u, const Geometry& g) {
  const Eigen::MatrixXd h = hessian(x_ss, u, g);
  double l1 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues()[0];
  if (!(l1 > 0.0)) throw DegenerateHessian("Hessian is not positive definite");
  return 5.0 / l1;
}

}  // namespace dsa
