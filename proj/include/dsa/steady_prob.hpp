#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "dsa/roa.hpp"
#include "dsa/types.hpp"

namespace dsa {

class DegenerateHessian : public Error {
 public:
  using Error::Error;
};

enum class ProbMethod { ExactMC, SaddlePoint, Simulation, Discrete };

std::string to_string(ProbMethod m);

struct ProbEstimate {
  double value = 0.0;
  double std_err = 0.0;
  ProbMethod method = ProbMethod::SaddlePoint;
};

inline constexpr int kBatches = 32;

using StatePredicate = std::function<bool(const State&)>;

// Probability of `region` within `within` under the Gibbs density
// exp(-2 V / sigma^2) restricted to `within`, estimated by sampling the
// saddle-point Gaussian N(x_ss, sigma^2/2 H^-1).
//
//  - SaddlePoint: plain counts, i.e. the Gaussian mass ratio.
//  - ExactMC: importance weights exp(-2/sigma^2 (V - V_ss - 1/2 d'Hd)) turn the
//    same samples into a self-normalized estimate of the exact Gibbs ratio.
//
// Standard error from batch means over kBatches batches; each batch draws
// from its own stream keyed by (seed, batch).
ProbEstimate gibbs_ratio(const State& x_ss, const ControlVector& u, const Geometry& g, const NoiseParams& np,
                         const StatePredicate& within, const StatePredicate& region, int samples,
                         std::uint64_t seed, ProbMethod method);

// Exact steady-state pattern probability. Solves the equilibrium of the
// pattern's ROA under u first. Requires samples >= 1000.
ProbEstimate p_ss_exact(const ControlVector& u, const Pattern& p, const Geometry& g, const NoiseParams& np,
                        int samples, std::uint64_t seed);

// Saddle-point (Gaussian) approximation at a known equilibrium.
ProbEstimate p_ss_saddle(const State& x_ss, const ControlVector& u, const Pattern& p, const Geometry& g,
                         const NoiseParams& np, int samples, std::uint64_t seed);

// sigma^2/2 H^-1, the stationary covariance of the linearized dynamics.
Eigen::MatrixXd steady_covariance(const State& x_ss, const ControlVector& u, const Geometry& g,
                                  const NoiseParams& np);

// 5 / lambda_min(H).
double settling_time(const State& x_ss, const ControlVector& u, const Geometry& g);

}  // namespace dsa
