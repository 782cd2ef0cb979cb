#pragma once

#include <vector>

#include "dsa/roa.hpp"
#include "dsa/types.hpp"

namespace dsa {

// The scalar equation f_k(..., y, ...) = 0 showed no sign change on its bracket.
class NoBracket : public ConvergenceFailure {
 public:
  using ConvergenceFailure::ConvergenceFailure;
};

struct EquilibriumOptions {
  double step_tol = 1e-10;      // max-norm step between successive iterates
  double residual_tol = 1e-8;   // certificate on max_k |f_k| / H_kk
  int max_iterations = 10000;
  double t_max = 1000.0;        // gradient flow only
  double initial_step = 1e-4;   // gradient flow only
};

struct EquilibriumResult {
  State x;
  int iterations = 0;
  double residual = 0.0;         // max-norm of the force at x
  double scaled_residual = 0.0;  // max_k |f_k| / H_kk, a Newton-step length
  double min_eig = 0.0;
  std::vector<double> step_norms;  // fixed point: ||x^{k+1} - x^k||_inf per iteration
  std::vector<double> energies;    // gradient flow: V along accepted samples
  double time = 0.0;               // gradient flow: integrated time
};

// Unique stable equilibrium of S(nu) by iterating the componentwise root map
// x^{k+1} = g(x^k). Each g_k solves f_k = 0 on the interval between its
// neighbours and the electrodes bounding its cell interval.
//
// The control must be positive on every electrode of nu.active that bounds a
// nonempty interval, and zero off nu.active.
EquilibriumResult solve_fixed_point(const Composition& nu, const ControlVector& u, const Geometry& g,
                                    const EquilibriumOptions& opts = {});

// Same equilibrium by integrating xdot = f(x, u) from x0 with explicit steps
// that halve on any ordering, electrode-crossing, or energy-increase violation
// and double after 10 consecutive accepted steps.
EquilibriumResult solve_gradient_flow(const State& x0, const ControlVector& u, const Geometry& g,
                                      const EquilibriumOptions& opts = {});

struct StabilityCertificate {
  bool is_stable = false;
  double min_eig = 0.0;
  double gershgorin_bound = 0.0;  // min_k (H_kk - sum_{i != k} |H_ki|), a lower bound on min_eig
};

StabilityCertificate certify_stability(const State& x, const ControlVector& u, const Geometry& g);

}  // namespace dsa
