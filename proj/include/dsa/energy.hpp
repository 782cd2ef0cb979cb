#pragma once

#include "dsa/types.hpp"

namespace dsa {

// Normalized Coulomb energy of the particles and electrodes:
//   V = 1/2 sum_{i != j} 1/|x_i - x_j| + sum_i sum_j u_j / |x_i - q_j|
// Electrodes with zero charge contribute nothing and are not floor-checked.
// Throws SingularConfiguration when a contributing distance is below `floor`.
double energy(const State& x, const ControlVector& u, const Geometry& g, double floor = kSingularFloor);

// f = -grad_x V.
Eigen::VectorXd force(const State& x, const ControlVector& u, const Geometry& g, double floor = kSingularFloor);

// d^2 V / dx dx, symmetric by construction.
Eigen::MatrixXd hessian(const State& x, const ControlVector& u, const Geometry& g, double floor = kSingularFloor);

// Component k of the force and its derivative with respect to x_k, with the
// k-th particle placed at y and all others as in x. Used by the scalar root
// solves of the fixed-point equilibrium map.
struct ScalarForce {
  double value;
  double slope;  // d f_k / d x_k, strictly negative on the ROA
};
ScalarForce force_component(const State& x, int k, double y, const ControlVector& u, const Geometry& g);

}  // namespace dsa
