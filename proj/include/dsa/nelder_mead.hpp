#pragma once

#include <functional>

#include <Eigen/Dense>

namespace dsa {

struct NelderMeadOptions {
  int max_evaluations = 2000;
  double f_tol = 1e-6;        // spread of simplex values
  double x_tol = 1e-6;        // max vertex distance from the best vertex (inf-norm)
  double initial_step = 0.1;  // relative simplex edge, at least `min_step`
  double min_step = 0.05;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;  // false: evaluation budget exhausted (stall)
};

// Minimizes `f` over the box [lo, hi]. Every trial point is projected onto
// the box before evaluation. Standard coefficients: reflection 1, expansion 2,
// contraction 1/2, shrink 1/2.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const NelderMeadOptions& opts = {});

}  // namespace dsa
