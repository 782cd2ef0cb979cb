#include "dsa/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace dsa {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const NelderMeadOptions& opts) {
  const Eigen::Index dim = x0.size();
  auto project = [&](Eigen::VectorXd x) { return x.cwiseMax(lo).cwiseMin(hi).eval(); };

  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    return f(x);
  };

  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(dim) + 1);
  std::vector<double> values(simplex.size());
  simplex[0] = project(std::move(x0));
  for (Eigen::Index k = 0; k < dim; ++k) {
    Eigen::VectorXd v = simplex[0];
    double step = std::max(opts.min_step, opts.initial_step * std::abs(v[k]));
    // step away from the nearer bound so the vertex stays distinct after projection
    v[k] += (v[k] + step <= hi[k]) ? step : -step;
    simplex[static_cast<std::size_t>(k) + 1] = project(v);
  }
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  while (res.evaluations < opts.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double spread = values[worst] - values[best];
    double size = 0.0;
    for (const auto& v : simplex) size = std::max(size, (v - simplex[best]).lpNorm<Eigen::Infinity>());
    if (spread <= opts.f_tol && size <= opts.x_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(dim);

    Eigen::VectorXd xr = project(centroid + (centroid - simplex[worst]));
    double fr = eval(xr);
    if (fr < values[best]) {
      Eigen::VectorXd xe = project(centroid + 2.0 * (centroid - simplex[worst]));
      double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = xr;
      values[worst] = fr;
      continue;
    }
    // contraction: outside if the reflection improved on the worst vertex
    Eigen::VectorXd xc = fr < values[worst] ? project(centroid + 0.5 * (xr - centroid))
                                            : project(centroid + 0.5 * (simplex[worst] - centroid));
    double fc = eval(xc);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = xc;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = project(simplex[best] + 0.5 * (simplex[i] - simplex[best]));
      values[i] = eval(simplex[i]);
    }
  }

  auto it = std::min_element(values.begin(), values.end());
  std::size_t best = static_cast<std::size_t>(it - values.begin());
  res.x = simplex[best];
  res.f = values[best];
  return res;
}

}  // namespace dsa
