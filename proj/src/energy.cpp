#include "dsa/energy.hpp"

#include <cmath>
#include <sstream>

namespace dsa {
namespace {

[[noreturn]] void throw_singular(const char* what, Eigen::Index i, Eigen::Index j, double dist) {
  std::ostringstream os;
  os << "singular configuration: " << what << " " << i << "," << j << " at distance " << dist;
  throw SingularConfiguration(os.str());
}

void check_sizes(const State& x, const ControlVector& u, const Geometry& g) {
  if (u.size() != g.electrodes()) throw InvalidArgument("control dimension does not match electrode count");
  if (x.size() < 1) throw InvalidArgument("empty state");
}

}  // namespace

double energy(const State& x, const ControlVector& u, const Geometry& g, double floor) {
  check_sizes(x, u, g);
  const auto& q = g.electrode_positions();
  double v = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (Eigen::Index j = i + 1; j < x.size(); ++j) {
      double d = std::abs(x[i] - x[j]);
      if (d < floor) throw_singular("particles", i, j, d);
      v += 1.0 / d;
    }
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      if (u.u[j] == 0.0) continue;
      double d = std::abs(x[i] - q[j]);
      if (d < floor) throw_singular("particle/electrode", i, j, d);
      v += u.u[j] / d;
    }
  }
  return v;
}

Eigen::VectorXd force(const State& x, const ControlVector& u, const Geometry& g, double floor) {
  check_sizes(x, u, g);
  const auto& q = g.electrode_positions();
  const Eigen::Index n = x.size();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double d = x[i] - x[j];
      double ad = std::abs(d);
      if (ad < floor) throw_singular("particles", i, j, ad);
      // sign(d)/d^2 == d/|d|^3
      double c = d / (ad * ad * ad);
      f[i] += c;
      f[j] -= c;
    }
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      if (u.u[j] == 0.0) continue;
      double d = x[i] - q[j];
      double ad = std::abs(d);
      if (ad < floor) throw_singular("particle/electrode", i, j, ad);
      f[i] += u.u[j] * d / (ad * ad * ad);
    }
  }
  return f;
}

Eigen::MatrixXd hessian(const State& x, const ControlVector& u, const Geometry& g, double floor) {
  check_sizes(x, u, g);
  const auto& q = g.electrode_positions();
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double ad = std::abs(x[i] - x[j]);
      if (ad < floor) throw_singular("particles", i, j, ad);
      double c = 2.0 / (ad * ad * ad);
      h(i, i) += c;
      h(j, j) += c;
      h(i, j) = -c;
      h(j, i) = -c;
    }
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      if (u.u[j] == 0.0) continue;
      double ad = std::abs(x[i] - q[j]);
      if (ad < floor) throw_singular("particle/electrode", i, j, ad);
      h(i, i) += 2.0 * u.u[j] / (ad * ad * ad);
    }
  }
  return h;
}

ScalarForce force_component(const State& x, int k, double y, const ControlVector& u, const Geometry& g) {
  const auto& q = g.electrode_positions();
  double value = 0.0;
  double slope = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (j == k) continue;
    double d = y - x[j];
    double ad = std::abs(d);
    double inv3 = 1.0 / (ad * ad * ad);
    value += d * inv3;
    slope -= 2.0 * inv3;
  }
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (u.u[j] == 0.0) continue;
    double d = y - q[j];
    double ad = std::abs(d);
    double inv3 = 1.0 / (ad * ad * ad);
    value += u.u[j] * d * inv3;
    slope -= 2.0 * u.u[j] * inv3;
  }
  return {value, slope};
}

}  // namespace dsa
