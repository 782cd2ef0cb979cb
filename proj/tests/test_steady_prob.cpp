#include <cmath>

#include "doctest.h"
#include "dsa/energy.hpp"
#include "dsa/equilibrium.hpp"
#include "dsa/steady_prob.hpp"
#include "helpers.hpp"

using namespace dsa;

namespace {

const ControlVector kStatic{7.209639423167175, 2.040871286536225, 0.05, 0.447323000778018, 0.2905686721331512};

}  // namespace

TEST_CASE("p_ss_exact: symmetric single particle") {
  const Geometry g = test::unit_segment(2, 1);
  const ProbEstimate p = p_ss_exact({1, 1}, Pattern::parse("10"), g, NoiseParams(0.45), 20000, 7);
  CHECK(std::abs(p.value - 0.5) <= 3 * p.std_err);
  CHECK(p.method == ProbMethod::ExactMC);
}

TEST_CASE("p_ss_exact: never exceeds one") {
  const Geometry g = test::unit_segment(4, 2);
  for (double s : {0.1, 0.45, 1.0, 2.0}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const ProbEstimate p = p_ss_exact({1, 2}, Pattern::parse("0110"), g, NoiseParams(s), 2000, seed);
      CHECK(p.value <= 1.0);
      CHECK(p.value >= 0.0);
    }
  }
}

TEST_CASE("p_ss_exact: example static control") {
  const ProbEstimate p =
      p_ss_exact(kStatic, test::example_pattern(), test::example_geometry(), NoiseParams(0.45), 200000, 3);
  CHECK(p.value == doctest::Approx(0.94).epsilon(0.03 / 0.94));
}

TEST_CASE("p_ss_saddle: small-noise limits") {
  const Geometry g = test::unit_segment(2, 1);
  // equilibrium of (1, 1.01) sits just left of 0.5, inside cell 0
  const ControlVector u{1.0, 1.01};
  const State x = solve_fixed_point({{1}, {0, 1}}, u, g).x;
  REQUIRE(x[0] < 0.5);
  CHECK(p_ss_saddle(x, u, Pattern::parse("10"), g, NoiseParams(1e-3), 4096, 1).value == doctest::Approx(1.0));
  CHECK(p_ss_saddle(x, u, Pattern::parse("01"), g, NoiseParams(1e-3), 4096, 1).value == doctest::Approx(0.0));
}

TEST_CASE("p_ss_saddle agrees with p_ss_exact on the example") {
  const Geometry g = test::example_geometry();
  const Pattern p = test::example_pattern();
  const State x = solve_fixed_point(roa_of_pattern(p, g, all_electrodes(g)), kStatic, g).x;
  const ProbEstimate sp = p_ss_saddle(x, kStatic, p, g, NoiseParams(0.45), 100000, 5);
  const ProbEstimate ex = p_ss_exact(kStatic, p, g, NoiseParams(0.45), 100000, 5);
  CHECK(std::abs(sp.value - ex.value) < 0.02);
}

TEST_CASE("p_ss_saddle and p_ss_exact agree on small instances") {
  dsa::Rng rng(41);
  std::uniform_real_distribution<double> U(0.5, 3.0);
  const Geometry g({4, 4}, 0.25, 3);
  const Pattern p = Pattern::parse("01100100");
  const Composition nu = roa_of_pattern(p, g, all_electrodes(g));
  for (double s : {0.2, 0.3, 0.45}) {
    for (int t = 0; t < 3; ++t) {
      const ControlVector u{U(rng), U(rng), U(rng)};
      const State x = solve_fixed_point(nu, u, g).x;
      const ProbEstimate a = p_ss_saddle(x, u, p, g, NoiseParams(s), 40000, 9);
      const ProbEstimate b = p_ss_exact(u, p, g, NoiseParams(s), 40000, 9);
      CHECK(std::abs(a.value - b.value) <= 3 * std::hypot(a.std_err, b.std_err) + 0.02);
    }
  }
}

TEST_CASE("estimates are stable under doubling the sample count") {
  const Geometry g({4, 4}, 0.25, 3);
  const Pattern p = Pattern::parse("01100100");
  const ControlVector u{1.0, 1.5, 0.8};
  const ProbEstimate a = p_ss_exact(u, p, g, NoiseParams(0.45), 20000, 4);
  const ProbEstimate b = p_ss_exact(u, p, g, NoiseParams(0.45), 40000, 4);
  CHECK(std::abs(a.value - b.value) <= 3 * std::hypot(a.std_err, b.std_err));
  const State x = solve_fixed_point(roa_of_pattern(p, g, all_electrodes(g)), u, g).x;
  const ProbEstimate c = p_ss_saddle(x, u, p, g, NoiseParams(0.45), 20000, 4);
  const ProbEstimate d = p_ss_saddle(x, u, p, g, NoiseParams(0.45), 40000, 4);
  CHECK(std::abs(c.value - d.value) <= 3 * std::hypot(c.std_err, d.std_err));
}

TEST_CASE("estimates are reproducible for a fixed seed") {
  const Geometry g({4, 4}, 0.25, 3);
  const Pattern p = Pattern::parse("01100100");
  const ControlVector u{1.0, 1.5, 0.8};
  const ProbEstimate a = p_ss_exact(u, p, g, NoiseParams(0.45), 8192, 17);
  const ProbEstimate b = p_ss_exact(u, p, g, NoiseParams(0.45), 8192, 17);
  CHECK(a.value == b.value);
  CHECK(a.std_err == b.std_err);
}

TEST_CASE("steady_covariance: scalar value") {
  const Geometry g = test::unit_segment(2, 1);
  const Eigen::MatrixXd S = steady_covariance(State::Constant(1, 0.5), {1, 1}, g, NoiseParams(0.45));
  CHECK(S(0, 0) == doctest::Approx(0.0031640625).epsilon(1e-14));
}

TEST_CASE("steady_covariance: Lyapunov residual and quadratic scaling") {
  const Geometry g = test::example_geometry();
  const Pattern p = test::example_pattern();
  const State x = solve_fixed_point(roa_of_pattern(p, g, all_electrodes(g)), kStatic, g).x;
  const Eigen::MatrixXd H = hessian(x, kStatic, g);
  for (double s : {0.1, 0.45}) {
    const Eigen::MatrixXd S = steady_covariance(x, kStatic, g, NoiseParams(s));
    const Eigen::MatrixXd R = -H * S - S * H + s * s * Eigen::MatrixXd::Identity(8, 8);
    CHECK(R.cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::MatrixXd S2 = steady_covariance(x, kStatic, g, NoiseParams(2 * s));
    CHECK((S2 - 4 * S).cwiseAbs().maxCoeff() < 1e-12 * S.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("settling_time: scalar value") {
  const Geometry g = test::unit_segment(2, 1);
  CHECK(settling_time(State::Constant(1, 0.5), {1, 1}, g) == doctest::Approx(0.15625).epsilon(1e-14));
}

TEST_CASE("settling_time: example static stage") {
  const Geometry g = test::example_geometry();
  const Pattern p = test::example_pattern();
  const State x = solve_fixed_point(roa_of_pattern(p, g, all_electrodes(g)), kStatic, g).x;
  CHECK(settling_time(x, kStatic, g) == doctest::Approx(0.15).epsilon(0.25));
}

TEST_CASE("settling_time: doubling the charges at a fixed geometry shrinks it") {
  const Geometry g = test::example_geometry();
  const Pattern p = test::example_pattern();
  const State x = solve_fixed_point(roa_of_pattern(p, g, all_electrodes(g)), kStatic, g).x;
  const ControlVector twice(2.0 * kStatic.u);
  CHECK(settling_time(x, twice, g) < settling_time(x, kStatic, g));
}

TEST_CASE("saddle probability does not drop as the equilibrium approaches the target") {
  // One particle walked toward the center of cell 1. The Hessian grows along
  // the way, which only sharpens the Gaussian, so the mass may not drop.
  const Geometry g = test::unit_segment(4, 1);
  const Pattern p = Pattern::parse("0100");
  const ControlVector u{1, 1};
  const double target = 0.375;
  double prev = -1.0;
  for (int k = 10; k >= 0; --k) {
    State x = State::Constant(1, target + 0.01 * k);
    const ProbEstimate e = p_ss_saddle(x, u, p, g, NoiseParams(0.1), 20000, 3);
    CHECK(e.value >= prev - 3 * e.std_err);
    prev = e.value;
  }
}
