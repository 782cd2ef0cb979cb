#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dsa {

// Particle positions, ascending. Membership in the ordered state space is
// checked by in_state_space(); the numeric kernels never reorder.
using State = Eigen::VectorXd;

// Sorted electrode indices with nonzero charge. Always contains 0 and c.
using ActiveSet = std::vector<int>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two charges closer than the singularity floor.
class SingularConfiguration : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Iterative solver did not meet its tolerance within its budget.
class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

inline constexpr double kSingularFloor = 1e-12;

// Electrode layout on a segment partitioned into N equal cells.
//
// Electrode k sits at q_k = d0 * (gap_1 + ... + gap_k), so every electrode
// lies on a cell boundary and q_0 = 0.
class Geometry {
 public:
  // Empty placeholder; every accessor is meaningless until assigned.
  Geometry() = default;
  Geometry(std::vector<int> gaps, double d0, int particles);

  // Equal spacing helper: c intervals of `cells_per_gap` cells each.
  static Geometry uniform(int intervals, int cells_per_gap, double d0, int particles);

  int particles() const { return n_; }
  int cells() const { return cells_; }
  int intervals() const { return static_cast<int>(gaps_.size()); }
  int electrodes() const { return intervals() + 1; }
  double cell_width() const { return d0_; }
  double length() const { return q_[q_.size() - 1]; }
  const std::vector<int>& gaps() const { return gaps_; }
  const Eigen::VectorXd& electrode_positions() const { return q_; }
  double electrode(int k) const { return q_[k]; }

  // Cell index (0-based) on whose left boundary electrode k sits.
  int electrode_cell(int k) const { return cell_of_electrode_[static_cast<std::size_t>(k)]; }

  double cell_lo(int cell) const { return d0_ * cell; }
  double cell_hi(int cell) const { return d0_ * (cell + 1); }
  double cell_mid(int cell) const { return d0_ * (cell + 0.5); }

  bool operator==(const Geometry& other) const {
    return gaps_ == other.gaps_ && d0_ == other.d0_ && n_ == other.n_;
  }

 private:
  std::vector<int> gaps_;
  std::vector<int> cell_of_electrode_;
  double d0_ = 0.0;
  int n_ = 0;
  int cells_ = 0;
  Eigen::VectorXd q_;
};

// Normalized electrode charges u_0..u_c.
struct ControlVector {
  Eigen::VectorXd u;

  ControlVector() = default;
  explicit ControlVector(Eigen::VectorXd charges) : u(std::move(charges)) {}
  ControlVector(std::initializer_list<double> charges);

  int size() const { return static_cast<int>(u.size()); }
  double operator[](int k) const { return u[k]; }

  ActiveSet active() const;

  // Endpoints strictly positive, interior nonnegative.
  bool in_static_set() const;
  // Zero outside `allowed`, strictly positive at both endpoints, nonnegative inside.
  bool in_stage_set(const ActiveSet& allowed) const;
};

// sigma = 0 is allowed for noiseless simulation; everything built on the
// Gibbs density needs sigma > 0.
struct NoiseParams {
  double sigma = 0.45;

  explicit NoiseParams(double s = 0.45);
  // 2 / sigma^2, the Gibbs inverse temperature in normalized units.
  double beta() const { return 2.0 / (sigma * sigma); }
  void require_positive() const;
};

ActiveSet all_electrodes(const Geometry& g);
ActiveSet endpoints_only(const Geometry& g);
bool is_valid_active_set(const ActiveSet& active, const Geometry& g);

// q_0 < x_1 < ... < x_n < q_c.
bool in_state_space(const State& x, const Geometry& g);

}  // namespace dsa
