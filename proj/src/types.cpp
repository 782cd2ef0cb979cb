#include "dsa/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsa {

Geometry::Geometry(std::vector<int> gaps, double d0, int particles)
    : gaps_(std::move(gaps)), d0_(d0), n_(particles) {
  if (gaps_.empty()) throw InvalidArgument("geometry needs at least one electrode interval");
  if (!(d0_ > 0.0)) throw InvalidArgument("cell width must be positive");
  for (int gap : gaps_) {
    if (gap <= 0) throw InvalidArgument("electrode gaps must be positive cell counts");
  }
  cells_ = std::accumulate(gaps_.begin(), gaps_.end(), 0);
  if (n_ < 1) throw InvalidArgument("need at least one particle");
  if (n_ >= cells_) throw InvalidArgument("particle count must be below the cell count");

  q_.resize(static_cast<Eigen::Index>(gaps_.size()) + 1);
  cell_of_electrode_.resize(gaps_.size() + 1);
  q_[0] = 0.0;
  cell_of_electrode_[0] = 0;
  int acc = 0;
  for (std::size_t k = 0; k < gaps_.size(); ++k) {
    acc += gaps_[k];
    cell_of_electrode_[k + 1] = acc;
    q_[static_cast<Eigen::Index>(k) + 1] = d0_ * acc;
  }
}

Geometry Geometry::uniform(int intervals, int cells_per_gap, double d0, int particles) {
  return Geometry(std::vector<int>(static_cast<std::size_t>(intervals), cells_per_gap), d0, particles);
}

ControlVector::ControlVector(std::initializer_list<double> charges) : u(static_cast<Eigen::Index>(charges.size())) {
  Eigen::Index k = 0;
  for (double v : charges) u[k++] = v;
}

ActiveSet ControlVector::active() const {
  ActiveSet out;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (u[k] > 0.0) out.push_back(static_cast<int>(k));
  }
  return out;
}

bool ControlVector::in_static_set() const {
  if (u.size() < 2) return false;
  if (!(u[0] > 0.0) || !(u[u.size() - 1] > 0.0)) return false;
  return (u.array() >= 0.0).all();
}

bool ControlVector::in_stage_set(const ActiveSet& allowed) const {
  if (!in_static_set()) return false;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    bool permitted = std::find(allowed.begin(), allowed.end(), static_cast<int>(k)) != allowed.end();
    if (!permitted && u[k] != 0.0) return false;
  }
  return true;
}

NoiseParams::NoiseParams(double s) : sigma(s) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be finite and nonnegative");
}

void NoiseParams::require_positive() const {
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive for Gibbs quantities");
}

ActiveSet all_electrodes(const Geometry& g) {
  ActiveSet out(static_cast<std::size_t>(g.electrodes()));
  std::iota(out.begin(), out.end(), 0);
  return out;
}

ActiveSet endpoints_only(const Geometry& g) { return {0, g.intervals()}; }

bool is_valid_active_set(const ActiveSet& active, const Geometry& g) {
  if (active.size() < 2) return false;
  if (active.front() != 0 || active.back() != g.intervals()) return false;
  return std::is_sorted(active.begin(), active.end()) &&
         std::adjacent_find(active.begin(), active.end()) == active.end();
}

bool in_state_space(const State& x, const Geometry& g) {
  if (x.size() != g.particles()) return false;
  if (!(x[0] > 0.0) || !(x[x.size() - 1] < g.length())) return false;
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) return false;
  }
  return true;
}

}  // namespace dsa
