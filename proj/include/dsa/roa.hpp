#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dsa/types.hpp"

namespace dsa {

// A length-N occupancy word with exactly n ones.
class Pattern {
 public:
  Pattern() = default;
  explicit Pattern(std::vector<int> bits);

  // Parses a '0'/'1' string such as "0111001100100101".
  static Pattern parse(std::string_view text);

  int cells() const { return static_cast<int>(bits_.size()); }
  int count() const { return static_cast<int>(ones_.size()); }
  const std::vector<int>& bits() const { return bits_; }
  // 0-based indices of occupied cells, ascending.
  const std::vector<int>& ones() const { return ones_; }
  std::string str() const;

  bool operator==(const Pattern& other) const { return bits_ == other.bits_; }

 private:
  std::vector<int> bits_;
  std::vector<int> ones_;
};

// Particle counts per active-electrode interval. Identifies one region of
// attraction S(nu) of any control whose positive charges are exactly `active`.
struct Composition {
  std::vector<int> counts;
  ActiveSet active;

  int total() const;
  bool operator==(const Composition& other) const = default;
  std::string str() const;
};

// Hyperrectangle of cells occupied by a pattern, one side per particle.
struct PatternBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  bool contains(const State& x) const;
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
};

// All weak compositions of n into (active.size() - 1) parts, first part descending.
std::vector<Composition> enumerate_roas(int n, const ActiveSet& active, const Geometry& g);

// binomial(n + c - 1, c - 1).
long long roa_count(int n, int parts);

Composition roa_of_pattern(const Pattern& p, const Geometry& g, const ActiveSet& active);

// Composition of a state relative to `active`. Throws InvalidArgument if a
// particle sits exactly on an active electrode.
Composition roa_of_state(const State& x, const Geometry& g, const ActiveSet& active);

// Strict-inequality membership x in S(nu).
bool contains(const Composition& nu, const State& x, const Geometry& g);

PatternBox pattern_box(const Pattern& p, const Geometry& g);

// Cell midpoints of the occupied cells (the target point xi_d).
State pattern_midpoints(const Pattern& p, const Geometry& g);

// True if `fine` splits every interval of `coarse` so that the particle
// counts of `coarse` are the sums of the corresponding entries of `fine`.
bool refines(const Composition& coarse, const Composition& fine);

// Points of the ROA: for each interval, the nu_k particles evenly spaced
// strictly inside it.
State interior_point(const Composition& nu, const Geometry& g);

}  // namespace dsa
