#pragma once

#include <cstdint>
#include <iosfwd>
#include <unordered_map>
#include <vector>

#include <Eigen/Sparse>

#include "dsa/roa.hpp"
#include "dsa/types.hpp"

namespace dsa {

struct Schedule;

class CapExceeded : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// All placements of n particles on N cells. States are indexed in
// lexicographic order of their occupied-cell tuples, so for n=2, N=4 the
// order is 1100, 1010, 1001, 0110, 0101, 0011.
class DiscreteStateSpace {
 public:
  DiscreteStateSpace(const Geometry& g, int cap = 20);

  int size() const { return static_cast<int>(masks_.size()); }
  const Geometry& geometry() const { return g_; }
  std::uint64_t mask(int i) const { return masks_[static_cast<std::size_t>(i)]; }
  // -1 when the mask is not a state (wrong popcount or out of range).
  int index_of(std::uint64_t mask) const;
  int index_of(const Pattern& p) const;
  Pattern pattern(int i) const;
  // Cell-midpoint coordinates, ascending.
  State coords(int i) const;
  std::vector<int> occupied(int i) const;
  Composition roa_of(int i, const ActiveSet& active) const;

 private:
  Geometry g_;
  std::vector<std::uint64_t> masks_;
  std::unordered_map<std::uint64_t, int> index_;
};

DiscreteStateSpace enumerate_states(int n, int N, const Geometry& g, int cap = 20);

// Column convention: lambda(i, j) is the rate of the jump j -> i and the
// diagonal holds minus the column sums, so d pi/dt = lambda * pi.
struct Generator {
  Eigen::SparseMatrix<double> lambda;
  std::vector<double> energy;      // V at every state under the generator's control
  ActiveSet active;
  double beta = 0.0;
  std::vector<Composition> blocks; // distinct ROAs
  std::vector<int> block_of;       // state -> index into blocks

  int size() const { return static_cast<int>(energy.size()); }
  std::vector<int> block_states(const Composition& nu) const;
  double exit_rate(int j) const { return -lambda.coeff(j, j); }
};

// Nearest-cell hops with barrier max(V_i, V_j, V_mid), where V_mid puts the
// hopping particle on the shared cell boundary. Hops across an electrode
// with positive charge have rate 0.
Generator build_generator(const DiscreteStateSpace& ss, const ControlVector& u, const NoiseParams& np);

// Writes "row col rate" lines (0-based, off-diagonal and diagonal entries).
void write_triplets(std::ostream& os, const Generator& G);

// pi(t) = exp(lambda t) pi0, one ROA block at a time: uniformization while
// gamma t stays moderate, else a dense eigendecomposition of the symmetrized
// block (blocks up to kDenseBlockLimit states).
Eigen::VectorXd integrate_master(const Eigen::VectorXd& pi0, const Generator& G, double t);

// Sum over region of exp(-beta V) / the same sum over within, in log space.
double gibbs_conditional(const DiscreteStateSpace& ss, const ControlVector& u, const NoiseParams& np,
                         const std::vector<int>& region, const std::vector<int>& within);
double gibbs_conditional(const std::vector<double>& energy, double beta, const std::vector<int>& region,
                         const std::vector<int>& within);

// Gibbs distribution restricted to `states` (same order).
Eigen::VectorXd block_gibbs(const Generator& G, const std::vector<int>& states);

struct DiscreteSettling {
  double value = 0.0;       // 5 / |lambda_2|
  double lambda2 = 0.0;     // smallest-magnitude nonzero eigenvalue (negative)
  int block_size = 0;
  bool single_state = false;
};

inline constexpr int kDenseBlockLimit = 4000;

// Size-1 blocks have no relaxation mode; they return value 0 with single_state set.
DiscreteSettling discrete_settling(const Generator& G, const Composition& roa);

// Conditional probabilities of a schedule under the discrete model.
struct DiscreteProduct {
  std::vector<double> stages;  // Pi_d^i
  double p_static = 0.0;       // Pi_ss
  double total = 0.0;
};

DiscreteProduct discrete_product(const Schedule& sched, const DiscreteStateSpace& ss);

}  // namespace dsa
