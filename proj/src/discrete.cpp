#include "dsa/discrete.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "dsa/control_design.hpp"
#include "dsa/energy.hpp"

namespace dsa {

namespace {

std::vector<double> state_energies(const DiscreteStateSpace& ss, const ControlVector& u) {
  std::vector<double> v(static_cast<std::size_t>(ss.size()));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < ss.size(); ++i) v[static_cast<std::size_t>(i)] = energy(ss.coords(i), u, ss.geometry());
  return v;
}

double log_sum_exp(const std::vector<double>& energy, double beta, const std::vector<int>& idx) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i : idx) m = std::max(m, -beta * energy[static_cast<std::size_t>(i)]);
  double s = 0.0;
  for (int i : idx) s += std::exp(-beta * energy[static_cast<std::size_t>(i)] - m);
  return m + std::log(s);
}

std::vector<int> states_where(const DiscreteStateSpace& ss, const Composition& nu) {
  std::vector<int> out;
  for (int i = 0; i < ss.size(); ++i) {
    if (ss.roa_of(i, nu.active) == nu) out.push_back(i);
  }
  return out;
}

// Symmetrized block: S_ij = lambda_ij exp(-beta (V_j - V_i) / 2).
Eigen::SparseMatrix<double> symmetrized_block(const Generator& G, const std::vector<int>& states) {
  std::unordered_map<int, int> local;
  for (std::size_t k = 0; k < states.size(); ++k) local[states[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t c = 0; c < states.size(); ++c) {
    int j = states[c];
    for (Eigen::SparseMatrix<double>::InnerIterator it(G.lambda, j); it; ++it) {
      auto r = local.find(static_cast<int>(it.row()));
      if (r == local.end()) continue;
      int i = static_cast<int>(it.row());
      double w = i == j ? it.value()
                        : it.value() * std::exp(-0.5 * G.beta *
                                                (G.energy[static_cast<std::size_t>(j)] -
                                                 G.energy[static_cast<std::size_t>(i)]));
      trips.emplace_back(r->second, static_cast<int>(c), w);
    }
  }
  const auto m = static_cast<Eigen::Index>(states.size());
  Eigen::SparseMatrix<double> s(m, m);
  s.setFromTriplets(trips.begin(), trips.end());
  // average with the transpose to remove rounding asymmetry
  Eigen::SparseMatrix<double> st = s.transpose();
  return 0.5 * (s + st);
}

// Smallest nonzero eigenvalue of the PSD matrix A (null vector v known) by
// block inverse iteration with deflation of v.
double smallest_nonzero(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& v) {
  const Eigen::Index m = a.rows();
  const int block = static_cast<int>(std::min<Eigen::Index>(6, m - 1));
  double scale = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) scale = std::max(scale, a.coeff(k, k));
  Eigen::SparseMatrix<double> shifted = a;
  for (Eigen::Index k = 0; k < m; ++k) shifted.coeffRef(k, k) += 1e-10 * scale;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw ConvergenceFailure("block factorization failed");

  auto deflate = [&](Eigen::MatrixXd& x) {
    for (int c = 0; c < x.cols(); ++c) x.col(c) -= v * v.dot(x.col(c));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    x = qr.householderQ() * Eigen::MatrixXd::Identity(m, x.cols());
  };
  Eigen::MatrixXd x(m, block);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (int c = 0; c < block; ++c) x(r, c) = std::sin(1.0 + static_cast<double>(r * (c + 3) % 97));
  }
  deflate(x);
  double prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::MatrixXd y = ldlt.solve(x);
    deflate(y);
    Eigen::MatrixXd ay = a * y;
    Eigen::MatrixXd small = y.transpose() * ay;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (small + small.transpose()));
    x = y * es.eigenvectors();
    double lam = es.eigenvalues()[0];
    if (std::abs(lam - prev) <= 1e-10 * std::abs(lam)) return lam;
    prev = lam;
  }
  return prev;
}

}  // namespace

DiscreteStateSpace::DiscreteStateSpace(const Geometry& g, int cap) : g_(g) {
  const int n = g.particles();
  const int N = g.cells();
  if (N > cap) throw CapExceeded("N = " + std::to_string(N) + " exceeds the state-space cap " + std::to_string(cap));
  if (N > 63) throw CapExceeded("N above 63 does not fit a cell mask");
  if (n <= 0 || n >= N) throw InvalidArgument("need 0 < n < N");
  std::vector<int> cells(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) cells[static_cast<std::size_t>(k)] = k;
  while (true) {
    std::uint64_t m = 0;
    for (int c : cells) m |= std::uint64_t{1} << c;
    index_.emplace(m, static_cast<int>(masks_.size()));
    masks_.push_back(m);
    int k = n - 1;
    while (k >= 0 && cells[static_cast<std::size_t>(k)] == N - n + k) --k;
    if (k < 0) break;
    ++cells[static_cast<std::size_t>(k)];
    for (int j = k + 1; j < n; ++j) cells[static_cast<std::size_t>(j)] = cells[static_cast<std::size_t>(j) - 1] + 1;
  }
}

int DiscreteStateSpace::index_of(std::uint64_t mask) const {
  auto it = index_.find(mask);
  return it == index_.end() ? -1 : it->second;
}

int DiscreteStateSpace::index_of(const Pattern& p) const {
  if (p.cells() != g_.cells()) return -1;
  std::uint64_t m = 0;
  for (int c : p.ones()) m |= std::uint64_t{1} << c;
  return index_of(m);
}

std::vector<int> DiscreteStateSpace::occupied(int i) const {
  std::vector<int> out;
  std::uint64_t m = mask(i);
  for (int c = 0; c < g_.cells(); ++c) {
    if (m >> c & 1U) out.push_back(c);
  }
  return out;
}

Pattern DiscreteStateSpace::pattern(int i) const {
  std::vector<int> bits(static_cast<std::size_t>(g_.cells()), 0);
  for (int c : occupied(i)) bits[static_cast<std::size_t>(c)] = 1;
  return Pattern(bits);
}

State DiscreteStateSpace::coords(int i) const {
  std::vector<int> occ = occupied(i);
  State x(static_cast<Eigen::Index>(occ.size()));
  for (std::size_t k = 0; k < occ.size(); ++k) x[static_cast<Eigen::Index>(k)] = g_.cell_mid(occ[k]);
  return x;
}

Composition DiscreteStateSpace::roa_of(int i, const ActiveSet& active) const {
  return roa_of_state(coords(i), g_, active);
}

DiscreteStateSpace enumerate_states(int n, int N, const Geometry& g, int cap) {
  if (g.particles() != n || g.cells() != N) throw InvalidArgument("n and N must match the geometry");
  return DiscreteStateSpace(g, cap);
}

std::vector<int> Generator::block_states(const Composition& nu) const {
  auto it = std::find(blocks.begin(), blocks.end(), nu);
  if (it == blocks.end()) return {};
  const int b = static_cast<int>(it - blocks.begin());
  std::vector<int> out;
  for (std::size_t i = 0; i < block_of.size(); ++i) {
    if (block_of[i] == b) out.push_back(static_cast<int>(i));
  }
  return out;
}

Generator build_generator(const DiscreteStateSpace& ss, const ControlVector& u, const NoiseParams& np) {
  const Geometry& g = ss.geometry();
  if (u.size() != g.electrodes()) throw InvalidArgument("control dimension does not match the geometry");
  np.require_positive();
  Generator G;
  G.beta = np.beta();
  G.active = u.active();
  if (!is_valid_active_set(G.active, g)) throw InvalidArgument("control must charge both endpoints");
  G.energy = state_energies(ss, u);

  // boundary index -> blocked by a charged electrode
  std::vector<char> wall(static_cast<std::size_t>(g.cells()) + 1, 0);
  for (int k = 0; k < g.electrodes(); ++k) {
    if (u[k] > 0.0) wall[static_cast<std::size_t>(g.electrode_cell(k))] = 1;
  }

  const int S = ss.size();
  std::vector<std::vector<Eigen::Triplet<double>>> cols(static_cast<std::size_t>(S));
#pragma omp parallel for schedule(dynamic, 64)
  for (int j = 0; j < S; ++j) {
    const std::uint64_t mj = ss.mask(j);
    const double vj = G.energy[static_cast<std::size_t>(j)];
    std::vector<int> occ = ss.occupied(j);
    State x = ss.coords(j);
    double out_rate = 0.0;
    auto& col = cols[static_cast<std::size_t>(j)];
    for (std::size_t p = 0; p < occ.size(); ++p) {
      const int a = occ[p];
      for (int dir : {-1, 1}) {
        const int b = a + dir;
        if (b < 0 || b >= g.cells() || (mj >> b & 1U)) continue;
        const int boundary = std::max(a, b);
        if (wall[static_cast<std::size_t>(boundary)]) continue;
        const int i = ss.index_of(mj ^ (std::uint64_t{1} << a) ^ (std::uint64_t{1} << b));
        State mid = x;
        mid[static_cast<Eigen::Index>(p)] = g.cell_lo(boundary);
        const double e = std::max({G.energy[static_cast<std::size_t>(i)], vj, energy(mid, u, g)});
        const double rate = std::exp(-G.beta * (e - vj));
        col.emplace_back(i, j, rate);
        out_rate += rate;
      }
    }
    col.emplace_back(j, j, -out_rate);
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (auto& c : cols) trips.insert(trips.end(), c.begin(), c.end());
  G.lambda.resize(S, S);
  G.lambda.setFromTriplets(trips.begin(), trips.end());
  G.lambda.makeCompressed();

  std::map<std::vector<int>, int> ids;
  G.block_of.resize(static_cast<std::size_t>(S));
  for (int i = 0; i < S; ++i) {
    Composition nu = ss.roa_of(i, G.active);
    auto [it, fresh] = ids.emplace(nu.counts, static_cast<int>(G.blocks.size()));
    if (fresh) G.blocks.push_back(nu);
    G.block_of[static_cast<std::size_t>(i)] = it->second;
  }
  return G;
}

void write_triplets(std::ostream& os, const Generator& G) {
  os << "row col rate\n";
  os.precision(17);
  for (int j = 0; j < G.lambda.outerSize(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(G.lambda, j); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

namespace {

// exp(lambda_B t) p by uniformization on one block; cost grows with gamma t.
Eigen::VectorXd uniformize(const Eigen::SparseMatrix<double>& lam, const Eigen::VectorXd& p0, double t) {
  double gamma = 0.0;
  for (Eigen::Index j = 0; j < lam.cols(); ++j) gamma = std::max(gamma, -lam.coeff(j, j));
  if (gamma == 0.0) return p0;
  // P = I + lambda / gamma is column stochastic; split gamma t into chunks of at most 50
  constexpr double kChunk = 50.0;
  const double tau = gamma * t;
  const auto chunks = static_cast<long long>(std::ceil(tau / kChunk));
  const double tc = tau / static_cast<double>(chunks);
  Eigen::VectorXd p = p0;
  for (long long c = 0; c < chunks; ++c) {
    Eigen::VectorXd term = p;
    double w = std::exp(-tc);
    Eigen::VectorXd acc = w * term;
    double mass = w;
    const int kmax = static_cast<int>(tc + 20.0 * std::sqrt(tc) + 60.0);
    for (int k = 1; k <= kmax && mass < 1.0 - 1e-16; ++k) {
      term += (lam * term) / gamma;
      w *= tc / k;
      acc += w * term;
      mass += w;
    }
    p = acc;
  }
  return p;
}

constexpr double kUniformizationBudget = 1e4;  // gamma t above this goes spectral

}  // namespace

// Block by block. Small gamma t or large blocks: uniformization. Otherwise the
// block is reversible, so lambda_B = D^{1/2} S D^{-1/2} with S symmetric and
// exp(lambda_B t) follows from one dense eigendecomposition of S.
Eigen::VectorXd integrate_master(const Eigen::VectorXd& pi0, const Generator& G, double t) {
  if (pi0.size() != G.size()) throw InvalidArgument("probability vector has the wrong dimension");
  if (t < 0.0) throw InvalidArgument("negative time");
  if ((pi0.array() < 0.0).any()) throw InvalidArgument("negative probability");
  if (t == 0.0) return pi0;

  Eigen::VectorXd pi = pi0;
  for (const Composition& nu : G.blocks) {
    const std::vector<int> states = G.block_states(nu);
    const auto m = static_cast<Eigen::Index>(states.size());
    Eigen::VectorXd p(m);
    for (Eigen::Index k = 0; k < m; ++k) p[k] = pi0[states[static_cast<std::size_t>(k)]];
    const double mass = p.sum();
    if (m == 1 || mass == 0.0) continue;

    double gamma = 0.0;
    double vmin = std::numeric_limits<double>::infinity();
    for (int i : states) {
      gamma = std::max(gamma, G.exit_rate(i));
      vmin = std::min(vmin, G.energy[static_cast<std::size_t>(i)]);
    }
    Eigen::VectorXd half(m);  // D^{1/2}, largest entry 1
    for (Eigen::Index k = 0; k < m; ++k)
      half[k] = std::exp(-0.5 * G.beta * (G.energy[static_cast<std::size_t>(states[static_cast<std::size_t>(k)])] - vmin));

    Eigen::VectorXd out;
    if (gamma * t > kUniformizationBudget && m <= kDenseBlockLimit && half.minCoeff() > 1e-150) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(symmetrized_block(G, states)));
      const Eigen::MatrixXd& Q = es.eigenvectors();
      Eigen::VectorXd y = Q.transpose() * p.cwiseQuotient(half);
      for (Eigen::Index k = 0; k < m; ++k) y[k] *= std::exp(std::min(0.0, es.eigenvalues()[k]) * t);
      out = half.cwiseProduct(Q * y);
    } else {
      std::unordered_map<int, int> local;
      for (std::size_t k = 0; k < states.size(); ++k) local[states[k]] = static_cast<int>(k);
      std::vector<Eigen::Triplet<double>> trips;
      for (std::size_t c = 0; c < states.size(); ++c) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(G.lambda, states[c]); it; ++it) {
          auto r = local.find(static_cast<int>(it.row()));
          if (r != local.end()) trips.emplace_back(r->second, static_cast<int>(c), it.value());
        }
      }
      Eigen::SparseMatrix<double> lam(m, m);
      lam.setFromTriplets(trips.begin(), trips.end());
      out = uniformize(lam, p, t);
    }
    // the exact flow keeps every block's mass; remove rounding drift
    out = out.cwiseMax(0.0);
    out *= mass / out.sum();
    for (Eigen::Index k = 0; k < m; ++k) pi[states[static_cast<std::size_t>(k)]] = out[k];
  }
  return pi;
}

double gibbs_conditional(const std::vector<double>& energy, double beta, const std::vector<int>& region,
                         const std::vector<int>& within) {
  if (within.empty()) throw InvalidArgument("empty conditioning set");
  std::vector<int> r = region;
  std::vector<int> w = within;
  std::sort(r.begin(), r.end());
  std::sort(w.begin(), w.end());
  if (!std::includes(w.begin(), w.end(), r.begin(), r.end())) throw InvalidArgument("region is not inside within");
  if (r.empty()) return 0.0;
  return std::exp(log_sum_exp(energy, beta, r) - log_sum_exp(energy, beta, w));
}

double gibbs_conditional(const DiscreteStateSpace& ss, const ControlVector& u, const NoiseParams& np,
                         const std::vector<int>& region, const std::vector<int>& within) {
  return gibbs_conditional(state_energies(ss, u), np.beta(), region, within);
}

Eigen::VectorXd block_gibbs(const Generator& G, const std::vector<int>& states) {
  const double lse = log_sum_exp(G.energy, G.beta, states);
  Eigen::VectorXd p(static_cast<Eigen::Index>(states.size()));
  for (std::size_t k = 0; k < states.size(); ++k) {
    p[static_cast<Eigen::Index>(k)] = std::exp(-G.beta * G.energy[static_cast<std::size_t>(states[k])] - lse);
  }
  return p;
}

DiscreteSettling discrete_settling(const Generator& G, const Composition& roa) {
  const std::vector<int> states = G.block_states(roa);
  if (states.empty()) throw InvalidArgument("ROA " + roa.str() + " has no states under this generator");
  DiscreteSettling out;
  out.block_size = static_cast<int>(states.size());
  if (states.size() == 1) {
    out.single_state = true;
    return out;
  }
  Eigen::SparseMatrix<double> s = symmetrized_block(G, states);
  double lam;
  if (out.block_size <= kDenseBlockLimit) {
    Eigen::MatrixXd dense = -Eigen::MatrixXd(s);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense, Eigen::EigenvaluesOnly);
    lam = es.eigenvalues()[1];
  } else {
    Eigen::VectorXd v = block_gibbs(G, states).cwiseSqrt();
    v.normalize();
    Eigen::SparseMatrix<double> a = -s;
    lam = smallest_nonzero(a, v);
  }
  if (!(lam > 0.0)) throw ConvergenceFailure("block has no positive relaxation rate");
  out.lambda2 = -lam;
  out.value = 5.0 / lam;
  return out;
}

DiscreteProduct discrete_product(const Schedule& sched, const DiscreteStateSpace& ss) {
  const NoiseParams np(sched.sigma);
  DiscreteProduct out;
  out.total = 1.0;
  for (const auto& st : sched.stages) {
    const std::vector<double> e = state_energies(ss, st.u);
    std::vector<int> within;
    std::vector<int> region;
    for (int i = 0; i < ss.size(); ++i) {
      if (ss.roa_of(i, st.from_nu.active) != st.from_nu) continue;
      within.push_back(i);
      if (ss.roa_of(i, st.target_nu.active) == st.target_nu) region.push_back(i);
    }
    out.stages.push_back(gibbs_conditional(e, np.beta(), region, within));
    out.total *= out.stages.back();
  }
  const Composition nu = roa_of_pattern(sched.pattern, ss.geometry(), sched.static_u.active());
  const int target = ss.index_of(sched.pattern);
  out.p_static = gibbs_conditional(state_energies(ss, sched.static_u), np.beta(), {target}, states_where(ss, nu));
  out.total *= out.p_static;
  return out;
}

}  // namespace dsa
