#pragma once

#include <algorithm>
#include <random>

#include "dsa/random.hpp"
#include "dsa/roa.hpp"
#include "dsa/types.hpp"

namespace dsa::test {

inline Geometry example_geometry() { return Geometry({4, 4, 4, 4}, 0.25, 8); }
inline Pattern example_pattern() { return Pattern::parse("0111001100100101"); }

// Unit interval with N cells, electrodes only at the ends.
inline Geometry unit_segment(int cells, int particles) { return Geometry({cells}, 1.0 / cells, particles); }

// Sorted uniform draws on (lo, hi) redrawn until every gap exceeds `gap`.
inline State random_sorted(Rng& rng, int n, double lo, double hi, double gap = 1e-3) {
  std::uniform_real_distribution<double> U(lo, hi);
  for (;;) {
    State x(n);
    for (int i = 0; i < n; ++i) x[i] = U(rng);
    std::sort(x.data(), x.data() + n);
    bool ok = x[0] - lo > gap && hi - x[n - 1] > gap;
    for (int i = 1; i < n; ++i) ok = ok && x[i] - x[i - 1] > gap;
    if (ok) return x;
  }
}

// Random point of S(nu), every gap at least `gap`.
inline State random_in_roa(Rng& rng, const Composition& nu, const Geometry& g, double gap = 1e-3) {
  State x(nu.total());
  int k = 0;
  for (std::size_t j = 0; j < nu.counts.size(); ++j) {
    const int m = nu.counts[j];
    if (m == 0) continue;
    State part = random_sorted(rng, m, g.electrode(nu.active[j]), g.electrode(nu.active[j + 1]), gap);
    for (int i = 0; i < m; ++i) x[k++] = part[i];
  }
  return x;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace dsa::test
