#include "dsa/roa.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace dsa {

Pattern::Pattern(std::vector<int> bits) : bits_(std::move(bits)) {
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] != 0 && bits_[i] != 1) throw InvalidArgument("pattern entries must be 0 or 1");
    if (bits_[i] == 1) ones_.push_back(static_cast<int>(i));
  }
}

Pattern Pattern::parse(std::string_view text) {
  std::vector<int> bits;
  bits.reserve(text.size());
  for (char ch : text) {
    if (ch == '0') bits.push_back(0);
    else if (ch == '1') bits.push_back(1);
    else throw InvalidArgument("pattern string may only contain '0' and '1'");
  }
  return Pattern(std::move(bits));
}

std::string Pattern::str() const {
  std::string s;
  for (int b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

int Composition::total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

std::string Composition::str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t k = 0; k < counts.size(); ++k) os << (k ? "," : "") << counts[k];
  os << ")";
  return os.str();
}

bool PatternBox::contains(const State& x) const {
  if (x.size() != lo.size()) return false;
  return ((x.array() > lo.array()) && (x.array() < hi.array())).all();
}

long long roa_count(int n, int parts) {
  // binomial(n + parts - 1, parts - 1), exact for the sizes used here.
  long long r = 1;
  int k = parts - 1;
  for (int i = 1; i <= k; ++i) r = r * (n + i) / i;
  return r;
}

namespace {

void weak_compositions(int remaining, int parts, std::vector<int>& prefix, const ActiveSet& active,
                       std::vector<Composition>& out) {
  if (parts == 1) {
    prefix.push_back(remaining);
    out.push_back({prefix, active});
    prefix.pop_back();
    return;
  }
  for (int first = remaining; first >= 0; --first) {
    prefix.push_back(first);
    weak_compositions(remaining - first, parts - 1, prefix, active, out);
    prefix.pop_back();
  }
}

void require_active(const ActiveSet& active, const Geometry& g) {
  if (!is_valid_active_set(active, g)) {
    throw InvalidArgument("active electrode set must be sorted and include both endpoints");
  }
}

}  // namespace

std::vector<Composition> enumerate_roas(int n, const ActiveSet& active, const Geometry& g) {
  require_active(active, g);
  if (n < 0) throw InvalidArgument("negative particle count");
  std::vector<Composition> out;
  std::vector<int> prefix;
  weak_compositions(n, static_cast<int>(active.size()) - 1, prefix, active, out);
  return out;
}

Composition roa_of_pattern(const Pattern& p, const Geometry& g, const ActiveSet& active) {
  require_active(active, g);
  if (p.cells() != g.cells()) throw InvalidArgument("pattern length does not match the cell count");
  Composition nu{std::vector<int>(active.size() - 1, 0), active};
  for (int cell : p.ones()) {
    for (std::size_t k = 0; k + 1 < active.size(); ++k) {
      if (cell >= g.electrode_cell(active[k]) && cell < g.electrode_cell(active[k + 1])) {
        ++nu.counts[k];
        break;
      }
    }
  }
  return nu;
}

Composition roa_of_state(const State& x, const Geometry& g, const ActiveSet& active) {
  require_active(active, g);
  Composition nu{std::vector<int>(active.size() - 1, 0), active};
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (std::size_t k = 0; k + 1 < active.size(); ++k) {
      double lo = g.electrode(active[k]);
      double hi = g.electrode(active[k + 1]);
      if (x[i] == lo || x[i] == hi) throw InvalidArgument("particle sits on an active electrode");
      if (x[i] > lo && x[i] < hi) {
        ++nu.counts[k];
        break;
      }
    }
  }
  return nu;
}

bool contains(const Composition& nu, const State& x, const Geometry& g) {
  const auto& active = nu.active;
  require_active(active, g);
  if (nu.counts.size() + 1 != active.size()) throw InvalidArgument("composition length does not match active set");
  if (x.size() != nu.total()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (int a : active) {
      if (x[i] == g.electrode(a)) return false;
    }
  }
  Eigen::Index idx = 0;
  for (std::size_t k = 0; k < nu.counts.size(); ++k) {
    double lo = g.electrode(active[k]);
    double hi = g.electrode(active[k + 1]);
    double prev = lo;
    for (int j = 0; j < nu.counts[k]; ++j, ++idx) {
      if (!(x[idx] > prev) || !(x[idx] < hi)) return false;
      prev = x[idx];
    }
  }
  return true;
}

PatternBox pattern_box(const Pattern& p, const Geometry& g) {
  if (p.cells() != g.cells()) throw InvalidArgument("pattern length does not match the cell count");
  PatternBox box{Eigen::VectorXd(p.count()), Eigen::VectorXd(p.count())};
  for (int k = 0; k < p.count(); ++k) {
    box.lo[k] = g.cell_lo(p.ones()[static_cast<std::size_t>(k)]);
    box.hi[k] = g.cell_hi(p.ones()[static_cast<std::size_t>(k)]);
  }
  return box;
}

State pattern_midpoints(const Pattern& p, const Geometry& g) { return pattern_box(p, g).center(); }

bool refines(const Composition& coarse, const Composition& fine) {
  // every coarse electrode must also bound an interval of `fine`
  for (int a : coarse.active) {
    if (std::find(fine.active.begin(), fine.active.end(), a) == fine.active.end()) return false;
  }
  if (coarse.total() != fine.total()) return false;
  std::size_t f = 0;
  for (std::size_t k = 0; k < coarse.counts.size(); ++k) {
    int hi = coarse.active[k + 1];
    int sum = 0;
    while (f < fine.counts.size() && fine.active[f + 1] <= hi) {
      sum += fine.counts[f];
      ++f;
    }
    if (sum != coarse.counts[k]) return false;
  }
  return f == fine.counts.size();
}

State interior_point(const Composition& nu, const Geometry& g) {
  State x(nu.total());
  Eigen::Index idx = 0;
  for (std::size_t k = 0; k < nu.counts.size(); ++k) {
    double lo = g.electrode(nu.active[k]);
    double hi = g.electrode(nu.active[k + 1]);
    int m = nu.counts[k];
    for (int j = 1; j <= m; ++j) x[idx++] = lo + (hi - lo) * j / (m + 1);
  }
  return x;
}

}  // namespace dsa
