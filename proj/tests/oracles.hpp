#pragma once

// Independent reference implementations used by the tests. They follow the
// textbook definitions directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <vector>

namespace oracle {

inline int sign(double x) { return (x > 0) - (x < 0); }

/// Local difference score of 1-based bin b, by direct evaluation.
inline int local_score(const std::vector<double>& m, std::size_t b, int h, double c0) {
  const long B = static_cast<long>(m.size());
  const long bb = static_cast<long>(b);
  const long l = std::max(bb - h, 1L);
  const long r = std::min(bb + h, B);
  double lo = m[static_cast<std::size_t>(l - 1)];
  for (long k = l; k <= r; ++k) lo = std::min(lo, m[static_cast<std::size_t>(k - 1)]);
  const double mb = m[b - 1];
  return sign(mb - m[static_cast<std::size_t>(l - 1)]) + sign(mb - m[static_cast<std::size_t>(r - 1)]) +
         sign(mb - lo - c0);
}

/// Adjusted Rand index from pair counts over all N(N-1)/2 pairs.
inline double adjusted_rand(const std::vector<int>& x, const std::vector<int>& y) {
  double a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t k = i + 1; k < x.size(); ++k) {
      const bool sx = x[i] == x[k];
      const bool sy = y[i] == y[k];
      if (sx && sy) a += 1;
      else if (sx) b += 1;
      else if (sy) c += 1;
      else d += 1;
    }
  const double den = (a + b) * (b + d) + (a + c) * (c + d);
  if (den == 0.0) return 1.0;
  return 2.0 * (a * d - b * c) / den;
}

/// Mean silhouette by direct summation; singletons score 0.
inline double silhouette(const std::vector<std::vector<double>>& d, const std::vector<int>& p) {
  const std::size_t n = p.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, std::pair<double, int>> sums;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      sums[p[k]].first += d[i][k];
      sums[p[k]].second += 1;
    }
    if (!sums.count(p[i])) continue;
    const double a = sums[p[i]].first / sums[p[i]].second;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, s] : sums)
      if (label != p[i]) b = std::min(b, s.first / s.second);
    if (!std::isfinite(b)) continue;
    const double m = std::max(a, b);
    if (m > 0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

/// Complete linkage recomputing cluster distances from the leaves at every
/// step. Returns merge heights and the leaf sets created, in order.
struct NaiveTree {
  std::vector<double> heights;
  std::vector<std::vector<int>> sets;
};

inline NaiveTree complete_linkage(const std::vector<std::vector<double>>& d) {
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < static_cast<int>(d.size()); ++i) clusters.push_back({i});
  NaiveTree out;
  while (clusters.size() > 1) {
    // Order clusters by smallest leaf so ties resolve lexicographically.
    std::sort(clusters.begin(), clusters.end());
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < clusters.size(); ++a)
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double link = 0.0;
        for (int i : clusters[a])
          for (int k : clusters[b]) link = std::max(link, d[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
        if (link < best) {
          best = link;
          ba = a;
          bb = b;
        }
      }
    std::vector<int> merged = clusters[ba];
    merged.insert(merged.end(), clusters[bb].begin(), clusters[bb].end());
    std::sort(merged.begin(), merged.end());
    out.heights.push_back(best);
    out.sets.push_back(merged);
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
    clusters[ba] = merged;
  }
  return out;
}

/// Posterior over increasing assignments of one lane's peaks to landmarks
/// 1..L, each weighted by prod_j phi(t_j; s[z_j], sd) * w[z_j], restricted to
/// |t_j - nu[z_j]| < window. Keys are assignment vectors.
inline std::map<std::vector<int>, double> enumerate_lane(const std::vector<double>& t, const std::vector<double>& s,
                                                          const std::vector<double>& nu, const std::vector<double>& w,
                                                          double sd, double window) {
  const int L = static_cast<int>(w.size());
  std::map<std::vector<int>, double> out;
  std::vector<int> z(t.size(), 0);
  double total = 0.0;
  auto rec = [&](auto&& self, std::size_t j, int lo) -> void {
    if (j == t.size()) {
      double p = 1.0;
      for (std::size_t k = 0; k < t.size(); ++k) {
        const double r = (t[k] - s[static_cast<std::size_t>(z[k])]) / sd;
        p *= std::exp(-0.5 * r * r) * w[static_cast<std::size_t>(z[k] - 1)];
      }
      out[z] += p;
      total += p;
      return;
    }
    for (int l = lo; l <= L; ++l) {
      if (!(std::abs(t[j] - nu[static_cast<std::size_t>(l)]) < window)) continue;
      z[j] = l;
      self(self, j + 1, l + 1);
    }
  };
  rec(rec, 0, 1);
  for (auto& [key, p] : out) p /= total;
  return out;
}

}  // namespace oracle
