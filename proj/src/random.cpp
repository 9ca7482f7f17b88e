#include "gelwarp/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "gelwarp/core.hpp"

namespace gelwarp {

namespace {

// Standard normal restricted to [a, b] with a >= 0 (Robert, 1995).
double right_tail_normal(Rng& rng, double a, double b) {
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  // Uniform proposals win when the interval is short relative to the tail scale.
  const double uniform_limit = a + 2.0 * std::sqrt(std::numbers::e) / (a + std::sqrt(a * a + 4.0)) *
                                       std::exp((a * a - a * std::sqrt(a * a + 4.0)) / 4.0);
  if (b <= uniform_limit) {
    for (;;) {
      const double z = a + (b - a) * rng.uniform();
      if (rng.uniform() <= std::exp((a * a - z * z) / 2.0)) return z;
    }
  }
  for (;;) {
    const double z = a - std::log(1.0 - rng.uniform()) / alpha;
    if (z > b) continue;
    if (rng.uniform() <= std::exp(-(z - alpha) * (z - alpha) / 2.0)) return z;
  }
}

double standard_truncated(Rng& rng, double a, double b) {
  if (a >= 0.0) return right_tail_normal(rng, a, b);
  if (b <= 0.0) return -right_tail_normal(rng, -b, -a);
  if (b - a < std::sqrt(2.0 * std::numbers::pi)) {
    for (;;) {
      const double z = a + (b - a) * rng.uniform();
      if (rng.uniform() <= std::exp(-z * z / 2.0)) return z;
    }
  }
  for (;;) {
    const double z = rng.normal();
    if (z >= a && z <= b) return z;
  }
}

}  // namespace

double Rng::truncated_normal(double mean, double sd, double lo, double hi) {
  if (!(hi > lo)) throw Error("truncated normal needs lo < hi");
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  double x = mean + sd * standard_truncated(*this, std::max(a, -1e300), std::min(b, 1e300));
  // Keep the draw strictly inside the open interval.
  if (!(x > lo)) x = std::nextafter(lo, hi);
  if (!(x < hi)) x = std::nextafter(hi, lo);
  if (!(x > lo)) x = 0.5 * (lo + hi);
  return x;
}

std::size_t Rng::categorical_log(std::span<const double> log_weights) {
  double top = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) top = std::max(top, w);
  if (!std::isfinite(top)) throw Error("categorical draw with no admissible outcome");
  std::vector<double> cumulative(log_weights.size());
  double total = 0.0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    total += std::isfinite(log_weights[k]) ? std::exp(log_weights[k] - top) : 0.0;
    cumulative[k] = total;
  }
  const double u = uniform() * total;
  for (std::size_t k = 0; k < cumulative.size(); ++k)
    if (u < cumulative[k] && std::isfinite(log_weights[k])) return k;
  for (std::size_t k = log_weights.size(); k-- > 0;)
    if (std::isfinite(log_weights[k])) return k;
  return 0;
}

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace gelwarp
