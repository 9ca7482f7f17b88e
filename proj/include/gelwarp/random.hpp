#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace gelwarp {

/// Seeded generator shared by every stochastic routine. All draws go through
/// these helpers so a seed fully determines a run.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Gamma(shape, rate).
  double gamma(double shape, double rate) { return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_); }
  /// Inverse-gamma(shape, rate), i.e. 1 / Gamma(shape, rate).
  double inverse_gamma(double shape, double rate) { return 1.0 / gamma(shape, rate); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::uint64_t bits() { return engine_(); }

  /// Normal(mean, sd) restricted to the open interval (lo, hi).
  double truncated_normal(double mean, double sd, double lo, double hi);

  /// Index drawn with probability proportional to exp(log_weights[k]).
  /// Entries equal to -infinity are never chosen.
  std::size_t categorical_log(std::span<const double> log_weights);

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

/// log of exp(a) + exp(b), handling -infinity.
double log_add(double a, double b);

}  // namespace gelwarp
