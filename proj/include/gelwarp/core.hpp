#pragma once

/// \file
/// Domain types shared by every stage of the pipeline: landmark grids,
/// per-lane intensity traces and the affine standardizers used before
/// model fitting.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gelwarp {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Equi-spaced landmarks nu_l = l / (L + 1), l = 0 .. L + 1, on [0, 1].
/// Peaks are only ever assigned to the interior landmarks 1 .. L.
class LandmarkGrid {
public:
  explicit LandmarkGrid(int interior_count);

  int interior_count() const { return count_; }
  double spacing() const { return 1.0 / (count_ + 1); }
  /// Position of landmark l, l in [0, L + 1].
  double position(int l) const;
  /// All L + 2 knots including the two endpoints.
  const std::vector<double>& positions() const { return nu_; }

private:
  int count_;
  std::vector<double> nu_;
};

struct Lane {
  int index = 0;  ///< lane number u, 1-based and contiguous within a gel
  std::vector<double> intensity;
  bool is_reference = false;
};

struct GelTrace {
  std::string gel_id;
  std::vector<Lane> lanes;

  const Lane* reference_lane() const;
  const Lane* find_lane(int index) const;
};

/// A batch of gels sharing one bin grid t_b = b / B, b = 1 .. B.
struct IntensityGrid {
  std::vector<GelTrace> gels;
  std::size_t bins = 0;

  double location(std::size_t bin) const { return static_cast<double>(bin) / static_cast<double>(bins); }
  const GelTrace* find_gel(const std::string& id) const;
  std::size_t lane_count() const;

  /// Throws if lanes disagree on length, indices are not 1..N_g, or a gel
  /// carries more than one reference lane.
  void validate() const;
};

enum class StandardizeMethod { minmax, quantile };

StandardizeMethod parse_standardize_method(const std::string& name);

struct StandardizeResult {
  IntensityGrid grid;
  std::vector<std::string> warnings;
};

/// Maps every lane onto [0, 1] independently of the others.
/// Constant lanes become all zeros and are reported in `warnings`.
StandardizeResult standardize_intensities(const IntensityGrid& raw, StandardizeMethod method);

/// Standardizes one lane; returns false if the lane was degenerate.
bool standardize_lane(std::span<double> values, StandardizeMethod method);

/// Affine transform x -> (x - center) / scale.
class Standardizer {
public:
  Standardizer() = default;
  Standardizer(double center, double scale);

  /// Fits center = mean and scale = sample standard deviation.
  static Standardizer fit(std::span<const double> values);
  /// Like fit() but falls back to unit scale for degenerate input.
  static Standardizer fit_or_center(std::span<const double> values);

  double center() const { return center_; }
  double scale() const { return scale_; }

  double apply(double x) const { return (x - center_) / scale_; }
  double invert(double z) const { return z * scale_ + center_; }
  std::vector<double> apply(std::span<const double> xs) const;
  std::vector<double> invert(std::span<const double> zs) const;

private:
  double center_ = 0.0;
  double scale_ = 1.0;
};

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending and nonempty.
double quantile_sorted(std::span<const double> sorted, double p);

}  // namespace gelwarp
