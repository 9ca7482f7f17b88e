#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gelwarp/core.hpp"
#include "gelwarp/peakdetect.hpp"

namespace gelwarp {

/// Continuous, strictly increasing, piecewise-linear bijection of [0, 1]
/// sending query_knots[k] to template_knots[k]. Both knot lists start at 0
/// and end at 1.
class PiecewiseLinearMap {
public:
  PiecewiseLinearMap() : query_{0.0, 1.0}, template_{0.0, 1.0} {}
  PiecewiseLinearMap(std::vector<double> query_knots, std::vector<double> template_knots);

  /// Builds a map from interior (query, template) pairs; the endpoints are added.
  static PiecewiseLinearMap from_pairs(std::span<const std::pair<double, double>> pairs);

  double operator()(double t) const;
  PiecewiseLinearMap inverse() const { return {template_, query_}; }

  const std::vector<double>& query_knots() const { return query_; }
  const std::vector<double>& template_knots() const { return template_; }

private:
  std::vector<double> query_;
  std::vector<double> template_;
};

/// Pairs the `expected_count` most intense reference peaks of the query and
/// template lanes by rank after sorting each set by location.
std::vector<std::pair<double, double>> match_references(std::span<const Peak> query_peaks,
                                                        std::span<const Peak> template_peaks,
                                                        std::size_t expected_count,
                                                        const std::string& query_gel = "query");

/// Resamples one lane so that content at query position q appears at map(q).
/// Intensities are linearly interpolated on the source grid b / B.
std::vector<double> warp_lane(std::span<const double> intensity, const PiecewiseLinearMap& map);

struct RefAlignResult {
  IntensityGrid grid;
  std::map<std::string, PiecewiseLinearMap> maps;
};

/// Aligns every gel's reference peaks onto those of `template_gel` and
/// resamples all of its lanes accordingly. The template gel is copied unchanged.
RefAlignResult reference_align(const IntensityGrid& grid, const PeakTable& peaks, const std::string& template_gel,
                               std::size_t expected_count = 7, unsigned threads = 1);

}  // namespace gelwarp
