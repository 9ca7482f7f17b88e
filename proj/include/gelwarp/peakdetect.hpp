#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gelwarp/core.hpp"

namespace gelwarp {

struct PeakConfig {
  int h = 10;        ///< neighbour offset in bins
  double c0 = 0.05;  ///< minimum peak elevation on the standardized scale

  void validate(std::size_t bins) const;
};

struct Peak {
  std::string gel_id;
  int lane = 0;
  int j = 0;             ///< 1-based order within the lane
  std::size_t bin = 0;   ///< 1-based bin index
  double location = 0;   ///< bin / B
  double intensity = 0;  ///< apex intensity
};

/// Detected peaks, grouped by gel then lane, ordered by location within a lane.
struct PeakTable {
  std::vector<Peak> entries;

  /// Peaks of one lane in location order.
  std::vector<Peak> lane_peaks(const std::string& gel_id, int lane) const;
  std::size_t count(const std::string& gel_id, int lane) const;
  /// Distinct (gel, lane) pairs in table order.
  std::vector<std::pair<std::string, int>> lanes() const;
  /// Checks the per-lane ordering and that j runs 1..J_gi.
  void validate() const;
};

/// Local difference score in {-3, ..., 3} of 1-based bin `b`.
int local_score(std::span<const double> intensity, std::size_t b, const PeakConfig& cfg);

/// Peaks of one lane: one per maximal run of score-3 bins, at the run's
/// intensity argmax (leftmost on ties). Returns 1-based bins.
std::vector<std::size_t> detect_lane_peaks(std::span<const double> intensity, const PeakConfig& cfg);

/// Detects peaks in every lane. Lanes are processed on up to `threads`
/// workers; the output does not depend on the thread count.
PeakTable detect_peaks(const IntensityGrid& grid, const PeakConfig& cfg, unsigned threads = 1);

/// Drops peaks whose location falls inside any [lo, hi] interval of its gel.
struct MaskedInterval {
  std::string gel_id;
  double lo = 0;
  double hi = 0;
};
PeakTable apply_masks(const PeakTable& peaks, std::span<const MaskedInterval> masks);

/// Keeps only peaks on lanes for which `keep(gel_id, lane)` is true.
template <class Pred>
PeakTable filter_lanes(const PeakTable& peaks, Pred keep) {
  PeakTable out;
  for (const auto& p : peaks.entries)
    if (keep(p.gel_id, p.lane)) out.entries.push_back(p);
  return out;
}

}  // namespace gelwarp
