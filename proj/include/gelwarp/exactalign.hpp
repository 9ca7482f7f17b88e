#pragma once

/// \file
/// Exact peak alignment: each lane is stretched piecewise-linearly so that
/// its j-th detected peak lands on the landmark it was assigned to.

#include <span>
#include <string>
#include <vector>

#include "gelwarp/core.hpp"
#include "gelwarp/peakdetect.hpp"
#include "gelwarp/refalign.hpp"

namespace gelwarp {

/// Makes a lane's assignments strictly increasing: a landmark that repeats
/// or falls back is replaced by the next free landmark. Throws if that would
/// run past L.
std::vector<int> make_strictly_increasing(std::span<const int> z, int landmarks);

/// Map sending {0, T_1, ..., T_J, 1} to {0, nu_{Z_1}, ..., nu_{Z_J}, 1}.
PiecewiseLinearMap exact_lane_map(std::span<const double> locations, std::span<const int> z, const LandmarkGrid& grid);

struct ExactAlignResult {
  IntensityGrid grid;
  std::vector<std::string> warnings;
};

/// Aligns every sample lane of `aligned` using one assignment per entry of
/// `peaks` (same order). Lanes without peaks, including reference lanes,
/// are copied unchanged.
ExactAlignResult exact_align(const IntensityGrid& aligned, const PeakTable& peaks, std::span<const int> z,
                             const LandmarkGrid& grid, unsigned threads = 1);

}  // namespace gelwarp
