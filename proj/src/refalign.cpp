#include "gelwarp/refalign.hpp"

#include <algorithm>
#include <cmath>

#include "gelwarp/parallel.hpp"

namespace gelwarp {

namespace {

void require_increasing(const std::vector<double>& knots) {
  for (std::size_t k = 1; k < knots.size(); ++k)
    if (!(knots[k] > knots[k - 1])) throw Error("crossing knots: piecewise-linear knots must be strictly increasing");
}

}  // namespace

PiecewiseLinearMap::PiecewiseLinearMap(std::vector<double> query_knots, std::vector<double> template_knots)
    : query_(std::move(query_knots)), template_(std::move(template_knots)) {
  if (query_.size() != template_.size() || query_.size() < 2)
    throw Error("piecewise-linear map needs equally many query and template knots");
  if (query_.front() != 0.0 || query_.back() != 1.0 || template_.front() != 0.0 || template_.back() != 1.0)
    throw Error("piecewise-linear map must fix the endpoints 0 and 1");
  require_increasing(query_);
  require_increasing(template_);
}

PiecewiseLinearMap PiecewiseLinearMap::from_pairs(std::span<const std::pair<double, double>> pairs) {
  std::vector<double> q{0.0};
  std::vector<double> t{0.0};
  for (auto [a, b] : pairs) {
    q.push_back(a);
    t.push_back(b);
  }
  q.push_back(1.0);
  t.push_back(1.0);
  return {std::move(q), std::move(t)};
}

double PiecewiseLinearMap::operator()(double x) const {
  if (x <= 0.0 || x >= 1.0) return x;
  auto it = std::upper_bound(query_.begin(), query_.end(), x);
  const auto k = static_cast<std::size_t>(it - query_.begin());
  const double q0 = query_[k - 1];
  const double q1 = query_[k];
  if (x == q0) return template_[k - 1];
  const double w = (x - q0) / (q1 - q0);
  return template_[k - 1] + w * (template_[k] - template_[k - 1]);
}

std::vector<std::pair<double, double>> match_references(std::span<const Peak> query_peaks,
                                                        std::span<const Peak> template_peaks,
                                                        std::size_t expected_count, const std::string& query_gel) {
  auto strongest = [expected_count](std::span<const Peak> peaks, const std::string& gel) {
    if (peaks.size() < expected_count)
      throw Error("gel " + gel + ": reference lane has " + std::to_string(peaks.size()) + " peaks, expected " +
                  std::to_string(expected_count) + " (short by " + std::to_string(expected_count - peaks.size()) +
                  ")");
    std::vector<Peak> sorted(peaks.begin(), peaks.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const Peak& a, const Peak& b) { return a.intensity > b.intensity; });
    sorted.resize(expected_count);
    std::vector<double> locations;
    for (const auto& p : sorted) locations.push_back(p.location);
    std::sort(locations.begin(), locations.end());
    return locations;
  };
  const auto q = strongest(query_peaks, query_gel);
  const auto t = strongest(template_peaks, "template");
  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 0; k < expected_count; ++k) out.emplace_back(q[k], t[k]);
  return out;
}

std::vector<double> warp_lane(std::span<const double> intensity, const PiecewiseLinearMap& map) {
  const std::size_t bins = intensity.size();
  const auto back = map.inverse();
  std::vector<double> out(bins);
  const double n = static_cast<double>(bins);
  for (std::size_t b = 1; b <= bins; ++b) {
    // Source position in units of bins; source samples sit at 1..B.
    const double pos = back(static_cast<double>(b) / n) * n;
    if (pos <= 1.0) {
      out[b - 1] = intensity.front();
    } else if (pos >= n) {
      out[b - 1] = intensity.back();
    } else {
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const double w = pos - static_cast<double>(lo);
      out[b - 1] = (1.0 - w) * intensity[lo - 1] + w * intensity[lo];
    }
  }
  return out;
}

RefAlignResult reference_align(const IntensityGrid& grid, const PeakTable& peaks, const std::string& template_gel,
                               std::size_t expected_count, unsigned threads) {
  const GelTrace* tmpl = grid.find_gel(template_gel);
  if (!tmpl) throw Error("template gel " + template_gel + " not found");
  auto reference_peaks = [&](const GelTrace& gel) {
    const Lane* ref = gel.reference_lane();
    if (!ref) throw Error("gel " + gel.gel_id + " has no reference lane");
    return peaks.lane_peaks(gel.gel_id, ref->index);
  };
  const auto template_peaks = reference_peaks(*tmpl);

  RefAlignResult result;
  result.grid.bins = grid.bins;
  result.grid.gels.resize(grid.gels.size());
  std::vector<PiecewiseLinearMap> maps(grid.gels.size());
  parallel_for(grid.gels.size(), threads, [&](std::size_t g) {
    const GelTrace& gel = grid.gels[g];
    GelTrace& out = result.grid.gels[g];
    if (gel.gel_id == template_gel) {
      out = gel;
      return;
    }
    const auto query = reference_peaks(gel);
    const auto pairs = match_references(query, template_peaks, expected_count, gel.gel_id);
    maps[g] = PiecewiseLinearMap::from_pairs(pairs);
    out.gel_id = gel.gel_id;
    for (const auto& lane : gel.lanes) out.lanes.push_back({lane.index, warp_lane(lane.intensity, maps[g]), lane.is_reference});
  });
  for (std::size_t g = 0; g < grid.gels.size(); ++g) result.maps.emplace(grid.gels[g].gel_id, maps[g]);
  return result;
}

}  // namespace gelwarp
