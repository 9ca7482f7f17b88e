#include "gelwarp/exactalign.hpp"

#include <map>

#include "gelwarp/parallel.hpp"

namespace gelwarp {

std::vector<int> make_strictly_increasing(std::span<const int> z, int landmarks) {
  std::vector<int> out(z.begin(), z.end());
  for (std::size_t j = 1; j < out.size(); ++j)
    if (out[j] <= out[j - 1]) out[j] = out[j - 1] + 1;
  if (!out.empty() && out.back() > landmarks)
    throw Error("cannot make assignments strictly increasing: more peaks than free landmarks");
  return out;
}

PiecewiseLinearMap exact_lane_map(std::span<const double> locations, std::span<const int> z, const LandmarkGrid& grid) {
  if (locations.size() != z.size()) throw Error("exact alignment needs one landmark per peak");
  std::vector<double> q{0.0};
  std::vector<double> t{0.0};
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j] < 1 || z[j] > grid.interior_count()) throw Error("landmark index out of range in exact alignment");
    q.push_back(locations[j]);
    t.push_back(grid.position(z[j]));
  }
  q.push_back(1.0);
  t.push_back(1.0);
  for (std::size_t k = 1; k < t.size(); ++k)
    if (!(t[k] > t[k - 1])) throw Error("internal invariant violated: template knots are not increasing");
  return {std::move(q), std::move(t)};
}

ExactAlignResult exact_align(const IntensityGrid& aligned, const PeakTable& peaks, std::span<const int> z,
                             const LandmarkGrid& grid, unsigned threads) {
  if (z.size() != peaks.entries.size()) throw Error("exact alignment needs one assignment per peak");
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> by_lane;
  for (std::size_t k = 0; k < peaks.entries.size(); ++k)
    by_lane[{peaks.entries[k].gel_id, peaks.entries[k].lane}].push_back(k);

  struct Job {
    std::size_t gel;
    const Lane* lane;
  };
  ExactAlignResult result;
  result.grid.bins = aligned.bins;
  std::vector<Job> jobs;
  for (std::size_t g = 0; g < aligned.gels.size(); ++g) {
    result.grid.gels.push_back({aligned.gels[g].gel_id, {}});
    for (const auto& lane : aligned.gels[g].lanes)
      jobs.push_back({g, &lane});
  }
  std::vector<Lane> out(jobs.size());
  std::vector<std::string> notes(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const auto& gel_id = aligned.gels[jobs[i].gel].gel_id;
    const Lane& lane = *jobs[i].lane;
    out[i] = lane;
    auto it = by_lane.find({gel_id, lane.index});
    if (it == by_lane.end()) return;
    std::vector<double> t;
    std::vector<int> zl;
    for (std::size_t k : it->second) {
      t.push_back(peaks.entries[k].location);
      zl.push_back(z[k]);
    }
    auto strict = make_strictly_increasing(zl, grid.interior_count());
    if (strict != zl) notes[i] = "gel " + gel_id + " lane " + std::to_string(lane.index) + ": repeated landmarks reassigned";
    out[i].intensity = warp_lane(lane.intensity, exact_lane_map(t, strict, grid));
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    result.grid.gels[jobs[i].gel].lanes.push_back(std::move(out[i]));
    if (!notes[i].empty()) result.warnings.push_back(notes[i]);
  }
  return result;
}

}  // namespace gelwarp
