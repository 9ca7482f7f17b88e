#include "gelwarp/peakdetect.hpp"

#include <algorithm>
#include <map>

#include "gelwarp/parallel.hpp"

namespace gelwarp {

namespace {

int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

void PeakConfig::validate(std::size_t bins) const {
  if (h < 1 || 2 * static_cast<std::size_t>(h) >= bins)
    throw Error("peak neighbour offset h=" + std::to_string(h) + " must satisfy 1 <= h < B/2 (B=" +
                std::to_string(bins) + ")");
  if (!(c0 >= 0.0)) throw Error("minimum peak elevation c0 must be nonnegative");
}

int local_score(std::span<const double> m, std::size_t b, const PeakConfig& cfg) {
  const std::size_t n = m.size();
  const std::size_t h = static_cast<std::size_t>(cfg.h);
  const std::size_t left = b > h ? b - h : 1;
  const std::size_t right = std::min(b + h, n);
  const double here = m[b - 1];
  double low = here;
  for (std::size_t k = left; k <= right; ++k) low = std::min(low, m[k - 1]);
  return sign(here - m[left - 1]) + sign(here - m[right - 1]) + sign(here - low - cfg.c0);
}

std::vector<std::size_t> detect_lane_peaks(std::span<const double> m, const PeakConfig& cfg) {
  std::vector<std::size_t> out;
  const std::size_t n = m.size();
  std::size_t b = 1;
  while (b <= n) {
    if (local_score(m, b, cfg) != 3) {
      ++b;
      continue;
    }
    std::size_t best = b;
    std::size_t k = b + 1;
    for (; k <= n && local_score(m, k, cfg) == 3; ++k)
      if (m[k - 1] > m[best - 1]) best = k;
    out.push_back(best);
    b = k;
  }
  return out;
}

PeakTable detect_peaks(const IntensityGrid& grid, const PeakConfig& cfg, unsigned threads) {
  cfg.validate(grid.bins);
  struct Job {
    const GelTrace* gel;
    const Lane* lane;
  };
  std::vector<Job> jobs;
  for (const auto& gel : grid.gels)
    for (const auto& lane : gel.lanes) jobs.push_back({&gel, &lane});

  std::vector<std::vector<std::size_t>> found(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) { found[i] = detect_lane_peaks(jobs[i].lane->intensity, cfg); });

  PeakTable table;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    int j = 0;
    for (std::size_t bin : found[i])
      table.entries.push_back({jobs[i].gel->gel_id, jobs[i].lane->index, ++j, bin, grid.location(bin),
                               jobs[i].lane->intensity[bin - 1]});
  }
  return table;
}

std::vector<Peak> PeakTable::lane_peaks(const std::string& gel_id, int lane) const {
  std::vector<Peak> out;
  for (const auto& p : entries)
    if (p.gel_id == gel_id && p.lane == lane) out.push_back(p);
  std::sort(out.begin(), out.end(), [](const Peak& a, const Peak& b) { return a.location < b.location; });
  return out;
}

std::size_t PeakTable::count(const std::string& gel_id, int lane) const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [&](const Peak& p) {
    return p.gel_id == gel_id && p.lane == lane;
  }));
}

std::vector<std::pair<std::string, int>> PeakTable::lanes() const {
  std::vector<std::pair<std::string, int>> out;
  for (const auto& p : entries) {
    std::pair<std::string, int> key{p.gel_id, p.lane};
    if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(key);
  }
  return out;
}

void PeakTable::validate() const {
  std::map<std::pair<std::string, int>, const Peak*> last;
  for (const auto& p : entries) {
    const std::string where = "gel " + p.gel_id + " lane " + std::to_string(p.lane);
    if (p.lane < 1) throw Error(where + ": lane index must be positive");
    if (!(p.location > 0.0 && p.location <= 1.0)) throw Error(where + ": peak location outside (0, 1]");
    auto key = std::make_pair(p.gel_id, p.lane);
    auto it = last.find(key);
    const int expected_j = it == last.end() ? 1 : it->second->j + 1;
    if (p.j != expected_j) throw Error(where + ": peak index j=" + std::to_string(p.j) + " out of sequence");
    if (it != last.end() && !(p.location > it->second->location))
      throw Error(where + ": peak locations are not strictly increasing");
    last[key] = &p;
  }
}

PeakTable apply_masks(const PeakTable& peaks, std::span<const MaskedInterval> masks) {
  PeakTable out;
  std::map<std::pair<std::string, int>, int> next_j;
  for (const auto& p : peaks.entries) {
    const bool masked = std::any_of(masks.begin(), masks.end(), [&](const MaskedInterval& m) {
      return m.gel_id == p.gel_id && p.location >= m.lo && p.location <= m.hi;
    });
    if (masked) continue;
    Peak q = p;
    q.j = ++next_j[{p.gel_id, p.lane}];
    out.entries.push_back(q);
  }
  return out;
}

}  // namespace gelwarp
