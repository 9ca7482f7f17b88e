#include "gelwarp/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace gelwarp {

LandmarkGrid::LandmarkGrid(int interior_count) : count_(interior_count) {
  if (interior_count < 1) throw Error("landmark grid needs at least one interior landmark");
  nu_.resize(static_cast<std::size_t>(count_) + 2);
  for (int l = 0; l <= count_ + 1; ++l) nu_[static_cast<std::size_t>(l)] = static_cast<double>(l) / (count_ + 1);
  nu_.back() = 1.0;
}

double LandmarkGrid::position(int l) const {
  if (l < 0 || l > count_ + 1) throw Error("landmark index " + std::to_string(l) + " out of range");
  return nu_[static_cast<std::size_t>(l)];
}

const Lane* GelTrace::reference_lane() const {
  for (const auto& lane : lanes)
    if (lane.is_reference) return &lane;
  return nullptr;
}

const Lane* GelTrace::find_lane(int index) const {
  for (const auto& lane : lanes)
    if (lane.index == index) return &lane;
  return nullptr;
}

const GelTrace* IntensityGrid::find_gel(const std::string& id) const {
  for (const auto& gel : gels)
    if (gel.gel_id == id) return &gel;
  return nullptr;
}

std::size_t IntensityGrid::lane_count() const {
  std::size_t n = 0;
  for (const auto& gel : gels) n += gel.lanes.size();
  return n;
}

void IntensityGrid::validate() const {
  if (bins == 0) throw Error("intensity grid has no bins");
  std::set<std::string> ids;
  for (const auto& gel : gels) {
    if (!ids.insert(gel.gel_id).second) throw Error("duplicate gel id " + gel.gel_id);
    std::vector<int> indices;
    int references = 0;
    for (const auto& lane : gel.lanes) {
      if (lane.intensity.size() != bins)
        throw Error("gel " + gel.gel_id + " lane " + std::to_string(lane.index) + " has " +
                    std::to_string(lane.intensity.size()) + " bins, expected " + std::to_string(bins));
      for (std::size_t b = 0; b < bins; ++b)
        if (!std::isfinite(lane.intensity[b]))
          throw Error("gel " + gel.gel_id + " lane " + std::to_string(lane.index) + " bin " +
                      std::to_string(b + 1) + " is not finite");
      indices.push_back(lane.index);
      references += lane.is_reference ? 1 : 0;
    }
    std::sort(indices.begin(), indices.end());
    for (std::size_t i = 0; i < indices.size(); ++i)
      if (indices[i] != static_cast<int>(i) + 1)
        throw Error("gel " + gel.gel_id + " lane indices are not contiguous from 1");
    if (references > 1) throw Error("gel " + gel.gel_id + " has more than one reference lane");
  }
}

StandardizeMethod parse_standardize_method(const std::string& name) {
  if (name == "minmax") return StandardizeMethod::minmax;
  if (name == "quantile") return StandardizeMethod::quantile;
  throw Error("unknown standardization method '" + name + "'");
}

bool standardize_lane(std::span<double> values, StandardizeMethod method) {
  if (values.empty()) return true;
  for (double v : values)
    if (!std::isfinite(v)) throw Error("non-finite raw intensity");

  double low = 0.0;
  double high = 0.0;
  if (method == StandardizeMethod::minmax) {
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    low = *mn;
    high = *mx;
  } else {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    low = quantile_sorted(sorted, 0.10);
    high = quantile_sorted(sorted, 0.99);
  }
  if (!(high > low)) {
    std::fill(values.begin(), values.end(), 0.0);
    return false;
  }
  const double range = high - low;
  for (double& v : values) v = std::clamp((v - low) / range, 0.0, 1.0);
  return true;
}

StandardizeResult standardize_intensities(const IntensityGrid& raw, StandardizeMethod method) {
  StandardizeResult out{raw, {}};
  for (auto& gel : out.grid.gels)
    for (auto& lane : gel.lanes)
      if (!standardize_lane(lane.intensity, method))
        out.warnings.push_back("gel " + gel.gel_id + " lane " + std::to_string(lane.index) +
                               " has constant intensity; mapped to zeros");
  return out;
}

Standardizer::Standardizer(double center, double scale) : center_(center), scale_(scale) {
  if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(center))
    throw Error("standardizer scale must be positive and finite");
}

namespace {

std::pair<double, double> mean_sd(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

}  // namespace

Standardizer Standardizer::fit(std::span<const double> values) {
  if (values.size() < 2) throw Error("zero variance: need at least two values to standardize");
  auto [mean, sd] = mean_sd(values);
  if (!(sd > 0.0)) throw Error("zero variance: cannot standardize a constant sequence");
  return Standardizer(mean, sd);
}

Standardizer Standardizer::fit_or_center(std::span<const double> values) {
  if (values.empty()) return {};
  auto [mean, sd] = mean_sd(values);
  if (!(sd > 0.0)) return Standardizer(mean, 1.0);
  return Standardizer(mean, sd);
}

std::vector<double> Standardizer::apply(std::span<const double> xs) const {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return apply(x); });
  return out;
}

std::vector<double> Standardizer::invert(std::span<const double> zs) const {
  std::vector<double> out(zs.size());
  std::transform(zs.begin(), zs.end(), out.begin(), [this](double z) { return invert(z); });
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace gelwarp
