#include "doctest.h"

#include <cmath>

#include "gelwarp/refalign.hpp"
#include "gelwarp/simulate.hpp"

using namespace gelwarp;

namespace {

Peak peak_at(double loc, double intensity) { return {"Q", 1, 0, 0, loc, intensity}; }

}  // namespace

TEST_CASE("piecewise-linear maps") {
  PiecewiseLinearMap id;
  CHECK(id(0.3) == 0.3);
  std::vector<std::pair<double, double>> pairs{{0.2, 0.3}, {0.6, 0.5}};
  auto map = PiecewiseLinearMap::from_pairs(pairs);
  CHECK(map(0.0) == 0.0);
  CHECK(map(1.0) == 1.0);
  CHECK(map(0.2) == doctest::Approx(0.3));
  CHECK(map(0.4) == doctest::Approx(0.4));
  CHECK(map.inverse()(map(0.77)) == doctest::Approx(0.77));
  for (double x = 0.01; x < 1.0; x += 0.01) CHECK(map(x) > map(x - 0.01));
  std::vector<std::pair<double, double>> crossing{{0.3, 0.5}, {0.4, 0.45}};
  CHECK_THROWS_WITH_AS(PiecewiseLinearMap::from_pairs(crossing), doctest::Contains("crossing"), Error);
}

TEST_CASE("reference matching by intensity then rank") {
  std::vector<Peak> q{peak_at(0.1, 1.0), peak_at(0.15, 0.05), peak_at(0.5, 0.9), peak_at(0.8, 0.7)};
  std::vector<Peak> t{peak_at(0.12, 1.0), peak_at(0.52, 0.9), peak_at(0.79, 0.8)};
  auto pairs = match_references(q, t, 3, "Q");
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0] == std::pair{0.1, 0.12});
  CHECK(pairs[1] == std::pair{0.5, 0.52});
  CHECK(pairs[2] == std::pair{0.8, 0.79});
  std::vector<Peak> few{peak_at(0.1, 1.0), peak_at(0.5, 1.0)};
  CHECK_THROWS_WITH_AS(match_references(few, t, 3, "G7"), doctest::Contains("gel G7"), Error);
  CHECK_THROWS_WITH_AS(match_references(few, t, 3, "G7"), doctest::Contains("short by 1"), Error);
}

TEST_CASE("identity warp leaves a lane unchanged and a shift moves the apex") {
  std::vector<double> lane(200, 0.0);
  for (std::size_t b = 0; b < lane.size(); ++b) lane[b] = std::exp(-0.5 * std::pow((b + 1.0 - 60.0) / 3.0, 2));
  auto same = warp_lane(lane, {});
  for (std::size_t b = 0; b < lane.size(); ++b) CHECK(same[b] == doctest::Approx(lane[b]).epsilon(1e-12));
  std::vector<std::pair<double, double>> pairs{{0.3, 0.35}};
  auto moved = warp_lane(lane, PiecewiseLinearMap::from_pairs(pairs));
  const auto apex = std::max_element(moved.begin(), moved.end()) - moved.begin() + 1;
  CHECK(std::abs(apex - 70) <= 1);
}

TEST_CASE("template gel is copied unchanged") {
  SimSpec spec;
  spec.lanes_per_gel = 3;
  spec.between_gel_shift = 1.0;
  auto sim = simulate_gels(spec, 2);
  PeakTable peaks;
  for (std::size_t g = 0; g < sim.truth.gels.size(); ++g) {
    const auto& refs = sim.truth.gels[g].references;
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const auto bin = static_cast<std::size_t>(std::lround(refs[k] * 1000));
      peaks.entries.push_back({sim.truth.gels[g].gel_id, 1, static_cast<int>(k) + 1, bin, bin / 1000.0, 1.0});
    }
  }
  auto result = reference_align(sim.grid, peaks, "G1", 7, 2);
  CHECK(result.grid.gels[0].lanes[1].intensity == sim.grid.gels[0].lanes[1].intensity);
  CHECK_THROWS_WITH_AS(reference_align(sim.grid, peaks, "G9", 7), doctest::Contains("G9"), Error);
}
