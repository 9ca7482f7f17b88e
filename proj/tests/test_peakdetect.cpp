#include "doctest.h"

#include "gelwarp/peakdetect.hpp"
#include "gelwarp/random.hpp"
#include "oracles.hpp"

using namespace gelwarp;

TEST_CASE("local score worked examples") {
  std::vector<double> flat(20, 0.4);
  PeakConfig cfg{10, 0.05};
  for (std::size_t b = 1; b <= flat.size(); ++b) CHECK(local_score(flat, b, cfg) == -1);
  std::vector<double> tri{0, 1, 2, 3, 2, 1, 0};
  CHECK(local_score(tri, 4, {2, 1.0}) == 3);
  CHECK(local_score(tri, 2, {2, 1.0}) == 0);
}

TEST_CASE("local score matches the oracle and ignores offsets") {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> m(120);
    for (double& v : m) v = rng.uniform();
    const int h = 1 + static_cast<int>(rng.index(20));
    const double c0 = 0.2 * rng.uniform();
    const double shift = 5.0 * rng.normal();
    auto shifted = m;
    for (double& v : shifted) v += shift;
    for (std::size_t b = 1; b <= m.size(); ++b) {
      CHECK(local_score(m, b, {h, c0}) == oracle::local_score(m, b, h, c0));
      CHECK(local_score(m, b, {h, c0}) == local_score(shifted, b, {h, c0}));
      auto scaled = m;
      for (double& v : scaled) v *= 3.0;
      CHECK(local_score(m, b, {h, 0.0}) == local_score(scaled, b, {h, 0.0}));
    }
  }
}

TEST_CASE("peaks at run argmax") {
  std::vector<double> tri{0, 1, 2, 3, 2, 1, 0};
  CHECK(detect_lane_peaks(tri, {2, 1.0}) == std::vector<std::size_t>{4});
  std::vector<double> two(60, 0.0);
  for (int k = -4; k <= 4; ++k) {
    two[static_cast<std::size_t>(15 + k)] = 1.0 - std::abs(k) * 0.2;
    two[static_cast<std::size_t>(45 + k)] = 0.8 - std::abs(k) * 0.15;
  }
  CHECK(detect_lane_peaks(two, {5, 0.05}) == std::vector<std::size_t>{16, 46});
  std::vector<double> flat(40, 0.3);
  CHECK(detect_lane_peaks(flat, {5, 0.05}).empty());
  // Plateau apex: leftmost bin of the tie wins.
  std::vector<double> plateau{0, 0, 0, 1, 2, 2, 1, 0, 0, 0};
  CHECK(detect_lane_peaks(plateau, {3, 0.5}) == std::vector<std::size_t>{5});
}

TEST_CASE("detection is independent of thread count") {
  Rng rng(4);
  IntensityGrid grid;
  grid.bins = 300;
  for (int g = 0; g < 2; ++g) {
    GelTrace gel{"G" + std::to_string(g + 1), {}};
    for (int l = 1; l <= 8; ++l) {
      Lane lane{l, std::vector<double>(300), l == 1};
      for (double& v : lane.intensity) v = rng.uniform();
      gel.lanes.push_back(lane);
    }
    grid.gels.push_back(gel);
  }
  const auto a = detect_peaks(grid, {6, 0.1}, 1);
  const auto b = detect_peaks(grid, {6, 0.1}, 4);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].bin == b.entries[i].bin);
    CHECK(a.entries[i].gel_id == b.entries[i].gel_id);
  }
  CHECK_NOTHROW(a.validate());
  // Distinct peaks of a lane are separated by non-candidate bins.
  for (std::size_t i = 1; i < a.entries.size(); ++i)
    if (a.entries[i].lane == a.entries[i - 1].lane && a.entries[i].gel_id == a.entries[i - 1].gel_id)
      CHECK(a.entries[i].bin > a.entries[i - 1].bin + 1);
}

TEST_CASE("config validation and masks") {
  CHECK_THROWS_AS(PeakConfig({0, 0.05}).validate(100), Error);
  CHECK_THROWS_AS(PeakConfig({50, 0.05}).validate(100), Error);
  CHECK_NOTHROW(PeakConfig({49, 0.05}).validate(100));
  CHECK_THROWS_AS(PeakConfig({5, -1.0}).validate(100), Error);

  PeakTable t;
  t.entries = {{"G1", 2, 1, 10, 0.1, 1.0}, {"G1", 2, 2, 50, 0.5, 1.0}, {"G1", 2, 3, 80, 0.8, 1.0}};
  std::vector<MaskedInterval> masks{{"G1", 0.4, 0.6}};
  auto kept = apply_masks(t, masks);
  REQUIRE(kept.entries.size() == 2);
  CHECK(kept.entries[1].location == 0.8);
  CHECK(kept.entries[1].j == 2);
  CHECK_NOTHROW(kept.validate());
}
