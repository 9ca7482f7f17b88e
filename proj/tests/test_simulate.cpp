#include "doctest.h"

#include <cmath>
#include <set>

#include "gelwarp/peakdetect.hpp"
#include "gelwarp/simulate.hpp"

using namespace gelwarp;

TEST_CASE("simulation settings validation") {
  SimSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.landmarks = 0;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = SimSpec{};
  spec.warp_amplitude = 40.0;
  CHECK_THROWS_WITH_AS(simulate_gels(spec, 1), doctest::Contains("monoton"), Error);
}

TEST_CASE("replicate pairs give a twenty-pair partition") {
  SimSpec spec;
  spec.design = SimDesign::replicate_pairs;
  spec.lanes_per_gel = 20;
  auto sim = simulate_gels(spec, 4);
  auto p = sim.truth.partition();
  REQUIRE(p.size() == 40);
  CHECK(std::set<int>(p.begin(), p.end()).size() == 20);
  for (int c = 1; c <= 20; ++c) CHECK(std::count(p.begin(), p.end(), c) == 2);
  for (const auto& lane : sim.truth.lanes) {
    const auto* twin = [&]() -> const SimLane* {
      for (const auto& other : sim.truth.lanes)
        if (other.cluster == lane.cluster && other.gel_id != lane.gel_id) return &other;
      return nullptr;
    }();
    REQUIRE(twin);
    CHECK(twin->landmarks == lane.landmarks);
  }
}

TEST_CASE("every lane carries the actin landmark and respects the grid") {
  SimSpec spec;
  auto sim = simulate_gels(spec, 8);
  const int actin = actin_landmark(spec.landmarks);
  CHECK(std::abs(LandmarkGrid(spec.landmarks).position(actin) - 0.43) <= 0.5 / (spec.landmarks + 1));
  for (const auto& lane : sim.truth.lanes) {
    CHECK(std::find(lane.landmarks.begin(), lane.landmarks.end(), actin) != lane.landmarks.end());
    CHECK(std::is_sorted(lane.landmarks.begin(), lane.landmarks.end()));
    for (std::size_t j = 1; j < lane.observed.size(); ++j) CHECK(lane.observed[j] > lane.observed[j - 1]);
  }
  CHECK_NOTHROW(sim.grid.validate());
  for (const auto& gel : sim.grid.gels) CHECK(gel.reference_lane() != nullptr);
}

TEST_CASE("no warp and no noise puts bands on the landmarks") {
  SimSpec spec;
  spec.warp_amplitude = 0.0;
  spec.location_noise = 0.0;
  spec.intensity_noise = 0.0;
  spec.background_rate = 0.0;
  auto sim = simulate_gels(spec, 3);
  LandmarkGrid grid(spec.landmarks);
  for (const auto& lane : sim.truth.lanes) {
    for (std::size_t j = 0; j < lane.landmarks.size(); ++j)
      CHECK(lane.observed[j] == doctest::Approx(grid.position(lane.landmarks[j])).epsilon(1e-12));
    auto found = detect_peaks(sim.grid, PeakConfig{}).lane_peaks(lane.gel_id, lane.lane);
    REQUIRE(found.size() == lane.landmarks.size());
    for (std::size_t j = 0; j < found.size(); ++j)
      CHECK(std::abs(found[j].location - grid.position(lane.landmarks[j])) <= 1.0 / spec.bins + 1e-12);
  }
}

TEST_CASE("simulation is a function of the seed") {
  SimSpec spec;
  auto a = simulate_gels(spec, 11);
  auto b = simulate_gels(spec, 11);
  auto c = simulate_gels(spec, 12);
  CHECK(a.grid.gels[0].lanes[3].intensity == b.grid.gels[0].lanes[3].intensity);
  CHECK(a.grid.gels[0].lanes[3].intensity != c.grid.gels[0].lanes[3].intensity);
}

TEST_CASE("true warp is the identity on the first sample lane and at the ends") {
  SimSpec spec;
  auto sim = simulate_gels(spec, 5);
  for (double nu : {0.1, 0.5, 0.9}) CHECK(sim.truth.warp(0, 2, nu) == doctest::Approx(nu));
  CHECK(sim.truth.warp(1, spec.lanes_per_gel + 1, 0.0) == doctest::Approx(0.0));
  CHECK(sim.truth.warp(1, spec.lanes_per_gel + 1, 1.0) == doctest::Approx(1.0));
}
