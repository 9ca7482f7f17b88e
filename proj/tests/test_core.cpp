#include "doctest.h"

#include <cmath>

#include "gelwarp/core.hpp"
#include "gelwarp/random.hpp"

using namespace gelwarp;

TEST_CASE("landmark grid is equally spaced with pinned ends") {
  LandmarkGrid grid(100);
  CHECK(grid.positions().size() == 102);
  CHECK(grid.position(0) == 0.0);
  CHECK(grid.position(101) == 1.0);
  for (int l = 1; l <= 101; ++l) CHECK(std::abs(grid.position(l) - grid.position(l - 1) - 1.0 / 101) < 1e-12);
  CHECK_THROWS_AS(grid.position(102), Error);
  CHECK_THROWS_AS(LandmarkGrid(0), Error);
}

TEST_CASE("minmax standardization") {
  IntensityGrid grid;
  grid.bins = 3;
  grid.gels.push_back({"G1", {{1, {2, 4, 6}, false}, {2, {5, 5, 5}, false}}});
  auto result = standardize_intensities(grid, StandardizeMethod::minmax);
  CHECK(result.grid.gels[0].lanes[0].intensity == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(result.grid.gels[0].lanes[1].intensity == std::vector<double>{0.0, 0.0, 0.0});
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].find("lane 2") != std::string::npos);
}

TEST_CASE("standardization preserves order and lands in [0, 1]") {
  Rng rng(3);
  for (auto method : {StandardizeMethod::minmax, StandardizeMethod::quantile}) {
    std::vector<double> v(200);
    for (double& x : v) x = 10.0 * rng.normal();
    auto s = v;
    standardize_lane(s, method);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(s[i] >= 0.0);
      CHECK(s[i] <= 1.0);
      for (std::size_t k = 0; k < v.size(); ++k)
        if (v[i] < v[k]) CHECK(s[i] <= s[k]);
    }
  }
  CHECK(parse_standardize_method("quantile") == StandardizeMethod::quantile);
  CHECK_THROWS_AS(parse_standardize_method("zscore"), Error);
}

TEST_CASE("standardizer round trip and degenerate input") {
  Rng rng(5);
  std::vector<double> v(50);
  for (double& x : v) x = 3.0 + 2.0 * rng.normal();
  auto s = Standardizer::fit(v);
  for (double x : v) CHECK(std::abs(s.invert(s.apply(x)) - x) < 1e-12);
  auto z = s.apply(std::span<const double>(v));
  double mean = 0.0;
  for (double x : z) mean += x / z.size();
  CHECK(std::abs(mean) < 1e-12);
  std::vector<double> flat(5, 1.0);
  CHECK_THROWS_WITH_AS(Standardizer::fit(flat), doctest::Contains("zero variance"), Error);
  CHECK(Standardizer::fit_or_center(flat).scale() == 1.0);
}

TEST_CASE("grid validation names the offending lane") {
  IntensityGrid grid;
  grid.bins = 3;
  grid.gels.push_back({"G1", {{1, {1, 2, 3}, true}, {2, {1, 2}, false}}});
  CHECK_THROWS_WITH_AS(grid.validate(), doctest::Contains("gel G1 lane 2"), Error);
  grid.gels[0].lanes[1].intensity.push_back(1.0);
  CHECK_NOTHROW(grid.validate());
  grid.gels[0].lanes[1].index = 3;
  CHECK_THROWS_WITH_AS(grid.validate(), doctest::Contains("contiguous"), Error);
  grid.gels[0].lanes[1].index = 2;
  grid.gels[0].lanes[1].is_reference = true;
  CHECK_THROWS_WITH_AS(grid.validate(), doctest::Contains("more than one reference"), Error);
}

TEST_CASE("type-7 quantiles") {
  std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
}
