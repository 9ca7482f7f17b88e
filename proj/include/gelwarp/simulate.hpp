#pragma once

/// \file
/// Synthetic gels with known ground truth.
///
/// Every sample lane carries a signature: a set of landmarks drawn mostly
/// from shared hotspots, always including an actin landmark near 0.43. Band l of lane u on gel g sits at
/// W_g(S_g(nu_l, u) + eps) where S_g is a smooth within-gel warp, eps is
/// location noise and W_g a piecewise-linear between-gel warp that also moves
/// the reference lane. Lane 1 of every gel is the reference lane; sample
/// lanes are 2 .. N_g + 1.

#include <cstdint>
#include <string>
#include <vector>

#include "gelwarp/core.hpp"
#include "gelwarp/random.hpp"
#include "gelwarp/refalign.hpp"

namespace gelwarp {

enum class SimDesign {
  replicate_pairs,  ///< two gels; lane k of both gels shares a signature
  clusters,         ///< lanes drawn from a few signature templates
  independent,      ///< every lane has its own signature
};

SimDesign parse_sim_design(const std::string& name);
std::string to_string(SimDesign design);

struct SimSpec {
  SimDesign design = SimDesign::independent;
  int gels = 2;
  int lanes_per_gel = 10;  ///< sample lanes per gel, reference lane excluded
  std::size_t bins = 1000;
  int landmarks = 50;
  int clusters = 2;                  ///< `clusters` design only
  double hotspot_density = 0.5;      ///< chance a landmark is a shared hotspot (decreasing with index)
  double hotspot_rate = 0.7;         ///< chance a lane shows a given hotspot
  double background_rate = 0.01;     ///< chance of an extra band at any landmark
  double warp_amplitude = 1.5;       ///< within-gel warp, in landmark spacings
  double location_noise = 0.2;       ///< sd of eps, in landmark spacings
  double between_gel_shift = 0.0;    ///< max reference displacement, in landmark spacings
  double band_width = 3.0;           ///< Gaussian band sd, in bins
  double intensity_noise = 0.005;    ///< additive noise sd relative to the strongest band
  double exposure_min = 0.5;         ///< lane exposure multipliers are uniform in
  double exposure_max = 1.5;         ///< [exposure_min, exposure_max]
  bool shuffle_second_gel = true;    ///< `replicate_pairs`: permute lanes of gel 2
  double template_jitter = 0.0;      ///< `clusters`: probability of flipping a template band
  bool pure_noise = false;           ///< lanes are noise only (no bands)

  void validate() const;
};

/// Molecular weights (kDa) of the reference ladder.
const std::vector<double>& reference_weights();
/// Template positions of the reference ladder on [0, 1].
std::vector<double> reference_positions();

/// Position of the actin landmark (the landmark nearest 0.43).
int actin_landmark(int landmarks);

/// Within-gel warp amplitude profile s_g(x) for sample lane position x in
/// [0, 1]: an S-shaped ramp from 0 at the first sample lane to +-1 at the
/// last, with the sign alternating between gels.
double warp_profile(int gel_index, double x);

struct SimLane {
  std::string gel_id;
  int lane = 0;
  int cluster = 0;                ///< true partition label, 1-based
  double exposure = 1.0;
  std::vector<int> landmarks;     ///< signature, increasing
  std::vector<double> aligned;    ///< S_g(nu_l, u) + eps, before the between-gel warp
  std::vector<double> observed;   ///< band centers on the raw gel
};

struct SimGel {
  std::string gel_id;
  double warp_sign = 1.0;
  PiecewiseLinearMap between;     ///< W_g
  std::vector<double> references; ///< reference band centers on the raw gel
};

struct SimTruth {
  int landmarks = 0;
  double warp_amplitude = 0.0;
  int lanes_per_gel = 0;
  std::vector<int> hotspots;
  std::vector<SimGel> gels;
  std::vector<SimLane> lanes;     ///< sample lanes in gel, lane order

  /// True within-gel warp S_g(nu, u) on raw [0, 1] units.
  double warp(std::size_t gel, int lane, double nu) const;
  const SimLane* find(const std::string& gel_id, int lane) const;
  /// Cluster labels of sample lanes in gel, lane order.
  std::vector<int> partition() const;
};

struct Simulation {
  IntensityGrid grid;
  SimTruth truth;
};

Simulation simulate_gels(const SimSpec& spec, std::uint64_t seed);

}  // namespace gelwarp
