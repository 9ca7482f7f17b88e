#include "gelwarp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gelwarp {

namespace {

struct Band {
  int landmark = 0;
  double amplitude = 1.0;
};

/// Hotspot landmarks shared by all lanes, at least three apart, denser at
/// low landmark indices.
std::vector<int> draw_hotspots(const SimSpec& spec, Rng& rng) {
  const int L = spec.landmarks;
  const int actin = actin_landmark(L);
  std::vector<int> out;
  int last = -10;
  for (int l = 2; l < L; ++l) {
    const double p = spec.hotspot_density * (1.0 - 0.6 * (l - 1) / std::max(1, L - 1));
    if (l - last >= 3 && std::abs(l - actin) >= 3 && rng.uniform() < p) {
      out.push_back(l);
      last = l;
    }
  }
  return out;
}

std::vector<Band> draw_signature(const SimSpec& spec, const std::vector<int>& hotspots, Rng& rng) {
  const int L = spec.landmarks;
  const int actin = actin_landmark(L);
  std::vector<int> chosen{actin};
  for (int h : hotspots)
    if (rng.uniform() < spec.hotspot_rate) chosen.push_back(h);
  for (int l = 1; l <= L; ++l)
    if (rng.uniform() < spec.background_rate) chosen.push_back(l);
  std::sort(chosen.begin(), chosen.end());
  std::vector<Band> bands;
  for (int l : chosen) {
    // Keep bands two landmarks apart; actin always survives.
    if (!bands.empty() && l - bands.back().landmark < 2) {
      if (l != actin) continue;
      bands.pop_back();
    }
    bands.push_back({l, l == actin ? 0.6 + 0.4 * rng.uniform() : 0.3 + 0.7 * rng.uniform()});
  }
  return bands;
}

std::vector<Band> jitter_signature(const std::vector<Band>& base, const SimSpec& spec, Rng& rng) {
  if (spec.template_jitter <= 0.0) return base;
  const int actin = actin_landmark(spec.landmarks);
  std::vector<Band> out;
  for (const auto& b : base)
    if (b.landmark == actin || rng.uniform() >= spec.template_jitter) out.push_back(b);
  return out;
}

double gel_sign(std::size_t g) { return g % 2 == 0 ? 1.0 : -1.0; }

}  // namespace

SimDesign parse_sim_design(const std::string& name) {
  if (name == "replicate_pairs") return SimDesign::replicate_pairs;
  if (name == "clusters") return SimDesign::clusters;
  if (name == "independent") return SimDesign::independent;
  throw Error("unknown simulation design '" + name + "' (expected replicate_pairs, clusters or independent)");
}

std::string to_string(SimDesign design) {
  switch (design) {
    case SimDesign::replicate_pairs: return "replicate_pairs";
    case SimDesign::clusters: return "clusters";
    case SimDesign::independent: return "independent";
  }
  return "independent";
}

void SimSpec::validate() const {
  if (gels < 1 || lanes_per_gel < 1) throw Error("simulation needs at least one gel and one sample lane");
  if (landmarks < 3) throw Error("simulation needs at least three landmarks");
  if (bins < 50) throw Error("simulation needs at least 50 bins");
  if (design == SimDesign::replicate_pairs && gels != 2) throw Error("replicate_pairs design needs exactly two gels");
  if (design == SimDesign::clusters && clusters < 1) throw Error("clusters design needs at least one cluster");
  for (double p : {hotspot_density, hotspot_rate, background_rate, template_jitter})
    if (!(p >= 0.0 && p <= 1.0)) throw Error("simulation probabilities must lie in [0, 1]");
  if (warp_amplitude < 0.0 || location_noise < 0.0 || between_gel_shift < 0.0 || band_width <= 0.0 ||
      intensity_noise < 0.0)
    throw Error("simulation amplitudes, noise levels and widths must be nonnegative");
  if (warp_amplitude * std::numbers::pi / (landmarks + 1) >= 1.0)
    throw Error("warp amplitude " + std::to_string(warp_amplitude) +
                " violates monotonicity: need amplitude * pi / (L + 1) < 1");
  if (!(exposure_min > 0.0 && exposure_max >= exposure_min)) throw Error("invalid exposure range");
}

const std::vector<double>& reference_weights() {
  static const std::vector<double> weights{200.0, 116.0, 97.0, 66.0, 45.0, 31.0, 21.5};
  return weights;
}

std::vector<double> reference_positions() {
  const auto& w = reference_weights();
  const double hi = std::log(w.front());
  const double lo = std::log(w.back());
  std::vector<double> out;
  for (double kda : w) out.push_back(0.08 + 0.82 * (hi - std::log(kda)) / (hi - lo));
  return out;
}

int actin_landmark(int landmarks) {
  return std::clamp(static_cast<int>(std::lround(0.43 * (landmarks + 1))), 1, landmarks);
}

double warp_profile(int gel_index, double x) {
  return gel_sign(static_cast<std::size_t>(gel_index)) * 0.5 * (1.0 - std::cos(std::numbers::pi * x));
}

double SimTruth::warp(std::size_t gel, int lane, double nu) const {
  const double x = lanes_per_gel > 1 ? static_cast<double>(lane - 2) / (lanes_per_gel - 1) : 0.5;
  const double spacing = 1.0 / (landmarks + 1);
  return nu + warp_amplitude * spacing * std::sin(std::numbers::pi * nu) * warp_profile(static_cast<int>(gel), x);
}

const SimLane* SimTruth::find(const std::string& gel_id, int lane) const {
  for (const auto& l : lanes)
    if (l.gel_id == gel_id && l.lane == lane) return &l;
  return nullptr;
}

std::vector<int> SimTruth::partition() const {
  std::vector<int> out;
  for (const auto& l : lanes) out.push_back(l.cluster);
  return out;
}

Simulation simulate_gels(const SimSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Simulation sim;
  auto& truth = sim.truth;
  truth.landmarks = spec.landmarks;
  truth.warp_amplitude = spec.warp_amplitude;
  truth.lanes_per_gel = spec.lanes_per_gel;
  sim.grid.bins = spec.bins;
  const double spacing = 1.0 / (spec.landmarks + 1);
  const LandmarkGrid landmarks(spec.landmarks);
  const auto refs = reference_positions();
  const auto N = static_cast<std::size_t>(spec.lanes_per_gel);

  const auto hotspots = draw_hotspots(spec, rng);
  truth.hotspots = hotspots;
  // Signatures per (gel, lane slot) and their cluster labels.
  std::vector<std::vector<std::vector<Band>>> signature(static_cast<std::size_t>(spec.gels));
  std::vector<std::vector<int>> label(static_cast<std::size_t>(spec.gels));
  switch (spec.design) {
    case SimDesign::replicate_pairs: {
      std::vector<std::vector<Band>> pairs;
      for (std::size_t k = 0; k < N; ++k) pairs.push_back(draw_signature(spec, hotspots, rng));
      std::vector<std::size_t> order(N);
      std::iota(order.begin(), order.end(), 0);
      signature[0] = pairs;
      for (std::size_t k = 0; k < N; ++k) label[0].push_back(static_cast<int>(k) + 1);
      if (spec.shuffle_second_gel) std::shuffle(order.begin(), order.end(), rng.engine());
      for (std::size_t k : order) {
        signature[1].push_back(pairs[k]);
        label[1].push_back(static_cast<int>(k) + 1);
      }
      break;
    }
    case SimDesign::clusters: {
      std::vector<std::vector<Band>> templates;
      for (int c = 0; c < spec.clusters; ++c) templates.push_back(draw_signature(spec, hotspots, rng));
      std::size_t next = 0;
      for (auto g = 0; g < spec.gels; ++g)
        for (std::size_t i = 0; i < N; ++i, ++next) {
          const auto c = next % templates.size();
          signature[static_cast<std::size_t>(g)].push_back(jitter_signature(templates[c], spec, rng));
          label[static_cast<std::size_t>(g)].push_back(static_cast<int>(c) + 1);
        }
      break;
    }
    case SimDesign::independent: {
      int next = 0;
      for (auto g = 0; g < spec.gels; ++g)
        for (std::size_t i = 0; i < N; ++i) {
          signature[static_cast<std::size_t>(g)].push_back(draw_signature(spec, hotspots, rng));
          label[static_cast<std::size_t>(g)].push_back(++next);
        }
      break;
    }
  }
  if (spec.pure_noise)
    for (auto& gel : signature)
      for (auto& lane : gel) lane.clear();

  const double B = static_cast<double>(spec.bins);
  auto render = [&](std::vector<double>& trace, double center, double amplitude) {
    const double c = center * B;
    const double reach = 6.0 * spec.band_width;
    const auto lo = static_cast<std::size_t>(std::max(1.0, std::floor(c - reach)));
    const auto hi = static_cast<std::size_t>(std::min(B, std::ceil(c + reach)));
    for (std::size_t b = lo; b <= hi; ++b) {
      const double z = (static_cast<double>(b) - c) / spec.band_width;
      trace[b - 1] += amplitude * std::exp(-0.5 * z * z);
    }
  };
  auto add_noise = [&](std::vector<double>& trace, double sd) {
    for (double& v : trace) v = std::max(0.0, v + sd * rng.normal());
  };

  for (std::size_t g = 0; g < static_cast<std::size_t>(spec.gels); ++g) {
    SimGel gel;
    gel.gel_id = "G" + std::to_string(g + 1);
    gel.warp_sign = gel_sign(g);
    if (g > 0 && spec.between_gel_shift > 0.0) {
      std::vector<double> moved;
      for (;;) {
        moved.clear();
        for (double r : refs) moved.push_back(r + (2.0 * rng.uniform() - 1.0) * spec.between_gel_shift * spacing);
        bool ok = moved.front() > 0.0 && moved.back() < 1.0;
        for (std::size_t k = 1; k < moved.size(); ++k) ok = ok && moved[k] > moved[k - 1];
        if (ok) break;
      }
      std::vector<double> q{0.0};
      std::vector<double> t{0.0};
      q.insert(q.end(), refs.begin(), refs.end());
      t.insert(t.end(), moved.begin(), moved.end());
      q.push_back(1.0);
      t.push_back(1.0);
      gel.between = PiecewiseLinearMap(q, t);
    }
    for (double r : refs) gel.references.push_back(gel.between(r));

    GelTrace trace;
    trace.gel_id = gel.gel_id;
    Lane ref;
    ref.index = 1;
    ref.is_reference = true;
    ref.intensity.assign(spec.bins, 0.0);
    for (double r : gel.references) render(ref.intensity, r, 1.0);
    add_noise(ref.intensity, spec.intensity_noise);
    trace.lanes.push_back(std::move(ref));

    for (std::size_t i = 0; i < N; ++i) {
      SimLane lane;
      lane.gel_id = gel.gel_id;
      lane.lane = static_cast<int>(i) + 2;
      lane.cluster = label[g][i];
      lane.exposure = spec.exposure_min + (spec.exposure_max - spec.exposure_min) * rng.uniform();
      Lane out;
      out.index = lane.lane;
      out.intensity.assign(spec.bins, 0.0);
      double prev = 0.0;
      for (const auto& band : signature[g][i]) {
        const double sg = truth.warp(g, lane.lane, landmarks.position(band.landmark));
        double a = 0.0;
        do {
          a = sg + spec.location_noise * spacing * rng.normal();
        } while (!(a > prev && a < 1.0));
        prev = a;
        lane.landmarks.push_back(band.landmark);
        lane.aligned.push_back(a);
        lane.observed.push_back(gel.between(a));
        render(out.intensity, lane.observed.back(), lane.exposure * band.amplitude);
      }
      add_noise(out.intensity, spec.intensity_noise);
      trace.lanes.push_back(std::move(out));
      truth.lanes.push_back(std::move(lane));
    }
    truth.gels.push_back(std::move(gel));
    sim.grid.gels.push_back(std::move(trace));
  }
  return sim;
}

}  // namespace gelwarp
