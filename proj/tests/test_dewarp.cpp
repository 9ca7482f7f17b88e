#include "doctest.h"

#include <cmath>
#include <map>
#include <numbers>

#include "gelwarp/dewarp.hpp"
#include "gelwarp/peakdetect.hpp"
#include "gelwarp/simulate.hpp"
#include "oracles.hpp"

using namespace gelwarp;

namespace {

PeakTable table_from(const std::vector<std::vector<double>>& lanes, const std::string& gel = "G1", int first_lane = 1) {
  PeakTable t;
  for (std::size_t i = 0; i < lanes.size(); ++i)
    for (std::size_t j = 0; j < lanes[i].size(); ++j)
      t.entries.push_back({gel, first_lane + static_cast<int>(i), static_cast<int>(j) + 1,
                           static_cast<std::size_t>(std::lround(lanes[i][j] * 1000)), lanes[i][j], 1.0});
  return t;
}

/// Peaks placed at the true aligned band positions of a simulation.
PeakTable truth_peaks(const SimTruth& truth) {
  PeakTable t;
  for (const auto& lane : truth.lanes)
    for (std::size_t j = 0; j < lane.aligned.size(); ++j)
      t.entries.push_back({lane.gel_id, lane.lane, static_cast<int>(j) + 1,
                           static_cast<std::size_t>(std::lround(lane.aligned[j] * 1000)), lane.aligned[j], 1.0});
  return t;
}

double log_ig(double x, InvGammaPrior p) {
  return p.shape * std::log(p.rate) - std::lgamma(p.shape) - (p.shape + 1.0) * std::log(x) - p.rate / x;
}

double log_phi(double x, double m, double sd) {
  return -0.5 * std::pow((x - m) / sd, 2) - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

ModelConfig small_config(int L) {
  ModelConfig cfg;
  cfg.landmarks = L;
  cfg.t_nu = 4;
  cfg.t_u = 4;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.window_raw() == doctest::Approx(3.0 / 101));
  cfg.window = 1.0 / 101;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("A0"), Error);
  cfg = ModelConfig{};
  cfg.t_nu = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("peak likelihood and its support") {
  auto nu = BSplineBasis(-2.0, 2.0, {});
  auto u = BSplineBasis(0.0, 1.0, {});
  auto field = WarpField::identity(nu, u);
  const double sd = 0.1;
  CHECK(log_likelihood_peak(0.3, 0.3, field, 0.5, sd, -1.0, 0.5) ==
        doctest::Approx(-std::log(sd * std::sqrt(2.0 * std::numbers::pi))).epsilon(1e-8));
  CHECK(log_likelihood_peak(0.3, 0.9, field, 0.5, sd, -1.0, 0.5) == -std::numeric_limits<double>::infinity());
  CHECK(log_likelihood_peak(0.3, 0.3, field, 0.5, sd, 0.3, 0.5) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("log joint of a single peak matches a term-by-term sum") {
  const int L = 9;
  auto cfg = small_config(L);
  const double t_raw = 0.52;
  auto data = prepare_model(table_from({{t_raw}}), cfg);
  auto state = initial_state(data, cfg);
  REQUIRE(state.z[0][0][0] == 5);
  const auto terms = log_joint_terms(data, state, cfg);

  const double sd = std::sqrt(state.noise_var);
  const double t = data.location.apply(t_raw);
  CHECK(terms.likelihood == doctest::Approx(log_phi(t, data.nu[5], sd)).epsilon(1e-7));
  CHECK(terms.z_prior == doctest::Approx(std::log(1.0 / L)).epsilon(1e-12));
  const auto& gs = state.gels[0];
  const int rows = cfg.t_nu;
  const int cols = cfg.t_u;
  double beta_prior = (rows - 2) * log_phi(0.0, 0.0, std::sqrt(gs.horizontal_var));
  for (int s = 1; s < rows - 1; ++s)
    beta_prior += (cols - 1) * log_phi(0.0, 0.0, std::sqrt(gs.vertical_var[static_cast<std::size_t>(s)]));
  CHECK(terms.beta_prior == doctest::Approx(beta_prior).epsilon(1e-10));
  double hyper = log_ig(gs.horizontal_var, cfg.horizontal_prior) + log_ig(state.noise_var, cfg.noise_prior) +
                 log_ig(state.tau, cfg.tau_prior);
  for (int s = 1; s < rows - 1; ++s) hyper += log_ig(gs.vertical_var[static_cast<std::size_t>(s)], cfg.vertical_prior);
  for (double v : state.lambda) hyper += std::log(2.0) + log_phi(v, 0.0, std::sqrt(state.tau));
  CHECK(terms.hyper_prior == doctest::Approx(hyper).epsilon(1e-10));
}

TEST_CASE("doubling the noise sd at the mode lowers the likelihood by P log 2") {
  const int L = 20;
  auto cfg = small_config(L);
  LandmarkGrid grid(L);
  auto data = prepare_model(table_from({{grid.position(3), grid.position(8), grid.position(15)},
                                        {grid.position(4), grid.position(12)}}),
                            cfg);
  auto state = initial_state(data, cfg);
  const double before = log_joint_terms(data, state, cfg).likelihood;
  state.noise_var *= 4.0;
  const double after = log_joint_terms(data, state, cfg).likelihood;
  CHECK(before - after == doctest::Approx(5 * std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("violated constraints give minus infinity") {
  auto cfg = small_config(10);
  auto data = prepare_model(table_from({{0.2, 0.5}}), cfg);
  auto state = initial_state(data, cfg);
  CHECK(std::isfinite(log_joint(data, state, cfg)));
  auto bad = state;
  bad.gels[0].beta(2, 1) = bad.gels[0].beta(1, 1) - 0.01;
  CHECK(log_joint(data, bad, cfg) == -std::numeric_limits<double>::infinity());
  CHECK(state_violation(data, bad).find("monotonicity") != std::string::npos);
  bad = state;
  bad.z[0][0] = {3, 3};
  CHECK(state_violation(data, bad).find("order") != std::string::npos);
  bad.z[0][0] = {2, 9};
  CHECK(state_violation(data, bad).find("window") != std::string::npos);
}

TEST_CASE("infeasible window is reported with the lane") {
  auto cfg = small_config(10);
  cfg.window = 2.0 / 11;
  // Six peaks within one spacing cannot take distinct landmarks inside the window.
  auto data = prepare_model(table_from({{0.45, 0.454, 0.458, 0.462, 0.466, 0.47}}), cfg);
  CHECK_THROWS_WITH_AS(initial_state(data, cfg), doctest::Contains("infeasible window"), Error);
}

TEST_CASE("assignment conditional: sharp peak, ratio identity, lambda modulation") {
  const int L = 10;
  auto cfg = small_config(L);
  LandmarkGrid grid(L);
  auto data = prepare_model(table_from({{grid.position(5)}}), cfg);
  auto state = initial_state(data, cfg);
  state.noise_var = 1e-6;
  auto p = assignment_conditional(data, state, 0, 0, 0);
  CHECK(p[4] >= 0.999);

  state.noise_var = std::pow(0.8 * (data.nu[1] - data.nu[0]), 2);
  for (std::size_t l = 0; l < state.lambda.size(); ++l) state.lambda[l] = 0.1 + 0.05 * static_cast<double>(l);
  p = assignment_conditional(data, state, 0, 0, 0);
  const auto field = data.warp(0, state.gels[0].beta);
  const auto& lane = data.gels[0].lanes[0];
  const double sd = std::sqrt(state.noise_var);
  const auto ls = state.lambda_star();
  for (int a = 4; a <= 6; ++a)
    for (int b = 4; b <= 6; ++b) {
      const double want = std::exp(log_phi(lane.t[0], field(data.nu[a], lane.u), sd) -
                                   log_phi(lane.t[0], field(data.nu[b], lane.u), sd)) *
                          ls[a - 1] / ls[b - 1];
      CHECK(p[a - 1] / p[b - 1] == doctest::Approx(want).epsilon(1e-9));
    }

  // Equal likelihood at two landmarks: lambda decides.
  auto mid = prepare_model(table_from({{0.5 * (grid.position(5) + grid.position(6))}}), cfg);
  auto s2 = initial_state(mid, cfg);
  s2.noise_var = 0.5;
  s2.lambda.assign(L, 1.0);
  s2.lambda[4] = 9.0;
  p = assignment_conditional(mid, s2, 0, 0, 0);
  CHECK(p[4] / p[5] == doctest::Approx(9.0).epsilon(1e-6));
}

TEST_CASE("Z draws follow the enumerated lane posterior") {
  const int L = 5;
  auto cfg = small_config(L);
  cfg.window = 2.5 / (L + 1);
  auto data = prepare_model(table_from({{0.36, 0.47}}), cfg);
  auto state = initial_state(data, cfg);
  state.noise_var = std::pow(data.nu[1] - data.nu[0], 2);
  state.lambda = {0.5, 1.0, 2.0, 1.5, 0.7};
  const auto& lane = data.gels[0].lanes[0];
  const auto field = data.warp(0, state.gels[0].beta);
  std::vector<double> s;
  for (double nu : data.nu) s.push_back(field(nu, lane.u));
  const auto exact = oracle::enumerate_lane(lane.t, s, data.nu, state.lambda_star(), std::sqrt(state.noise_var),
                                            data.window);
  Rng rng(12);
  std::map<std::vector<int>, double> counts;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) {
    sample_z(data, state, rng);
    counts[state.z[0][0]] += 1.0 / draws;
  }
  double tv = 0.0;
  for (const auto& [z, p] : exact) tv += std::abs(p - counts[z]);
  for (const auto& [z, p] : counts)
    if (!exact.count(z)) tv += p;
  CHECK(tv / 2 < 0.01);
}

TEST_CASE("beta conditional agrees with the log joint") {
  SimSpec spec;
  spec.gels = 1;
  spec.lanes_per_gel = 5;
  spec.landmarks = 30;
  auto sim = simulate_gels(spec, 3);
  ModelConfig cfg;
  cfg.landmarks = 30;
  cfg.t_nu = 8;
  cfg.t_u = 4;
  auto data = prepare_model(truth_peaks(sim.truth), cfg);
  auto state = initial_state(data, cfg);
  state.noise_var = 1e-3;
  state.gels[0].horizontal_var = 2e-3;
  for (auto& v : state.gels[0].vertical_var) v = 5e-3;
  for (int row = 1; row < cfg.t_nu - 1; ++row)
    for (int col = 0; col < cfg.t_u; ++col) {
      const auto c = beta_conditional(data, state, 0, row, col);
      const double x = state.gels[0].beta(row, col);
      const double h = 0.1 * std::min(x - c.lo, c.hi - x);
      auto at = [&](double v) {
        auto s = state;
        s.gels[0].beta(row, col) = v;
        return log_joint(data, s, cfg);
      };
      const double f0 = at(x);
      const double fp = at(x + h);
      const double fm = at(x - h);
      const double curvature = (fp + fm - 2.0 * f0) / (h * h);
      const double slope = (fp - fm) / (2.0 * h);
      CHECK(curvature == doctest::Approx(-1.0 / (c.sd * c.sd)).epsilon(1e-4));
      CHECK(slope == doctest::Approx(-(x - c.mean) / (c.sd * c.sd)).epsilon(1e-4).scale(1.0 / (c.sd * c.sd) * 1e-3));
      CHECK(c.lo == state.gels[0].beta(row - 1, col));
      CHECK(c.hi == state.gels[0].beta(row + 1, col));
    }
}

TEST_CASE("conjugate updates: tau and noise variance") {
  auto cfg = small_config(3);
  auto data = prepare_model(table_from({{0.26, 0.49, 0.76}}), cfg);
  auto state = initial_state(data, cfg);
  state.lambda = {0.2, 0.5, 0.9};
  Rng rng(21);
  const int n = 200000;
  double mean_precision = 0.0;
  for (int k = 0; k < n; ++k) {
    sample_tau(state, cfg, rng);
    mean_precision += 1.0 / state.tau / n;
  }
  const double shape = cfg.tau_prior.shape + 1.5;
  const double rate = cfg.tau_prior.rate + 0.5 * (0.04 + 0.25 + 0.81);
  CHECK(mean_precision == doctest::Approx(shape / rate).epsilon(0.01));

  const auto field = data.warp(0, state.gels[0].beta);
  const auto& lane = data.gels[0].lanes[0];
  double ssr = 0.0;
  for (std::size_t j = 0; j < lane.t.size(); ++j)
    ssr += std::pow(lane.t[j] - field(data.nu[static_cast<std::size_t>(state.z[0][0][j])], lane.u), 2);
  cfg.anneal_spacings = 0.0;
  mean_precision = 0.0;
  for (int k = 0; k < n; ++k) {
    sample_noise(data, state, cfg, rng);
    mean_precision += 1.0 / state.noise_var / n;
  }
  CHECK(mean_precision == doctest::Approx((cfg.noise_prior.shape + 1.5) / (cfg.noise_prior.rate + 0.5 * ssr)).epsilon(0.01));
}

TEST_CASE("equal lambdas give a uniform lambda star") {
  AlignmentState s;
  s.lambda.assign(8, 3.0);
  for (double v : s.lambda_star()) CHECK(v == doctest::Approx(0.125));
}

TEST_CASE("signatures") {
  auto y = signatures({{3, 7}, {}}, 8);
  CHECK(y[0] == std::vector<std::uint8_t>{0, 0, 1, 0, 0, 0, 1, 0});
  CHECK(y[1] == std::vector<std::uint8_t>(8, 0));
  CHECK_THROWS_AS(signatures({{9}}, 8), Error);
}

namespace {

struct Audit {
  long states = 0;
  long violations = 0;
  ModelConfig cfg;
};

void audit(const ModelData& data, const AlignmentState& state, void* ctx) {
  auto* a = static_cast<Audit*>(ctx);
  ++a->states;
  if (!state_violation(data, state).empty() || !std::isfinite(log_joint(data, state, a->cfg))) ++a->violations;
}

}  // namespace

TEST_CASE("chains keep every constraint and are reproducible") {
  SimSpec spec;
  spec.lanes_per_gel = 4;
  spec.landmarks = 25;
  auto sim = simulate_gels(spec, 5);
  ModelConfig cfg;
  cfg.landmarks = 25;
  cfg.t_nu = 6;
  cfg.t_u = 4;
  cfg.burn_in = 200;
  cfg.saved = 100;
  cfg.pilot_chains = 2;
  auto peaks = truth_peaks(sim.truth);
  Audit a;
  a.cfg = cfg;
  auto result = run_mcmc(prepare_model(peaks, cfg), cfg, std::nullopt, audit, &a);
  CHECK(a.states == 2 * 200 + 100);
  CHECK(a.violations == 0);
  CHECK(result.chain.size() == 100);

  auto again = run_mcmc(peaks, cfg);
  cfg.threads = 3;
  auto threaded = run_mcmc(peaks, cfg);
  REQUIRE(again.chain.size() == result.chain.size());
  for (std::size_t k = 0; k < result.chain.size(); ++k) {
    CHECK(again.chain[k].z == result.chain[k].z);
    CHECK(again.chain[k].log_joint == result.chain[k].log_joint);
    CHECK(threaded.chain[k].log_joint == result.chain[k].log_joint);
  }
  for (const auto& probs : result.summary.landmark_prob)
    for (double p : probs) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  const auto by_entry = assignments_by_entry(result.data, result.summary.z_map, peaks.entries.size());
  for (int z : by_entry) CHECK(z >= 1);
}

TEST_CASE("stationarity window") {
  Rng rng(2);
  std::vector<double> flat(4000);
  for (double& v : flat) v = rng.normal();
  CHECK(stationary_window(flat));
  std::vector<double> trend(4000);
  for (std::size_t k = 0; k < trend.size(); ++k) trend[k] = 0.01 * static_cast<double>(k) + rng.normal();
  CHECK_FALSE(stationary_window(trend));
}

TEST_CASE("a training gel realigned as a new gel keeps its assignments") {
  SimSpec spec;
  spec.lanes_per_gel = 6;
  spec.landmarks = 30;
  spec.warp_amplitude = 1.0;
  auto sim = simulate_gels(spec, 9);
  ModelConfig cfg;
  cfg.landmarks = 30;
  cfg.t_nu = 6;
  cfg.t_u = 4;
  cfg.burn_in = 600;
  cfg.saved = 600;
  auto peaks = truth_peaks(sim.truth);
  auto trained = run_mcmc(peaks, cfg);
  std::vector<std::vector<double>> lambdas;
  for (const auto& s : trained.chain) lambdas.push_back(s.lambda);
  auto g1 = filter_lanes(peaks, [](const std::string& g, int) { return g == "G1"; });
  NewGelConfig ncfg;
  ncfg.lambda_budget = 50;
  auto fresh = align_new_gel(g1, lambdas, cfg, ncfg, trained.data.lane);
  const auto n = fresh.z_map.size();
  REQUIRE(n == trained.data.gels[0].peak_count());
  std::size_t same = 0;
  for (std::size_t p = 0; p < n; ++p) same += fresh.z_map[p] == trained.summary.z_map[p];
  CHECK(static_cast<double>(same) / n >= 0.95);

  // One stored lambda draw is a plain conditional fit.
  std::vector<std::vector<double>> one{lambdas.back()};
  CHECK_NOTHROW(align_new_gel(g1, one, cfg, ncfg, trained.data.lane));
}
