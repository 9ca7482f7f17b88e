#include "gelwarp/dewarp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "gelwarp/parallel.hpp"

namespace gelwarp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_normal(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

double log_inv_gamma(double x, const InvGammaPrior& p) {
  if (!(x > 0.0)) return kNegInf;
  return p.shape * std::log(p.rate) - std::lgamma(p.shape) - (p.shape + 1.0) * std::log(x) - p.rate / x;
}

BasisRow basis_row(const BSplineBasis& basis, double x) {
  BasisRow row;
  row.first = basis.evaluate_nonzero(x, row.w);
  return row;
}

double warp_at(const Eigen::MatrixXd& beta, const BasisRow& nu, const BasisRow& u) {
  double sum = 0.0;
  for (int a = 0; a < 4; ++a) {
    double inner = 0.0;
    for (int b = 0; b < 4; ++b) inner += beta(nu.first + a, u.first + b) * u.w[static_cast<std::size_t>(b)];
    sum += nu.w[static_cast<std::size_t>(a)] * inner;
  }
  return sum;
}

/// Basis weight of coefficient `index` in a row, 0 when outside its support.
double weight_of(const BasisRow& row, int index) {
  const int k = index - row.first;
  return k >= 0 && k < 4 ? row.w[static_cast<std::size_t>(k)] : 0.0;
}

/// S(nu_l, u) for l = 0 .. L + 1 on one lane.
std::vector<double> lane_warp(const ModelGel& gel, const Eigen::MatrixXd& beta, const BasisRow& u_row) {
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(beta.rows());
  for (int b = 0; b < 4; ++b) coeffs += beta.col(u_row.first + b) * u_row.w[static_cast<std::size_t>(b)];
  std::vector<double> out(gel.nu_rows.size());
  for (std::size_t l = 0; l < gel.nu_rows.size(); ++l) {
    const auto& row = gel.nu_rows[l];
    double sum = 0.0;
    for (int a = 0; a < 4; ++a) sum += coeffs(row.first + a) * row.w[static_cast<std::size_t>(a)];
    out[l] = sum;
  }
  return out;
}

/// Log weights log phi(T_j; S_l, sd) + log lambda*_l, -inf outside the window.
/// Indexed [j][l], l = 0 .. L (entry 0 is never admissible).
std::vector<std::vector<double>> lane_log_weights(const ModelData& data, const ModelLane& lane,
                                                  const std::vector<double>& warp, const std::vector<double>& log_lstar,
                                                  double sd) {
  const int L = data.landmarks();
  std::vector<std::vector<double>> w(lane.t.size(), std::vector<double>(static_cast<std::size_t>(L) + 1, kNegInf));
  for (std::size_t j = 0; j < lane.t.size(); ++j)
    for (int l = 1; l <= L; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      if (std::abs(lane.t[j] - data.nu[lu]) < data.window) w[j][lu] = log_normal(lane.t[j], warp[lu], sd) + log_lstar[lu - 1];
    }
  return w;
}

/// Backward messages: m[j][l] = w[j][l] + log sum_{l' > l} exp(m[j+1][l']).
std::vector<std::vector<double>> backward_messages(const std::vector<std::vector<double>>& w) {
  auto m = w;
  for (std::size_t j = m.size(); j-- > 1;) {
    double suffix = kNegInf;
    for (std::size_t l = m[j].size(); l-- > 0;) {
      // suffix holds log sum over l' > l of m[j][l'].
      m[j - 1][l] = w[j - 1][l] + suffix;
      if (w[j - 1][l] == kNegInf) m[j - 1][l] = kNegInf;
      suffix = log_add(suffix, m[j][l]);
    }
  }
  return m;
}

std::vector<double> log_lambda_star(const AlignmentState& state) {
  auto ls = state.lambda_star();
  for (double& v : ls) v = std::log(v);
  return ls;
}

std::string lane_name(const ModelLane& lane) { return "gel " + lane.gel_id + " lane " + std::to_string(lane.lane); }

/// Peak-level cache for the coefficient updates of one gel.
struct GelPeaks {
  std::vector<double> t;
  std::vector<BasisRow> nu;
  std::vector<BasisRow> u;
  std::vector<double> mu;
};

GelPeaks gel_peaks(const ModelGel& gel, const std::vector<std::vector<int>>& z, const Eigen::MatrixXd& beta) {
  GelPeaks p;
  for (std::size_t i = 0; i < gel.lanes.size(); ++i)
    for (std::size_t j = 0; j < gel.lanes[i].t.size(); ++j) {
      const auto& nu = gel.nu_rows[static_cast<std::size_t>(z[i][j])];
      p.t.push_back(gel.lanes[i].t[j]);
      p.nu.push_back(nu);
      p.u.push_back(gel.lanes[i].u_row);
      p.mu.push_back(warp_at(beta, nu, gel.lanes[i].u_row));
    }
  return p;
}

CoefficientConditional coefficient_conditional(const ModelGel& gel, const GelState& gs, const GelPeaks& peaks,
                                               double noise_var, int s, int col) {
  const auto& b = gs.beta;
  const auto& id = gel.beta_id;
  const int rows = static_cast<int>(b.rows());
  const int cols = static_cast<int>(b.cols());
  double precision = 0.0;
  double linear = 0.0;
  auto add = [&](double target, double weight) {
    precision += weight;
    linear += weight * target;
  };
  if (col == 0) {
    // Random walk on deviations from the identity along nu.
    const double w = 1.0 / gs.horizontal_var;
    add(id(s) + (b(s - 1, 0) - id(s - 1)), w);
    if (s + 1 <= rows - 2) add(id(s) + (b(s + 1, 0) - id(s + 1)), w);
  }
  const double wv = 1.0 / gs.vertical_var[static_cast<std::size_t>(s)];
  if (col > 0) add(b(s, col - 1), wv);
  if (col + 1 < cols) add(b(s, col + 1), wv);
  for (std::size_t p = 0; p < peaks.t.size(); ++p) {
    const double c = weight_of(peaks.nu[p], s) * weight_of(peaks.u[p], col);
    if (c == 0.0) continue;
    const double r = peaks.t[p] - peaks.mu[p] + c * b(s, col);
    precision += c * c / noise_var;
    linear += c * r / noise_var;
  }
  return {linear / precision, 1.0 / std::sqrt(precision), b(s - 1, col), b(s + 1, col)};
}

/// Noise variance imposed at annealing sweep k of n: the standard deviation
/// falls geometrically from anneal_spacings to a tenth of a spacing.
double anneal_variance(const ModelConfig& cfg, double spacing, int k, int n) {
  const double start = cfg.anneal_spacings * spacing;
  const double end = std::min(start, 0.1 * spacing);
  const double sd = start * std::pow(end / start, static_cast<double>(k) / std::max(1, n - 1));
  return sd * sd;
}

std::vector<std::size_t> lane_offsets(const ModelData& data) {
  std::vector<std::size_t> offsets;
  std::size_t n = 0;
  for (const auto& gel : data.gels)
    for (const auto& lane : gel.lanes) {
      offsets.push_back(n);
      n += lane.t.size();
    }
  offsets.push_back(n);
  return offsets;
}

}  // namespace

void ModelConfig::validate() const {
  if (landmarks < 1) throw Error("model needs at least one landmark");
  if (t_nu < 4 || t_u < 4) throw Error("cubic warp bases need at least 4 functions per direction");
  if (window_raw() < 2.0 / (landmarks + 1) - 1e-12)
    throw Error("window A0 must span at least two landmark spacings (A0 >= 2/(L+1))");
  if (burn_in < 0 || saved < 1 || thin < 1) throw Error("invalid iteration counts");
  for (const auto* p : {&noise_prior, &horizontal_prior, &vertical_prior, &tau_prior})
    if (!(p->shape > 0.0 && p->rate > 0.0)) throw Error("inverse-gamma hyperpriors need positive shape and rate");
  if (!(lambda_step > 0.0)) throw Error("lambda step must be positive");
  if (anneal_spacings < 0.0) throw Error("anneal spacings must be nonnegative");
  if (pilot_chains < 1) throw Error("need at least one pilot chain");
}

std::size_t ModelGel::peak_count() const {
  std::size_t n = 0;
  for (const auto& lane : lanes) n += lane.t.size();
  return n;
}

std::size_t ModelData::peak_count() const {
  std::size_t n = 0;
  for (const auto& gel : gels) n += gel.peak_count();
  return n;
}

WarpField ModelData::warp(std::size_t g, const Eigen::MatrixXd& beta) const {
  return {gels[g].nu_basis, gels[g].u_basis, beta};
}

ModelData prepare_model(const PeakTable& peaks, const ModelConfig& cfg, std::optional<Standardizer> lane_standardizer) {
  cfg.validate();
  peaks.validate();
  if (peaks.entries.empty()) throw Error("no peaks to model");

  ModelData data;
  data.grid = LandmarkGrid(cfg.landmarks);
  data.location = Standardizer::fit(data.grid.positions());
  data.nu = data.location.apply(data.grid.positions());
  data.window = cfg.window_raw() / data.location.scale();

  std::vector<double> lane_values;
  for (const auto& p : peaks.entries) lane_values.push_back(p.lane);
  data.lane = lane_standardizer ? *lane_standardizer : Standardizer::fit_or_center(lane_values);

  std::vector<std::string> gel_order;
  std::map<std::string, std::map<int, ModelLane>> grouped;
  for (std::size_t k = 0; k < peaks.entries.size(); ++k) {
    const auto& p = peaks.entries[k];
    if (!grouped.contains(p.gel_id)) gel_order.push_back(p.gel_id);
    auto& lane = grouped[p.gel_id][p.lane];
    lane.gel_id = p.gel_id;
    lane.lane = p.lane;
    lane.u = data.lane.apply(p.lane);
    lane.t.push_back(data.location.apply(p.location));
    lane.entry.push_back(k);
  }

  const double lo = data.nu.front();
  const double hi = data.nu.back();
  for (const auto& id : gel_order) {
    ModelGel gel;
    gel.gel_id = id;
    std::vector<double> t_values;
    std::vector<double> u_values;
    for (auto& [index, lane] : grouped[id]) {
      t_values.insert(t_values.end(), lane.t.begin(), lane.t.end());
      u_values.insert(u_values.end(), lane.t.size(), lane.u);
      gel.lanes.push_back(std::move(lane));
    }
    double u_lo = gel.lanes.front().u;
    double u_hi = gel.lanes.back().u;
    if (!(u_hi > u_lo)) {
      u_lo -= 0.5 / data.lane.scale();
      u_hi += 0.5 / data.lane.scale();
    }
    try {
      gel.nu_basis = make_basis(t_values, cfg.t_nu, lo, hi);
      gel.u_basis = make_basis(u_values, cfg.t_u, u_lo, u_hi);
      gel.beta_id = identity_coefficients(gel.nu_basis);
    } catch (const Error& e) {
      throw Error("gel " + id + ": " + e.what());
    }
    for (double nu : data.nu) gel.nu_rows.push_back(basis_row(gel.nu_basis, nu));
    for (auto& lane : gel.lanes) lane.u_row = basis_row(gel.u_basis, lane.u);
    if (gel.peak_count() < static_cast<std::size_t>(cfg.t_nu))
      data.warnings.push_back("gel " + id + " has " + std::to_string(gel.peak_count()) +
                              " peaks, fewer than T_nu; its warp is weakly identified");
    data.gels.push_back(std::move(gel));
  }
  return data;
}

std::vector<double> AlignmentState::lambda_star() const {
  const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);
  std::vector<double> out(lambda.size());
  for (std::size_t l = 0; l < lambda.size(); ++l) out[l] = lambda[l] / total;
  return out;
}

std::vector<int> AlignmentState::flat_z() const {
  std::vector<int> out;
  for (const auto& gel : z)
    for (const auto& lane : gel) out.insert(out.end(), lane.begin(), lane.end());
  return out;
}

AlignmentState initial_state(const ModelData& data, const ModelConfig& cfg) {
  const int L = data.landmarks();
  AlignmentState state;
  state.lambda.assign(static_cast<std::size_t>(L), 1.0 / L);
  state.tau = 1.0 / (static_cast<double>(L) * L);
  state.noise_var = 1e-4;
  for (const auto& gel : data.gels) {
    GelState gs;
    gs.beta = gel.beta_id.replicate(1, gel.u_basis.size());
    gs.horizontal_var = 1e-4;
    gs.vertical_var.assign(static_cast<std::size_t>(cfg.t_nu), 1e-4);
    state.gels.push_back(std::move(gs));

    auto& gel_z = state.z.emplace_back();
    for (const auto& lane : gel.lanes) {
      const std::size_t J = lane.t.size();
      // feasible[j][l]: peak j can take l and peaks after it still fit.
      std::vector<std::vector<char>> feasible(J, std::vector<char>(static_cast<std::size_t>(L) + 2, 0));
      for (std::size_t j = J; j-- > 0;) {
        bool later = j + 1 == J;
        for (int l = L; l >= 1; --l) {
          const auto lu = static_cast<std::size_t>(l);
          const bool inside = std::abs(lane.t[j] - data.nu[lu]) < data.window;
          feasible[j][lu] = inside && later;
          if (j + 1 < J && feasible[j + 1][lu]) later = true;
        }
      }
      std::vector<int> z;
      int prev = 0;
      for (std::size_t j = 0; j < J; ++j) {
        int best = -1;
        for (int l = prev + 1; l <= L; ++l) {
          if (!feasible[j][static_cast<std::size_t>(l)]) continue;
          if (best < 0 || std::abs(lane.t[j] - data.nu[static_cast<std::size_t>(l)]) <
                              std::abs(lane.t[j] - data.nu[static_cast<std::size_t>(best)]))
            best = l;
        }
        if (best < 0)
          throw Error("infeasible window: " + lane_name(lane) + " peak " + std::to_string(j + 1) +
                      " has no admissible landmark; increase A0");
        z.push_back(best);
        prev = best;
      }
      gel_z.push_back(std::move(z));
    }
  }
  return state;
}

double log_likelihood_peak(double t, double nu_z, const WarpField& field, double u, double noise_sd, double prev_t,
                           double window) {
  if (!(std::abs(t - nu_z) < window) || !(t > prev_t)) return kNegInf;
  return log_normal(t, field(nu_z, u), noise_sd);
}

std::string state_violation(const ModelData& data, const AlignmentState& state) {
  const int L = data.landmarks();
  if (state.z.size() != data.gels.size() || state.gels.size() != data.gels.size()) return "state shape mismatch";
  for (std::size_t g = 0; g < data.gels.size(); ++g) {
    const auto field = data.warp(g, state.gels[g].beta);
    if (auto v = field.constraint_violation(); !v.empty()) return "gel " + data.gels[g].gel_id + ": " + v;
    for (std::size_t i = 0; i < data.gels[g].lanes.size(); ++i) {
      const auto& lane = data.gels[g].lanes[i];
      const auto& z = state.z[g][i];
      if (z.size() != lane.t.size()) return lane_name(lane) + ": assignment count mismatch";
      for (std::size_t j = 0; j < z.size(); ++j) {
        if (z[j] < 1 || z[j] > L) return lane_name(lane) + ": landmark out of range";
        if (j > 0 && !(z[j] > z[j - 1])) return lane_name(lane) + ": landmark order violated";
        if (!(std::abs(lane.t[j] - data.nu[static_cast<std::size_t>(z[j])]) < data.window))
          return lane_name(lane) + ": peak " + std::to_string(j + 1) + " outside its window";
        if (j > 0 && !(lane.t[j] > lane.t[j - 1])) return lane_name(lane) + ": peak locations not increasing";
      }
    }
    if (!(state.gels[g].horizontal_var > 0.0)) return "nonpositive horizontal smoothing variance";
    for (std::size_t s = 1; s + 1 < state.gels[g].vertical_var.size(); ++s)
      if (!(state.gels[g].vertical_var[s] > 0.0)) return "nonpositive vertical smoothing variance";
  }
  if (state.lambda.size() != static_cast<std::size_t>(L)) return "lambda has wrong length";
  for (double v : state.lambda)
    if (!(v > 0.0) || !std::isfinite(v)) return "lambda must be positive";
  if (!(state.noise_var > 0.0) || !(state.tau > 0.0)) return "nonpositive noise variance or tau";
  return {};
}

LogJointTerms log_joint_terms(const ModelData& data, const AlignmentState& state, const ModelConfig& cfg) {
  LogJointTerms terms;
  if (!state_violation(data, state).empty()) {
    terms.likelihood = kNegInf;
    return terms;
  }
  const auto lstar = state.lambda_star();
  const double sd = std::sqrt(state.noise_var);
  for (std::size_t g = 0; g < data.gels.size(); ++g) {
    const auto& gel = data.gels[g];
    const auto& gs = state.gels[g];
    const auto field = data.warp(g, gs.beta);
    for (std::size_t i = 0; i < gel.lanes.size(); ++i) {
      const auto& lane = gel.lanes[i];
      double prev = kNegInf;
      terms.z_prior += std::lgamma(static_cast<double>(lane.t.size()) + 1.0);
      for (std::size_t j = 0; j < lane.t.size(); ++j) {
        const int z = state.z[g][i][j];
        terms.likelihood +=
            log_likelihood_peak(lane.t[j], data.nu[static_cast<std::size_t>(z)], field, lane.u, sd, prev, data.window);
        terms.z_prior += std::log(lstar[static_cast<std::size_t>(z) - 1]);
        prev = lane.t[j];
      }
    }

    // Horizontal random walk on deviations from the identity (first lane column).
    const int rows = static_cast<int>(gs.beta.rows());
    const Eigen::VectorXd dev = (gs.beta.col(0) - gel.beta_id).head(rows - 1);
    const Eigen::VectorXd h_inc = difference_matrix(rows - 1) * dev;
    for (int k = 0; k < h_inc.size(); ++k) terms.beta_prior += log_normal(h_inc(k), 0.0, std::sqrt(gs.horizontal_var));
    // Vertical random walks for every free row.
    const Eigen::MatrixXd d2 = difference_matrix(static_cast<int>(gs.beta.cols()));
    for (int s = 1; s < rows - 1; ++s) {
      const Eigen::VectorXd v_inc = d2 * gs.beta.row(s).transpose();
      const double v_sd = std::sqrt(gs.vertical_var[static_cast<std::size_t>(s)]);
      for (int k = 0; k < v_inc.size(); ++k) terms.beta_prior += log_normal(v_inc(k), 0.0, v_sd);
      terms.hyper_prior += log_inv_gamma(gs.vertical_var[static_cast<std::size_t>(s)], cfg.vertical_prior);
    }
    terms.hyper_prior += log_inv_gamma(gs.horizontal_var, cfg.horizontal_prior);
  }
  terms.hyper_prior += log_inv_gamma(state.noise_var, cfg.noise_prior);
  terms.hyper_prior += log_inv_gamma(state.tau, cfg.tau_prior);
  // Half-normal intensities.
  for (double v : state.lambda) terms.hyper_prior += std::log(2.0) + log_normal(v, 0.0, std::sqrt(state.tau));
  return terms;
}

double log_joint(const ModelData& data, const AlignmentState& state, const ModelConfig& cfg) {
  return log_joint_terms(data, state, cfg).total();
}

std::vector<double> assignment_conditional(const ModelData& data, const AlignmentState& state, std::size_t g,
                                           std::size_t i, std::size_t j) {
  const int L = data.landmarks();
  const auto& gel = data.gels[g];
  const auto& lane = gel.lanes[i];
  const auto& z = state.z[g][i];
  const int lower = j > 0 ? z[j - 1] : 0;
  const int upper = j + 1 < z.size() ? z[j + 1] : L + 1;
  const auto warp = lane_warp(gel, state.gels[g].beta, lane.u_row);
  const auto log_lstar = log_lambda_star(state);
  const double sd = std::sqrt(state.noise_var);
  std::vector<double> logw(static_cast<std::size_t>(L), kNegInf);
  for (int l = lower + 1; l < upper; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    if (std::abs(lane.t[j] - data.nu[lu]) < data.window)
      logw[lu - 1] = log_normal(lane.t[j], warp[lu], sd) + log_lstar[lu - 1];
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> p(logw.size(), 0.0);
  if (top == kNegInf) return p;
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) total += p[k] = logw[k] == kNegInf ? 0.0 : std::exp(logw[k] - top);
  for (double& v : p) v /= total;
  return p;
}

double lane_log_evidence(const ModelData& data, const AlignmentState& state, std::size_t g, std::size_t i) {
  const auto& gel = data.gels[g];
  const auto& lane = gel.lanes[i];
  if (lane.t.empty()) return 0.0;
  const auto warp = lane_warp(gel, state.gels[g].beta, lane.u_row);
  const auto m = backward_messages(lane_log_weights(data, lane, warp, log_lambda_star(state), std::sqrt(state.noise_var)));
  double total = kNegInf;
  for (double v : m.front()) total = log_add(total, v);
  return total;
}

void sample_z(const ModelData& data, AlignmentState& state, Rng& rng) {
  const auto log_lstar = log_lambda_star(state);
  const double sd = std::sqrt(state.noise_var);
  for (std::size_t g = 0; g < data.gels.size(); ++g) {
    const auto& gel = data.gels[g];
    for (std::size_t i = 0; i < gel.lanes.size(); ++i) {
      const auto& lane = gel.lanes[i];
      if (lane.t.empty()) continue;
      const auto warp = lane_warp(gel, state.gels[g].beta, lane.u_row);
      auto m = backward_messages(lane_log_weights(data, lane, warp, log_lstar, sd));
      auto& z = state.z[g][i];
      int prev = 0;
      for (std::size_t j = 0; j < lane.t.size(); ++j) {
        for (int l = 0; l <= prev; ++l) m[j][static_cast<std::size_t>(l)] = kNegInf;
        if (std::all_of(m[j].begin(), m[j].end(), [](double v) { return v == kNegInf; }))
          throw Error("infeasible window: " + lane_name(lane) + " has no admissible assignment; increase A0");
        z[j] = static_cast<int>(rng.categorical_log(m[j]));
        prev = z[j];
      }
    }
  }
}

CoefficientConditional beta_conditional(const ModelData& data, const AlignmentState& state, std::size_t g, int row,
                                        int col) {
  const auto& gel = data.gels[g];
  const auto peaks = gel_peaks(gel, state.z[g], state.gels[g].beta);
  return coefficient_conditional(gel, state.gels[g], peaks, state.noise_var, row, col);
}

void sample_beta(const ModelData& data, AlignmentState& state, Rng& rng) {
  for (std::size_t g = 0; g < data.gels.size(); ++g) {
    const auto& gel = data.gels[g];
    auto& gs = state.gels[g];
    auto peaks = gel_peaks(gel, state.z[g], gs.beta);
    const int rows = static_cast<int>(gs.beta.rows());
    const int cols = static_cast<int>(gs.beta.cols());
    for (int s = 1; s < rows - 1; ++s)
      for (int t = 0; t < cols; ++t) {
        const auto c = coefficient_conditional(gel, gs, peaks, state.noise_var, s, t);
        const double old = gs.beta(s, t);
        const double value = rng.truncated_normal(c.mean, c.sd, c.lo, c.hi);
        gs.beta(s, t) = value;
        for (std::size_t p = 0; p < peaks.t.size(); ++p) {
          const double w = weight_of(peaks.nu[p], s) * weight_of(peaks.u[p], t);
          if (w != 0.0) peaks.mu[p] += w * (value - old);
        }
      }
  }
}

void sample_noise(const ModelData& data, AlignmentState& state, const ModelConfig& cfg, Rng& rng) {
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t g = 0; g < data.gels.size(); ++g) {
    const auto peaks = gel_peaks(data.gels[g], state.z[g], state.gels[g].beta);
    for (std::size_t p = 0; p < peaks.t.size(); ++p) ss += (peaks.t[p] - peaks.mu[p]) * (peaks.t[p] - peaks.mu[p]);
    n += peaks.t.size();
  }
  state.noise_var = rng.inverse_gamma(cfg.noise_prior.shape + 0.5 * static_cast<double>(n), cfg.noise_prior.rate + 0.5 * ss);
}

void sample_smoothing(const ModelData& data, AlignmentState& state, const ModelConfig& cfg, Rng& rng) {
  for (std::size_t g = 0; g < data.gels.size(); ++g) {
    const auto& id = data.gels[g].beta_id;
    auto& gs = state.gels[g];
    const int rows = static_cast<int>(gs.beta.rows());
    const int cols = static_cast<int>(gs.beta.cols());
    double ss = 0.0;
    for (int s = 1; s <= rows - 2; ++s) {
      const double inc = (gs.beta(s, 0) - id(s)) - (gs.beta(s - 1, 0) - id(s - 1));
      ss += inc * inc;
    }
    gs.horizontal_var = rng.inverse_gamma(cfg.horizontal_prior.shape + 0.5 * (rows - 2), cfg.horizontal_prior.rate + 0.5 * ss);
    for (int s = 1; s <= rows - 2; ++s) {
      double vs = 0.0;
      for (int t = 1; t < cols; ++t) vs += (gs.beta(s, t) - gs.beta(s, t - 1)) * (gs.beta(s, t) - gs.beta(s, t - 1));
      gs.vertical_var[static_cast<std::size_t>(s)] =
          rng.inverse_gamma(cfg.vertical_prior.shape + 0.5 * (cols - 1), cfg.vertical_prior.rate + 0.5 * vs);
    }
  }
}

void sample_tau(AlignmentState& state, const ModelConfig& cfg, Rng& rng) {
  double ss = 0.0;
  for (double v : state.lambda) ss += v * v;
  state.tau = rng.inverse_gamma(cfg.tau_prior.shape + 0.5 * static_cast<double>(state.lambda.size()), cfg.tau_prior.rate + 0.5 * ss);
}

int sample_lambda(const ModelData& data, AlignmentState& state, const ModelConfig& cfg, Rng& rng) {
  const int L = data.landmarks();
  std::vector<double> counts(static_cast<std::size_t>(L), 0.0);
  double peaks = 0.0;
  for (const auto& gel : state.z)
    for (const auto& lane : gel)
      for (int z : lane) {
        counts[static_cast<std::size_t>(z) - 1] += 1.0;
        peaks += 1.0;
      }
  double total = std::accumulate(state.lambda.begin(), state.lambda.end(), 0.0);
  int accepted = 0;
  for (std::size_t l = 0; l < state.lambda.size(); ++l) {
    const double old = state.lambda[l];
    const double step = cfg.lambda_step * rng.normal();
    const double proposal = old * std::exp(step);
    const double new_total = total - old + proposal;
    // Target on log(lambda): counts * log lambda - P log(sum) - lambda^2 / (2 tau) + log lambda.
    const double log_ratio = (counts[l] + 1.0) * step - peaks * (std::log(new_total) - std::log(total)) -
                             (proposal * proposal - old * old) / (2.0 * state.tau);
    if (std::log(rng.uniform()) < log_ratio && proposal > 0.0 && std::isfinite(proposal)) {
      state.lambda[l] = proposal;
      total = new_total;
      ++accepted;
    }
  }
  return accepted;
}

void sample_hyper(const ModelData& data, AlignmentState& state, const ModelConfig& cfg, Rng& rng) {
  sample_noise(data, state, cfg, rng);
  sample_smoothing(data, state, cfg, rng);
  sample_tau(state, cfg, rng);
  sample_lambda(data, state, cfg, rng);
}

PosteriorSummary summarize(const ModelData& data, std::span<const SavedState> chain) {
  PosteriorSummary out;
  const int L = data.landmarks();
  const auto offsets = lane_offsets(data);
  const std::size_t P = offsets.back();
  const std::size_t lanes = offsets.size() - 1;
  if (chain.empty()) throw Error("cannot summarize an empty chain");
  const double K = static_cast<double>(chain.size());

  for (std::size_t g = 0; g < data.gels.size(); ++g) {
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(chain.front().beta[g].rows(), chain.front().beta[g].cols());
    for (const auto& s : chain) mean += s.beta[g];
    out.beta_mean.push_back(mean / K);
  }
  out.z_marginals.assign(P, std::vector<double>(static_cast<std::size_t>(L), 0.0));
  out.landmark_prob.assign(lanes, std::vector<double>(static_cast<std::size_t>(L), 0.0));
  out.presence.assign(static_cast<std::size_t>(L), 0.0);
  out.lambda_star_mean.assign(static_cast<std::size_t>(L), 0.0);
  for (const auto& s : chain) {
    for (std::size_t p = 0; p < P; ++p) out.z_marginals[p][static_cast<std::size_t>(s.z[p]) - 1] += 1.0 / K;
    for (std::size_t i = 0; i < lanes; ++i) {
      std::vector<char> hit(static_cast<std::size_t>(L), 0);
      for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) hit[static_cast<std::size_t>(s.z[p]) - 1] = 1;
      for (std::size_t l = 0; l < hit.size(); ++l)
        if (hit[l]) out.landmark_prob[i][l] += 1.0 / K;
    }
    const double total = std::accumulate(s.lambda.begin(), s.lambda.end(), 0.0);
    for (std::size_t l = 0; l < s.lambda.size(); ++l) {
      const double ls = s.lambda[l] / total;
      out.lambda_star_mean[l] += ls / K;
      out.presence[l] += (1.0 - std::exp(-ls)) / K;
    }
  }
  for (const auto& probs : out.z_marginals)
    out.z_map.push_back(static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()) + 1);
  return out;
}

McmcResult run_mcmc(const PeakTable& peaks, const ModelConfig& cfg) { return run_mcmc(prepare_model(peaks, cfg), cfg); }

McmcResult run_mcmc(ModelData data, const ModelConfig& cfg, std::optional<AlignmentState> start, StateObserver observer,
                    void* observer_ctx) {
  cfg.validate();
  const AlignmentState first = start ? std::move(*start) : initial_state(data, cfg);
  if (!std::isfinite(log_joint(data, first, cfg))) {
    auto why = state_violation(data, first);
    throw Error("non-finite log joint at initialization: " + (why.empty() ? std::string("numerical overflow") : why));
  }

  McmcResult result;
  result.warnings = data.warnings;
  const double spacing = data.grid.spacing() / data.location.scale();
  const int anneal_sweeps = cfg.anneal_spacings > 0.0 ? cfg.burn_in / 2 : 0;
  struct Counts {
    long accepted = 0;
    long proposed = 0;
  };
  auto sweep = [&](AlignmentState& state, Rng& rng, int k, Counts& counts) {
    if (cfg.update_z) sample_z(data, state, rng);
    if (cfg.update_beta) sample_beta(data, state, rng);
    if (cfg.update_hyper) {
      if (k < anneal_sweeps)
        state.noise_var = anneal_variance(cfg, spacing, k, anneal_sweeps);
      else
        sample_noise(data, state, cfg, rng);
      sample_smoothing(data, state, cfg, rng);
      sample_tau(state, cfg, rng);
      counts.accepted += sample_lambda(data, state, cfg, rng);
      counts.proposed += data.landmarks();
    }
    if (observer) observer(data, state, observer_ctx);
  };

  // Burn-in of every pilot chain; the one with the highest mean log joint
  // over its last quarter of burn-in continues.
  const auto pilots = static_cast<std::size_t>(start ? 1 : cfg.pilot_chains);
  std::vector<AlignmentState> states(pilots, first);
  std::vector<Rng> rngs;
  for (std::size_t c = 0; c < pilots; ++c) rngs.emplace_back(cfg.seed + c * 0x9E3779B97F4A7C15ULL);
  std::vector<double> scores(pilots, 0.0);
  std::vector<Counts> counts(pilots);
  parallel_for(pilots, observer ? 1u : cfg.threads, [&](std::size_t c) {
    int scored = 0;
    for (int k = 0; k < cfg.burn_in; ++k) {
      sweep(states[c], rngs[c], k, counts[c]);
      if (pilots > 1 && k >= cfg.burn_in - std::max(1, cfg.burn_in / 4)) {
        scores[c] += log_joint(data, states[c], cfg);
        ++scored;
      }
    }
    if (scored > 0) scores[c] /= scored;
  });
  const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  Counts total;
  for (const auto& c : counts) {
    total.accepted += c.accepted;
    total.proposed += c.proposed;
  }

  AlignmentState state = std::move(states[best]);
  Rng rng = rngs[best];
  for (int k = 0; k < cfg.saved * cfg.thin; ++k) {
    sweep(state, rng, cfg.burn_in + k, total);
    if ((k + 1) % cfg.thin != 0) continue;
    SavedState saved;
    saved.z = state.flat_z();
    for (const auto& gs : state.gels) saved.beta.push_back(gs.beta);
    saved.lambda = state.lambda;
    saved.tau = state.tau;
    saved.noise_var = state.noise_var;
    saved.log_joint = log_joint(data, state, cfg);
    result.chain.push_back(std::move(saved));
  }
  result.lambda_acceptance = total.proposed > 0 ? static_cast<double>(total.accepted) / total.proposed : 0.0;
  result.summary = summarize(data, result.chain);
  result.data = std::move(data);
  return result;
}

bool stationary_window(std::span<const double> trace) {
  const std::size_t n = trace.size();
  if (n < 16) return true;
  // Batch-means standard error of a segment, robust to autocorrelation.
  auto mean_se = [](std::span<const double> seg) {
    const std::size_t batches = std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(static_cast<double>(seg.size()))));
    const std::size_t size = seg.size() / batches;
    std::vector<double> means;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto part = seg.subspan(b * size, size);
      means.push_back(std::accumulate(part.begin(), part.end(), 0.0) / static_cast<double>(size));
    }
    const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
    double ss = 0.0;
    for (double v : means) ss += (v - m) * (v - m);
    return std::pair{m, std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches))};
  };
  const auto q3 = trace.subspan(n / 2, n / 4);
  const auto q4 = trace.subspan(n / 2 + n / 4);
  auto [m3, se3] = mean_se(q3);
  auto [m4, se4] = mean_se(q4);
  return std::abs(m3 - m4) <= 2.0 * std::sqrt(se3 * se3 + se4 * se4);
}

NewGelResult align_new_gel(const PeakTable& new_peaks, std::span<const std::vector<double>> lambda_samples,
                           const ModelConfig& cfg, const NewGelConfig& new_cfg, std::optional<Standardizer> lane_standardizer) {
  if (lambda_samples.empty()) throw Error("no stored lambda samples");
  NewGelResult result;
  result.data = prepare_model(new_peaks, cfg, lane_standardizer);
  const auto& data = result.data;
  if (data.gels.size() != 1) throw Error("new-gel alignment expects peaks from exactly one gel");
  const auto L = static_cast<std::size_t>(data.landmarks());
  for (const auto& sample : lambda_samples)
    if (sample.size() != L) throw Error("stored lambda sample has wrong length");

  const std::size_t budget = std::clamp<std::size_t>(new_cfg.lambda_budget, 1, lambda_samples.size());
  Rng rng(cfg.seed);
  AlignmentState state = initial_state(data, cfg);
  state.lambda = lambda_samples[0];
  const double spacing = data.grid.spacing() / data.location.scale();
  const int anneal_sweeps = cfg.anneal_spacings > 0.0 ? new_cfg.burn_in / 2 : 0;
  auto sweep = [&](bool annealing, int k) {
    sample_z(data, state, rng);
    sample_beta(data, state, rng);
    if (annealing)
      state.noise_var = anneal_variance(cfg, spacing, k, anneal_sweeps);
    else
      sample_noise(data, state, cfg, rng);
    sample_smoothing(data, state, cfg, rng);
  };
  for (int k = 0; k < new_cfg.burn_in; ++k) sweep(k < anneal_sweeps, k);

  std::vector<SavedState> kept;
  for (std::size_t b = 0; b < budget; ++b) {
    state.lambda = lambda_samples[b * lambda_samples.size() / budget];
    for (int k = 0; k < new_cfg.sweeps_per_draw; ++k) {
      sweep(false, 0);
      if (k >= new_cfg.sweeps_per_draw - new_cfg.saved_per_draw) {
        SavedState s;
        s.z = state.flat_z();
        s.beta.push_back(state.gels[0].beta);
        s.lambda = state.lambda;
        kept.push_back(std::move(s));
      }
    }
  }
  auto summary = summarize(data, kept);
  result.beta_mean = summary.beta_mean[0];
  result.z_marginals = std::move(summary.z_marginals);
  result.z_map = std::move(summary.z_map);
  return result;
}

SignatureMatrix signatures(const std::vector<std::vector<int>>& lane_z, int landmarks) {
  SignatureMatrix y(lane_z.size(), std::vector<std::uint8_t>(static_cast<std::size_t>(landmarks), 0));
  for (std::size_t i = 0; i < lane_z.size(); ++i)
    for (int z : lane_z[i]) {
      if (z < 1 || z > landmarks) throw Error("landmark index out of range in signature");
      y[i][static_cast<std::size_t>(z) - 1] = 1;
    }
  return y;
}

std::vector<std::vector<int>> lane_assignments(const ModelData& data, std::span<const int> flat) {
  if (flat.size() != data.peak_count()) throw Error("assignment count does not match the model");
  std::vector<std::vector<int>> out;
  std::size_t p = 0;
  for (const auto& gel : data.gels)
    for (const auto& lane : gel.lanes) {
      out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(p),
                       flat.begin() + static_cast<std::ptrdiff_t>(p + lane.t.size()));
      p += lane.t.size();
    }
  return out;
}

std::vector<int> assignments_by_entry(const ModelData& data, std::span<const int> flat, std::size_t entries) {
  if (flat.size() != data.peak_count()) throw Error("assignment count does not match the model");
  std::vector<int> out(entries, 0);
  std::size_t p = 0;
  for (const auto& gel : data.gels)
    for (const auto& lane : gel.lanes)
      for (std::size_t e : lane.entry) out.at(e) = flat[p++];
  return out;
}

}  // namespace gelwarp
