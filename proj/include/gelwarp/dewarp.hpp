#pragma once

/// \file
/// Hierarchical Bayesian dewarping of detected peaks.
///
/// Each peak location T on lane u of gel g is matched to a landmark Z and
/// modelled as Normal(S_g(nu_Z, u), noise_var) inside the window
/// |T - nu_Z| < A0. Landmark indicators share intensities lambda across all
/// gels (lambda* = lambda / sum(lambda)); the warp coefficients follow
/// truncated random-walk priors that shrink towards the identity along nu and
/// towards a common warp along u. Inference is by MCMC.
///
/// Locations, landmarks and lane numbers are standardized before fitting:
/// locations and landmarks share one transform fitted on the landmark grid so
/// that the boundary constraint S(nu_0) = nu_0 keeps its meaning.

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gelwarp/core.hpp"
#include "gelwarp/peakdetect.hpp"
#include "gelwarp/random.hpp"
#include "gelwarp/spline.hpp"

namespace gelwarp {

struct InvGammaPrior {
  double shape = 0.01;
  double rate = 0.01;
};

struct ModelConfig {
  int landmarks = 100;  ///< L
  int t_nu = 10;
  int t_u = 6;
  double window = 0.0;  ///< A0 in raw [0,1] units; <= 0 selects 3 / (L + 1)
  int burn_in = 2000;
  int saved = 5000;
  int thin = 1;
  InvGammaPrior noise_prior{0.01, 0.01};
  InvGammaPrior horizontal_prior{1.0, 1e-4};
  InvGammaPrior vertical_prior{0.01, 0.01};
  InvGammaPrior tau_prior{1e-4, 1e-4};
  double lambda_step = 0.5;  ///< random-walk step on log(lambda)
  /// Burn-in only: over the first half of burn-in the noise standard
  /// deviation is held at a schedule falling geometrically from this many
  /// landmark spacings to a tenth of a spacing. 0 disables.
  double anneal_spacings = 1.0;
  /// Independent burn-ins started from the same state; the chain with the
  /// highest mean log joint over its last quarter of burn-in is continued.
  int pilot_chains = 4;
  /// Workers for the pilot chains; results do not depend on it.
  unsigned threads = 1;
  std::uint64_t seed = 1;
  bool update_z = true;
  bool update_beta = true;
  bool update_hyper = true;

  double window_raw() const { return window > 0.0 ? window : 3.0 / (landmarks + 1); }
  void validate() const;
};

/// Nonzero cubic basis values at one point.
struct BasisRow {
  int first = 0;
  std::array<double, 4> w{};
};

/// Peaks of one lane, in standardized units.
struct ModelLane {
  std::string gel_id;
  int lane = 0;
  double u = 0.0;
  std::vector<double> t;
  std::vector<std::size_t> entry;  ///< index into the source PeakTable
  BasisRow u_row;
};

struct ModelGel {
  std::string gel_id;
  std::vector<ModelLane> lanes;
  BSplineBasis nu_basis;
  BSplineBasis u_basis;
  Eigen::VectorXd beta_id;
  std::vector<BasisRow> nu_rows;  ///< basis at nu_0 .. nu_{L+1}
  std::size_t peak_count() const;
};

/// Standardized, validated model input.
struct ModelData {
  LandmarkGrid grid{1};
  Standardizer location;  ///< shared by peak locations and landmarks
  Standardizer lane;
  std::vector<double> nu;  ///< standardized landmarks nu_0 .. nu_{L+1}
  double window = 0.0;     ///< A0 in standardized units
  std::vector<ModelGel> gels;
  std::vector<std::string> warnings;

  int landmarks() const { return grid.interior_count(); }
  std::size_t peak_count() const;
  WarpField warp(std::size_t g, const Eigen::MatrixXd& beta) const;
};

/// Builds model input from peaks of sample lanes. `lane_standardizer` is
/// reused when aligning a new gel against a trained model.
ModelData prepare_model(const PeakTable& peaks, const ModelConfig& cfg,
                        std::optional<Standardizer> lane_standardizer = std::nullopt);

struct GelState {
  Eigen::MatrixXd beta;                  ///< T_nu x T_u
  double horizontal_var = 0.01;          ///< sigma_g1^2
  std::vector<double> vertical_var;      ///< sigma_gs^2, indexed by row s (0-based); rows 1..T_nu-2 used
};

struct AlignmentState {
  std::vector<std::vector<std::vector<int>>> z;  ///< [gel][lane][peak], landmarks 1..L
  std::vector<double> lambda;                    ///< positive landmark intensities, size L
  double tau = 1.0;
  double noise_var = 0.01;  ///< sigma_eps^2
  std::vector<GelState> gels;

  std::vector<double> lambda_star() const;
  /// Assignments flattened in gel, lane, peak order.
  std::vector<int> flat_z() const;
};

/// Feasible starting point: identity warps, nearest admissible landmarks,
/// uniform lambda and small variances. Throws naming the lane if some lane
/// cannot be assigned inside the window.
AlignmentState initial_state(const ModelData& data, const ModelConfig& cfg);

/// log phi(t; S(nu_z, u), sd) if |t - nu_z| < window and t > prev_t, else -inf.
double log_likelihood_peak(double t, double nu_z, const WarpField& field, double u, double noise_sd, double prev_t,
                           double window);

struct LogJointTerms {
  double likelihood = 0.0;
  double z_prior = 0.0;
  double beta_prior = 0.0;
  double hyper_prior = 0.0;
  double total() const { return likelihood + z_prior + beta_prior + hyper_prior; }
};

LogJointTerms log_joint_terms(const ModelData& data, const AlignmentState& state, const ModelConfig& cfg);
double log_joint(const ModelData& data, const AlignmentState& state, const ModelConfig& cfg);
/// First violated constraint of a state, empty if it is valid.
std::string state_violation(const ModelData& data, const AlignmentState& state);

/// Probabilities of Z = 1..L for one peak given every other unknown,
/// including the neighbouring assignments in its lane.
std::vector<double> assignment_conditional(const ModelData& data, const AlignmentState& state, std::size_t gel,
                                           std::size_t lane, std::size_t peak);

/// log of the sum, over every admissible increasing assignment of the lane,
/// of prod_j phi(T_j; S(nu_{Z_j}, u), sd) * lambda*_{Z_j}.
double lane_log_evidence(const ModelData& data, const AlignmentState& state, std::size_t gel, std::size_t lane);

void sample_z(const ModelData& data, AlignmentState& state, Rng& rng);
void sample_beta(const ModelData& data, AlignmentState& state, Rng& rng);
void sample_noise(const ModelData& data, AlignmentState& state, const ModelConfig& cfg, Rng& rng);
void sample_smoothing(const ModelData& data, AlignmentState& state, const ModelConfig& cfg, Rng& rng);
void sample_tau(AlignmentState& state, const ModelConfig& cfg, Rng& rng);
/// Random-walk Metropolis on log(lambda_l), one landmark at a time.
/// Returns the number of accepted proposals.
int sample_lambda(const ModelData& data, AlignmentState& state, const ModelConfig& cfg, Rng& rng);
/// All hyperparameter updates: noise, smoothing variances, tau, lambda.
void sample_hyper(const ModelData& data, AlignmentState& state, const ModelConfig& cfg, Rng& rng);

/// Conditional posterior mean and standard deviation of one free warp
/// coefficient (untruncated), and its truncation bounds.
struct CoefficientConditional {
  double mean = 0.0;
  double sd = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};
CoefficientConditional beta_conditional(const ModelData& data, const AlignmentState& state, std::size_t gel, int row,
                                        int col);

struct SavedState {
  std::vector<int> z;  ///< flattened
  std::vector<Eigen::MatrixXd> beta;
  std::vector<double> lambda;
  double tau = 0.0;
  double noise_var = 0.0;
  double log_joint = 0.0;
};

struct PosteriorSummary {
  std::vector<Eigen::MatrixXd> beta_mean;               ///< per gel
  std::vector<std::vector<double>> z_marginals;         ///< per flattened peak, L entries
  std::vector<int> z_map;                               ///< per flattened peak
  std::vector<std::vector<double>> landmark_prob;       ///< per lane (gel, lane order), L entries
  std::vector<double> presence;                         ///< mean of 1 - exp(-lambda*_l)
  std::vector<double> lambda_star_mean;
};

struct McmcResult {
  ModelData data;
  std::vector<SavedState> chain;
  PosteriorSummary summary;
  std::vector<std::string> warnings;
  double lambda_acceptance = 0.0;
};

/// Summaries over a set of saved states.
PosteriorSummary summarize(const ModelData& data, std::span<const SavedState> chain);

/// Full sampler. Deterministic given cfg.seed. `observer`, when set, sees
/// every post-initialization state of every pilot chain (used to audit
/// constraints). A supplied `start` disables pilot chains.
using StateObserver = void (*)(const ModelData&, const AlignmentState&, void*);
McmcResult run_mcmc(const PeakTable& peaks, const ModelConfig& cfg);
McmcResult run_mcmc(ModelData data, const ModelConfig& cfg, std::optional<AlignmentState> start = std::nullopt,
                    StateObserver observer = nullptr, void* observer_ctx = nullptr);

/// Stationarity check on a trace: the means of its third and fourth quarters
/// differ by at most two pooled standard errors.
bool stationary_window(std::span<const double> trace);

struct NewGelConfig {
  std::size_t lambda_budget = 100;  ///< stored lambda draws used, evenly spaced
  int burn_in = 500;                ///< initial sweeps before the first draw
  int sweeps_per_draw = 10;         ///< sweeps run under each lambda draw
  int saved_per_draw = 5;           ///< of which the last ones are kept
};

struct NewGelResult {
  ModelData data;
  Eigen::MatrixXd beta_mean;
  std::vector<std::vector<double>> z_marginals;
  std::vector<int> z_map;
};

/// Posterior of (beta, Z) for one new gel, averaging one-gel conditional
/// chains over stored posterior draws of lambda.
NewGelResult align_new_gel(const PeakTable& new_peaks, std::span<const std::vector<double>> lambda_samples,
                           const ModelConfig& cfg, const NewGelConfig& new_cfg,
                           std::optional<Standardizer> lane_standardizer = std::nullopt);

/// N x L indicator matrix: Y[i][l-1] = 1 iff some peak of lane i is at l.
using SignatureMatrix = std::vector<std::vector<std::uint8_t>>;
SignatureMatrix signatures(const std::vector<std::vector<int>>& lane_z, int landmarks);

/// Splits flattened assignments into per-lane lists (gel, lane order).
std::vector<std::vector<int>> lane_assignments(const ModelData& data, std::span<const int> flat);
/// Reorders flattened assignments to follow the source PeakTable; entries
/// not in the model get 0.
std::vector<int> assignments_by_entry(const ModelData& data, std::span<const int> flat, std::size_t entries);

}  // namespace gelwarp
