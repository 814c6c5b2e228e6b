#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sbikit/common.hpp"
#include "sbikit/distributions.hpp"

namespace sbikit::smp {

/// Unnormalized log-density with vectorized evaluation: one call maps a
/// [m x dim] matrix of points to m log-density values (finite or -inf,
/// never NaN).
struct LogDensityTarget {
  std::function<VectorXd(const MatrixXd&)> log_prob_rows;
  int dim = 0;
  std::optional<std::pair<VectorXd, VectorXd>> support_box;
};

LogDensityTarget target_from_distribution(const Distribution& d);

enum class McmcInit { kPriorDraw, kResampleBest };

struct McmcConfig {
  int chains = 20;
  int warmup = 200;
  int thinning = 1;
  double proposal_scale = 0.5;  // adapted toward 0.234 acceptance in warmup
  McmcInit init = McmcInit::kResampleBest;
  int init_candidates = 1024;
};

struct McmcDiagnostics {
  VectorXd acceptance_per_chain;      // post-warmup
  VectorXd rhat;                      // split R-hat per dimension
  VectorXd ess;                       // per dimension
  std::vector<double> scale_trace;    // proposal scale at every step
  double final_scale = 0.0;
  std::uint64_t seed = 0;
  McmcConfig config;

  std::string to_json_string(int indent = -1) const;
};

/// Metropolis acceptance rule; log_u is log of a uniform(0,1) draw.
bool mh_accept(double log_p_new, double log_p_old, double log_u);

/// Random-walk Metropolis with all chains advanced in lockstep: one
/// batched target evaluation per step covers every chain. Post-warmup
/// draws are pooled round-robin across chains.
MatrixXd mh_sample(const LogDensityTarget& target, const Distribution& init,
                   const McmcConfig& cfg, int n, Rng& rng,
                   McmcDiagnostics* diag = nullptr);

/// Axis-wise slice sampler with stepping-out (initial width 1.0, at most
/// 50 expansions per side). Same pooling and diagnostics as mh_sample.
MatrixXd slice_sample(const LogDensityTarget& target, const Distribution& init,
                      const McmcConfig& cfg, int n, Rng& rng,
                      McmcDiagnostics* diag = nullptr);

struct RejectionResult {
  MatrixXd samples;
  double acceptance_rate = 0.0;
};

/// Exact rejection sampling; caller asserts log p(theta) <= log_m +
/// log q_proposal(theta) everywhere.
RejectionResult rejection_sample(const LogDensityTarget& target,
                                 const Distribution& proposal, double log_m,
                                 int n, Rng& rng);

struct ImportanceResult {
  MatrixXd samples;
  VectorXd weights;  // self-normalized, sum to 1
  double ess = 0.0;  // (sum w)^2 / sum w^2
};

ImportanceResult importance_sample(const LogDensityTarget& target,
                                   const Distribution& proposal, int n, Rng& rng);

/// Split R-hat per dimension over per-chain draw matrices [draws x dim].
VectorXd split_rhat(const std::vector<MatrixXd>& chains);

/// Effective sample size per dimension (initial-positive-sequence
/// truncated autocorrelation, averaged over chains).
VectorXd effective_sample_size(const std::vector<MatrixXd>& chains);

}  // namespace sbikit::smp
