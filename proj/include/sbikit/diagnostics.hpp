#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sbikit/distributions.hpp"
#include "sbikit/simgym.hpp"

namespace sbikit::diag {

/// Simulation-based calibration ranks with per-dimension uniformity
/// p-values (Kolmogorov-Smirnov against the discrete uniform on {0..L},
/// continuity-corrected, asymptotic p-value).
struct SbcResult {
  Eigen::MatrixXi ranks;  // [completed x theta_dim], each in {0..L}
  int posterior_draws = 0;
  VectorXd p_values;
  int requested = 0;
  int completed = 0;
  int skipped = 0;

  bool pass(double alpha = 0.01) const { return p_values.minCoeff() > alpha; }
  std::string to_json_string(double alpha = 0.01, int indent = -1) const;
};

using PosteriorSampler =
    std::function<MatrixXd(const VectorXd& x, int n_draws, Rng& rng)>;

SbcResult run_sbc(const Distribution& prior, const Simulator& sim,
                  const PosteriorSampler& posterior_fn, int trials,
                  int draws_per_trial, std::uint64_t seed);

/// Expected-coverage curve on the grid {0, 0.05, ..., 0.95, 1}; the
/// endpoints are pinned to 0 and 1 (empty and full credible regions).
struct CoverageCurve {
  VectorXd alphas;
  VectorXd ecp;
  int cases = 0;
  double max_abs_dev = 0.0;

  bool pass(double tol = 0.05) const { return max_abs_dev <= tol; }
  std::string to_json_string(double tol, int indent = -1) const;
};

/// TARP: per-case credibility f_i = fraction of posterior samples closer
/// to a random reference point than the true parameter; ECP(alpha) =
/// fraction of cases with f_i < alpha. The default reference distribution
/// is uniform over the axis-aligned bounding box of each case's samples.
CoverageCurve run_tarp(const MatrixXd& theta_star,
                       const std::vector<MatrixXd>& posterior_samples,
                       std::uint64_t seed);
CoverageCurve run_tarp_with_reference(const MatrixXd& theta_star,
                                      const std::vector<MatrixXd>& posterior_samples,
                                      const Distribution& reference,
                                      std::uint64_t seed);

/// log q(theta | x_case) for the density-rank coverage variant.
using CaseLogDensityFn = std::function<double(const VectorXd& theta, int case_idx)>;

/// Density-rank expected coverage for estimators with evaluable densities:
/// credibility of theta* = fraction of posterior samples with higher
/// density; ECP(alpha) = fraction of cases with credibility <= alpha.
CoverageCurve expected_coverage_rank(const MatrixXd& theta_star,
                                     const CaseLogDensityFn& log_q,
                                     const std::vector<MatrixXd>& posterior_samples);

/// Classifier two-sample test: cross-validated held-out accuracy of a
/// small MLP on z-scored pooled samples. 0.5 = indistinguishable.
struct C2stResult {
  double accuracy = 0.0;
  int folds = 0;
  int n_per_side = 0;

  std::string to_json_string(int indent = -1) const;
};

C2stResult c2st(const MatrixXd& samples_p, const MatrixXd& samples_q,
                int folds, std::uint64_t seed);

// Kolmogorov-Smirnov helpers (exposed for tests and the CLI report).
double ks_statistic_uniform01(std::vector<double> values);
double ks_pvalue(double statistic, int n);

}  // namespace sbikit::diag
