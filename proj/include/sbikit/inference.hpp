#pragma once

#include <functional>
#include <optional>
#include <variant>

#include "sbikit/distributions.hpp"
#include "sbikit/estimators.hpp"
#include "sbikit/samplers.hpp"
#include "sbikit/simgym.hpp"

namespace sbikit::inf {

enum class MethodKind { kNpe, kNle, kNre };
enum class EstimatorFamily { kMdn, kMaf };

std::string to_string(MethodKind k);
MethodKind method_kind_from_string(const std::string& s);
std::string to_string(EstimatorFamily f);
EstimatorFamily estimator_family_from_string(const std::string& s);

/// One inference method: the estimator role is fixed by `kind` (NPE models
/// theta given x, NLE models x given theta, NRE scores (theta, x) pairs).
struct MethodConfig {
  MethodKind kind;
  Distribution prior;
  EstimatorFamily family = EstimatorFamily::kMdn;
  est::MdnConfig mdn;
  est::MafConfig maf;
  est::ClassifierConfig classifier;
  est::EmbeddingConfig embedding;
  nn::TrainConfig train;

  MethodConfig(MethodKind kind_, Distribution prior_)
      : kind(kind_), prior(std::move(prior_)) {}
};

struct TrainedEstimator {
  MethodKind method = MethodKind::kNpe;
  std::variant<est::MdnEstimator, est::MafEstimator, est::RatioClassifier> model;

  bool is_density() const {
    return !std::holds_alternative<est::RatioClassifier>(model);
  }
  bool permutation_invariant_embedding() const;

  /// Density estimators: log q(target | x_obs) per target row.
  VectorXd log_prob_obs(const MatrixXd& targets, const MatrixXd& x_obs) const;
  /// Density estimators: paired rows log q(target_i | cond_i).
  VectorXd log_prob(const MatrixXd& targets, const MatrixXd& conditions) const;
  MatrixXd sample_obs(const MatrixXd& x_obs, int n, Rng& rng) const;
  /// Classifier: logit per theta row against one observation row.
  VectorXd logit_obs(const MatrixXd& thetas, const MatrixXd& x_obs) const;
};

/// Trains the method's estimator on a pre-filtered batch (NPE: -mean log
/// q(theta|x); NLE: -mean log q(x|theta); NRE: contrastive classifier
/// loss). Standardizers are fitted on the batch before training.
TrainedEstimator train_amortized(const MethodConfig& m, const SimulationBatch& batch,
                                 nn::TrainTrace* trace = nullptr);

/// Sampleable posterior bundling estimator, prior, observation(s) and a
/// sampling strategy. Immutable; sampling uses caller-provided generators.
class Posterior {
 public:
  enum class Strategy { kDirectRejection, kMcmc };

  Posterior(MethodKind method, TrainedEstimator estimator, Distribution prior,
            MatrixXd x_obs, smp::McmcConfig mcmc);

  MethodKind method() const { return method_; }
  Strategy strategy() const {
    return method_ == MethodKind::kNpe ? Strategy::kDirectRejection
                                       : Strategy::kMcmc;
  }
  const Distribution& prior() const { return prior_; }
  const MatrixXd& observations() const { return x_obs_; }
  const TrainedEstimator& estimator() const { return estimator_; }
  const smp::McmcConfig& mcmc_config() const { return mcmc_; }

  /// NPE: direct draws from the estimator with prior-support rejection
  /// (at most 1e6 proposals per requested batch). NLE/NRE: random-walk
  /// MCMC on the unnormalized target.
  MatrixXd sample(int n, Rng& rng, smp::McmcDiagnostics* diag = nullptr) const;

  /// Unnormalized posterior log-density. NLE: sum_j log q(x_oj|theta) +
  /// log p(theta); NRE: sum_j logit(theta, x_oj) + log p(theta); NPE: the
  /// estimator's log q(theta|x_obs) (the density that direct sampling
  /// draws from, before support rejection).
  VectorXd log_target_rows(const MatrixXd& thetas) const;
  double log_target(const VectorXd& theta) const;

  smp::LogDensityTarget as_target() const;

 private:
  MethodKind method_;
  TrainedEstimator estimator_;
  Distribution prior_;
  MatrixXd x_obs_;
  smp::McmcConfig mcmc_;
};

/// Binds a trained estimator to one observation (or a set of i.i.d. rows;
/// these compose by summation for NLE/NRE and require a
/// permutation-invariant embedding for NPE).
Posterior build_posterior(const MethodConfig& m, const TrainedEstimator& estimator,
                          const MatrixXd& x_obs,
                          const smp::McmcConfig& mcmc = {});

struct SequentialResult {
  TrainedEstimator estimator;
  std::optional<Posterior> posterior;
  std::vector<SimulationBatch> round_batches;  // filtered per-round batches
  SimulationBatch accumulated;                 // training set of the last round
  std::vector<std::uint64_t> round_sim_seeds;
  std::vector<std::uint64_t> round_train_seeds;
};

/// Multi-round inference focused on one observation. Round 1 draws
/// parameters from the prior (and is bit-identical to the amortized
/// pipeline under equal seeds); later rounds draw from the current
/// posterior (NLE/NRE, losses are proposal-agnostic) or from the prior
/// truncated to the region where the current posterior density exceeds
/// the 5e-4 quantile of its own sample densities (NPE).
SequentialResult run_sequential(const MethodConfig& m, const Simulator& sim,
                                const MatrixXd& x_obs, int rounds,
                                int sims_per_round, std::uint64_t seed,
                                int workers = 1,
                                const smp::McmcConfig& mcmc = {});

/// JSON run record: method, rounds, per-round seeds and row counts, plus
/// caller-supplied artifact references. Enough to replay a run exactly.
std::string sequential_manifest_json(
    const SequentialResult& result, const MethodConfig& m,
    const std::vector<std::string>& batch_refs = {},
    const std::string& checkpoint_ref = "");

struct CorrectionResult {
  MatrixXd samples;
  VectorXd weights;  // self-normalized
  double ess = 0.0;
};

using LogLikelihoodFn = std::function<double(const VectorXd& theta)>;

/// Importance-sampling correction of an NPE posterior when the likelihood
/// is evaluable: draws theta ~ q(.|x_obs), weights by
/// exp(log lik + log prior - log q), self-normalizes, reports ESS.
CorrectionResult importance_correct(const Posterior& posterior,
                                    const LogLikelihoodFn& log_likelihood, int n,
                                    Rng& rng);

/// Same correction with an explicit proposal density q (oracle testing).
CorrectionResult importance_correct_with_q(const Distribution& q,
                                           const LogLikelihoodFn& log_likelihood,
                                           const Distribution& prior, int n,
                                           Rng& rng);

}  // namespace sbikit::inf
