#include "sbikit/inference.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace sbikit::inf {

using nlohmann::json;

std::string to_string(MethodKind k) {
  switch (k) {
    case MethodKind::kNpe: return "npe";
    case MethodKind::kNle: return "nle";
    case MethodKind::kNre: return "nre";
  }
  throw std::logic_error("unreachable method kind");
}

MethodKind method_kind_from_string(const std::string& s) {
  if (s == "npe") return MethodKind::kNpe;
  if (s == "nle") return MethodKind::kNle;
  if (s == "nre") return MethodKind::kNre;
  throw ConfigError("unknown method kind: " + s);
}

std::string to_string(EstimatorFamily f) {
  return f == EstimatorFamily::kMdn ? "mdn" : "maf";
}

EstimatorFamily estimator_family_from_string(const std::string& s) {
  if (s == "mdn") return EstimatorFamily::kMdn;
  if (s == "maf") return EstimatorFamily::kMaf;
  throw ConfigError("unknown estimator family: " + s);
}

bool TrainedEstimator::permutation_invariant_embedding() const {
  return std::visit([](const auto& m) { return m.embedding.permutation_invariant(); },
                    model);
}

VectorXd TrainedEstimator::log_prob_obs(const MatrixXd& targets,
                                        const MatrixXd& x_obs) const {
  if (auto* mdn = std::get_if<est::MdnEstimator>(&model))
    return mdn->log_prob_obs(targets, x_obs);
  if (auto* maf = std::get_if<est::MafEstimator>(&model))
    return maf->log_prob_obs(targets, x_obs);
  throw std::invalid_argument("log_prob_obs: estimator has no density");
}

VectorXd TrainedEstimator::log_prob(const MatrixXd& targets,
                                    const MatrixXd& conditions) const {
  if (auto* mdn = std::get_if<est::MdnEstimator>(&model))
    return mdn->log_prob(targets, conditions);
  if (auto* maf = std::get_if<est::MafEstimator>(&model))
    return maf->log_prob(targets, conditions);
  throw std::invalid_argument("log_prob: estimator has no density");
}

MatrixXd TrainedEstimator::sample_obs(const MatrixXd& x_obs, int n,
                                      Rng& rng) const {
  if (auto* mdn = std::get_if<est::MdnEstimator>(&model))
    return mdn->sample_obs(x_obs, n, rng);
  if (auto* maf = std::get_if<est::MafEstimator>(&model))
    return maf->sample_obs(x_obs, n, rng);
  throw std::invalid_argument("sample_obs: estimator has no density");
}

VectorXd TrainedEstimator::logit_obs(const MatrixXd& thetas,
                                     const MatrixXd& x_obs) const {
  if (auto* cl = std::get_if<est::RatioClassifier>(&model))
    return cl->logit_obs(thetas, x_obs);
  throw std::invalid_argument("logit_obs: estimator is not a classifier");
}

TrainedEstimator train_amortized(const MethodConfig& m, const SimulationBatch& batch,
                                 nn::TrainTrace* trace) {
  if (batch.n() < 10)
    throw ConfigError("train_amortized: need >= 10 simulations");
  if (batch.valid_count() != batch.n())
    throw std::invalid_argument(
        "train_amortized: batch contains invalid rows; apply filter_valid first");
  if (batch.theta_dim() != m.prior.dim())
    throw std::invalid_argument("train_amortized: batch theta dim != prior dim");

  const int theta_dim = batch.theta_dim();
  const int x_dim = batch.x_dim();
  const std::uint64_t init_seed = derive_seed(m.train.seed, "estimator-init");

  TrainedEstimator out;
  out.method = m.kind;
  nn::TrainTrace local_trace;
  nn::TrainTrace& tr = trace ? *trace : local_trace;

  switch (m.kind) {
    case MethodKind::kNpe: {
      // density over theta conditioned on x
      if (m.family == EstimatorFamily::kMdn) {
        auto e = est::MdnEstimator::create(theta_dim, x_dim, m.mdn, m.embedding,
                                           init_seed);
        e.target_std = nn::Standardizer::fit(batch.theta);
        e.cond_std = nn::Standardizer::fit(batch.x);
        tr = nn::train(e.params, e.loss_builder(), batch.theta, batch.x, m.train);
        out.model = std::move(e);
      } else {
        auto e = est::MafEstimator::create(theta_dim, x_dim, m.maf, m.embedding,
                                           init_seed);
        e.target_std = nn::Standardizer::fit(batch.theta);
        e.cond_std = nn::Standardizer::fit(batch.x);
        tr = nn::train(e.params, e.loss_builder(), batch.theta, batch.x, m.train);
        out.model = std::move(e);
      }
      break;
    }
    case MethodKind::kNle: {
      // density over x conditioned on theta; trainer still receives
      // (theta, x) in batch order, the loss builder swaps the roles
      if (m.family == EstimatorFamily::kMdn) {
        auto e = est::MdnEstimator::create(x_dim, theta_dim, m.mdn, m.embedding,
                                           init_seed);
        e.target_std = nn::Standardizer::fit(batch.x);
        e.cond_std = nn::Standardizer::fit(batch.theta);
        auto base = e.loss_builder();
        nn::LossBuilder swapped = [base](ad::Tape& tape,
                                         const std::vector<ad::Var>& p,
                                         const MatrixXd& theta_rows,
                                         const MatrixXd& x_rows,
                                         std::uint64_t stream) {
          return base(tape, p, x_rows, theta_rows, stream);
        };
        tr = nn::train(e.params, swapped, batch.theta, batch.x, m.train);
        out.model = std::move(e);
      } else {
        auto e = est::MafEstimator::create(x_dim, theta_dim, m.maf, m.embedding,
                                           init_seed);
        e.target_std = nn::Standardizer::fit(batch.x);
        e.cond_std = nn::Standardizer::fit(batch.theta);
        auto base = e.loss_builder();
        nn::LossBuilder swapped = [base](ad::Tape& tape,
                                         const std::vector<ad::Var>& p,
                                         const MatrixXd& theta_rows,
                                         const MatrixXd& x_rows,
                                         std::uint64_t stream) {
          return base(tape, p, x_rows, theta_rows, stream);
        };
        tr = nn::train(e.params, swapped, batch.theta, batch.x, m.train);
        out.model = std::move(e);
      }
      break;
    }
    case MethodKind::kNre: {
      auto e = est::RatioClassifier::create(theta_dim, x_dim, m.classifier,
                                            m.embedding, init_seed);
      e.theta_std = nn::Standardizer::fit(batch.theta);
      e.x_std = nn::Standardizer::fit(batch.x);
      tr = nn::train(e.params, e.loss_builder(), batch.theta, batch.x, m.train);
      out.model = std::move(e);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Posterior::Posterior(MethodKind method, TrainedEstimator estimator,
                     Distribution prior, MatrixXd x_obs, smp::McmcConfig mcmc)
    : method_(method),
      estimator_(std::move(estimator)),
      prior_(std::move(prior)),
      x_obs_(std::move(x_obs)),
      mcmc_(mcmc) {}

Posterior build_posterior(const MethodConfig& m, const TrainedEstimator& estimator,
                          const MatrixXd& x_obs, const smp::McmcConfig& mcmc) {
  if (x_obs.rows() < 1)
    throw std::invalid_argument("build_posterior: needs >= 1 observation row");
  if (estimator.method != m.kind)
    throw ConfigError("build_posterior: estimator was trained for method " +
                      to_string(estimator.method) + ", not " + to_string(m.kind));
  if (m.kind == MethodKind::kNpe && x_obs.rows() > 1 &&
      !estimator.permutation_invariant_embedding())
    throw ConfigError(
        "build_posterior: NPE with multiple i.i.d. observation rows needs a "
        "permutation-invariant embedding; set embedding kind to \"mean-pool\" "
        "(NLE/NRE compose i.i.d. rows by summation instead)");
  return Posterior(m.kind, estimator, m.prior, x_obs, mcmc);
}

VectorXd Posterior::log_target_rows(const MatrixXd& thetas) const {
  const int n = static_cast<int>(thetas.rows());
  VectorXd prior_lp = prior_.log_prob_rows(thetas);
  switch (method_) {
    case MethodKind::kNpe:
      return estimator_.log_prob_obs(thetas, x_obs_);
    case MethodKind::kNle: {
      VectorXd total = prior_lp;
      for (int j = 0; j < x_obs_.rows(); ++j) {
        MatrixXd x_rep = x_obs_.row(j).replicate(n, 1);
        total += estimator_.log_prob(x_rep, thetas);
      }
      return total;
    }
    case MethodKind::kNre: {
      VectorXd total = prior_lp;
      for (int j = 0; j < x_obs_.rows(); ++j)
        total += estimator_.logit_obs(thetas, x_obs_.row(j));
      return total;
    }
  }
  throw std::logic_error("unreachable");
}

double Posterior::log_target(const VectorXd& theta) const {
  MatrixXd m(1, theta.size());
  m.row(0) = theta.transpose();
  return log_target_rows(m)[0];
}

smp::LogDensityTarget Posterior::as_target() const {
  smp::LogDensityTarget t;
  t.dim = prior_.dim();
  // copy what the closure needs; Posterior may go out of scope first
  Posterior self = *this;
  t.log_prob_rows = [self](const MatrixXd& thetas) {
    VectorXd lp = self.log_target_rows(thetas);
    for (int i = 0; i < lp.size(); ++i)
      if (std::isnan(lp[i])) lp[i] = kNegInf;
    return lp;
  };
  if (prior_.is_uniform_box())
    t.support_box = {{prior_.box_lower(), prior_.box_upper()}};
  return t;
}

MatrixXd Posterior::sample(int n, Rng& rng, smp::McmcDiagnostics* diag) const {
  if (n < 1) throw std::invalid_argument("posterior sample: n must be >= 1");
  if (strategy() == Strategy::kDirectRejection) {
    constexpr long kMaxProposals = 1'000'000;
    MatrixXd out(n, prior_.dim());
    int got = 0;
    long drawn = 0;
    const int chunk = std::max(n, 1024);
    while (got < n) {
      if (drawn >= kMaxProposals)
        throw NumericError(
            "posterior sample: <" + std::to_string(n) + " draws inside the prior "
            "support after 1e6 proposals; the estimator leaks too much mass "
            "outside the prior");
      MatrixXd draws = estimator_.sample_obs(x_obs_, chunk, rng);
      drawn += chunk;
      VectorXd prior_lp = prior_.log_prob_rows(draws);
      for (int i = 0; i < chunk && got < n; ++i)
        if (prior_lp[i] > kNegInf) out.row(got++) = draws.row(i);
    }
    return out;
  }
  return smp::mh_sample(as_target(), prior_, mcmc_, n, rng, diag);
}

// ---------------------------------------------------------------------------
// Sequential mode

namespace {

constexpr double kTruncationQuantile = 5e-4;
constexpr int kTruncationDraws = 4096;

/// Proposal for truncated sequential NPE: prior restricted to the region
/// where the current posterior density exceeds `log_threshold`.
MatrixXd sample_truncated_prior(const Distribution& prior,
                                const TrainedEstimator& estimator,
                                const MatrixXd& x_obs, double log_threshold,
                                int n, Rng& rng) {
  MatrixXd out(n, prior.dim());
  int got = 0;
  long drawn = 0;
  const int chunk = std::max(n, 1024);
  const long min_probe = 200'000;
  while (got < n) {
    MatrixXd draws = prior.sample(chunk, rng);
    VectorXd lq = estimator.log_prob_obs(draws, x_obs);
    drawn += chunk;
    for (int i = 0; i < chunk && got < n; ++i)
      if (lq[i] >= log_threshold) out.row(got++) = draws.row(i);
    double rate = static_cast<double>(got) / drawn;
    if (drawn >= min_probe && rate < 1e-4)
      throw NumericError(
          "sequential NPE: truncated-prior acceptance rate below 1e-4; use more "
          "simulations per round or fewer rounds");
  }
  return out;
}

}  // namespace

SequentialResult run_sequential(const MethodConfig& m, const Simulator& sim,
                                const MatrixXd& x_obs, int rounds,
                                int sims_per_round, std::uint64_t seed, int workers,
                                const smp::McmcConfig& mcmc) {
  if (rounds < 1) throw std::invalid_argument("run_sequential: rounds must be >= 1");
  if (sims_per_round < 1)
    throw std::invalid_argument("run_sequential: sims_per_round must be >= 1");

  SequentialResult result;
  result.accumulated = SimulationBatch::empty(m.prior.dim(), sim.x_dim);
  MethodConfig round_cfg = m;

  for (int r = 0; r < rounds; ++r) {
    const std::uint64_t sim_seed = derive_seed(seed, "round-sim", r);
    const std::uint64_t train_seed = derive_seed(seed, "round-train", r);
    result.round_sim_seeds.push_back(sim_seed);
    result.round_train_seeds.push_back(train_seed);

    SimulationBatch raw;
    if (r == 0) {
      raw = simulate_for_sbi(m.prior, sim, sims_per_round, workers, sim_seed);
    } else {
      Rng prop_rng(derive_seed(seed, "round-proposal", r));
      MatrixXd proposal_thetas;
      if (m.kind == MethodKind::kNpe) {
        // threshold = quantile of the posterior's own sample densities
        MatrixXd post_draws =
            result.posterior->sample(kTruncationDraws, prop_rng);
        VectorXd lq = result.estimator.log_prob_obs(post_draws, x_obs);
        std::vector<double> vals(lq.data(), lq.data() + lq.size());
        std::sort(vals.begin(), vals.end());
        int idx = static_cast<int>(kTruncationQuantile * vals.size());
        double log_threshold = vals[std::min<int>(idx, vals.size() - 1)];
        proposal_thetas = sample_truncated_prior(m.prior, result.estimator, x_obs,
                                                 log_threshold, sims_per_round,
                                                 prop_rng);
      } else {
        proposal_thetas = result.posterior->sample(sims_per_round, prop_rng);
      }
      raw = simulate_at(proposal_thetas, sim, workers, sim_seed);
    }

    SimulationBatch filtered = filter_valid(raw);
    result.round_batches.push_back(filtered);
    result.accumulated = (r == 0) ? filtered : append(result.accumulated, filtered);

    round_cfg.train.seed = train_seed;
    result.estimator = train_amortized(round_cfg, result.accumulated);
    result.posterior = build_posterior(round_cfg, result.estimator, x_obs, mcmc);
  }
  return result;
}

std::string sequential_manifest_json(const SequentialResult& result,
                                     const MethodConfig& m,
                                     const std::vector<std::string>& batch_refs,
                                     const std::string& checkpoint_ref) {
  json rounds = json::array();
  for (size_t r = 0; r < result.round_sim_seeds.size(); ++r) {
    json round{{"round", r},
               {"sim_seed", result.round_sim_seeds[r]},
               {"train_seed", result.round_train_seeds[r]},
               {"n_rows", result.round_batches[r].n()}};
    if (r < batch_refs.size()) round["batch_file"] = batch_refs[r];
    rounds.push_back(round);
  }
  json j{{"method", to_string(m.kind)},
         {"estimator",
          m.kind == MethodKind::kNre ? std::string("ratio-classifier")
                                     : to_string(m.family)},
         {"rounds", rounds},
         {"total_rows", result.accumulated.n()},
         {"prior", json::parse(m.prior.to_json_string())}};
  if (!checkpoint_ref.empty()) j["checkpoint"] = checkpoint_ref;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Importance correction

namespace {

CorrectionResult correct_from_draws(const MatrixXd& draws, const VectorXd& log_q,
                                    const LogLikelihoodFn& log_likelihood,
                                    const Distribution& prior) {
  const int n = static_cast<int>(draws.rows());
  VectorXd log_w(n);
  for (int i = 0; i < n; ++i) {
    double lp_prior = prior.log_prob(draws.row(i));
    log_w[i] = lp_prior == kNegInf
                   ? kNegInf
                   : log_likelihood(draws.row(i)) + lp_prior - log_q[i];
  }
  double lse = logsumexp(log_w);
  if (lse == kNegInf)
    throw NumericError("importance_correct: all importance weights are zero");
  VectorXd w = (log_w.array() - lse).exp();
  double ess = 1.0 / w.array().square().sum();
  return {draws, w, ess};
}

}  // namespace

CorrectionResult importance_correct(const Posterior& posterior,
                                    const LogLikelihoodFn& log_likelihood, int n,
                                    Rng& rng) {
  if (posterior.method() != MethodKind::kNpe || !posterior.estimator().is_density())
    throw ConfigError(
        "importance_correct: needs an NPE posterior with an evaluable density");
  if (n < 1) throw std::invalid_argument("importance_correct: n must be >= 1");
  MatrixXd draws =
      posterior.estimator().sample_obs(posterior.observations(), n, rng);
  VectorXd log_q =
      posterior.estimator().log_prob_obs(draws, posterior.observations());
  return correct_from_draws(draws, log_q, log_likelihood, posterior.prior());
}

CorrectionResult importance_correct_with_q(const Distribution& q,
                                           const LogLikelihoodFn& log_likelihood,
                                           const Distribution& prior, int n,
                                           Rng& rng) {
  if (n < 1) throw std::invalid_argument("importance_correct: n must be >= 1");
  MatrixXd draws = q.sample(n, rng);
  VectorXd log_q = q.log_prob_rows(draws);
  return correct_from_draws(draws, log_q, log_likelihood, prior);
}

}  // namespace sbikit::inf
