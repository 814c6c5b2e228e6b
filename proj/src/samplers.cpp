#include "sbikit/samplers.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace sbikit::smp {

using nlohmann::json;

LogDensityTarget target_from_distribution(const Distribution& d) {
  LogDensityTarget t;
  t.dim = d.dim();
  t.log_prob_rows = [d](const MatrixXd& m) { return d.log_prob_rows(m); };
  if (d.is_uniform_box()) t.support_box = {{d.box_lower(), d.box_upper()}};
  return t;
}

bool mh_accept(double log_p_new, double log_p_old, double log_u) {
  if (log_p_new == kNegInf) return false;
  if (log_p_old == kNegInf) return true;
  return log_u < log_p_new - log_p_old;
}

namespace {

void validate_mcmc_config(const McmcConfig& cfg) {
  if (cfg.chains < 1 || cfg.warmup < 0 || cfg.thinning < 1 ||
      cfg.proposal_scale <= 0.0 || cfg.init_candidates < 1)
    throw ConfigError("mcmc: invalid sampler configuration");
}

MatrixXd init_chains(const LogDensityTarget& target, const Distribution& init,
                     const McmcConfig& cfg, Rng& rng, VectorXd& log_p) {
  MatrixXd states(cfg.chains, target.dim);
  if (cfg.init == McmcInit::kResampleBest) {
    MatrixXd cand = init.sample(cfg.init_candidates, rng);
    VectorXd lp = target.log_prob_rows(cand);
    double m = lp.maxCoeff();
    if (m == kNegInf)
      throw NumericError("mcmc: every initialization candidate has zero density");
    VectorXd w = (lp.array() - m).exp();
    log_p.resize(cfg.chains);
    for (int c = 0; c < cfg.chains; ++c) {
      int pick = rng.categorical(w);
      states.row(c) = cand.row(pick);
      log_p[c] = lp[pick];
    }
    return states;
  }
  // prior-draw: redraw chains that start at zero density
  log_p.resize(cfg.chains);
  for (int c = 0; c < cfg.chains; ++c) {
    bool ok = false;
    for (int attempt = 0; attempt < 1024 && !ok; ++attempt) {
      MatrixXd draw = init.sample(1, rng);
      double lp = target.log_prob_rows(draw)[0];
      if (lp > kNegInf) {
        states.row(c) = draw.row(0);
        log_p[c] = lp;
        ok = true;
      }
    }
    if (!ok)
      throw NumericError("mcmc: could not initialize a chain inside the support");
  }
  return states;
}

MatrixXd pool_round_robin(const std::vector<MatrixXd>& per_chain, int n, int dim) {
  const int chains = static_cast<int>(per_chain.size());
  const int keep = static_cast<int>(per_chain[0].rows());
  MatrixXd out(n, dim);
  int row = 0;
  for (int k = 0; k < keep && row < n; ++k)
    for (int c = 0; c < chains && row < n; ++c) out.row(row++) = per_chain[c].row(k);
  return out;
}

void fill_diagnostics(McmcDiagnostics* diag, const std::vector<MatrixXd>& kept,
                      const VectorXd& acceptance, double final_scale,
                      std::vector<double> scale_trace, std::uint64_t seed,
                      const McmcConfig& cfg) {
  if (!diag) return;
  diag->acceptance_per_chain = acceptance;
  diag->rhat = split_rhat(kept);
  diag->ess = effective_sample_size(kept);
  diag->scale_trace = std::move(scale_trace);
  diag->final_scale = final_scale;
  diag->seed = seed;
  diag->config = cfg;
}

}  // namespace

MatrixXd mh_sample(const LogDensityTarget& target, const Distribution& init,
                   const McmcConfig& cfg, int n, Rng& rng,
                   McmcDiagnostics* diag) {
  validate_mcmc_config(cfg);
  if (n < 1) throw std::invalid_argument("mh_sample: n must be >= 1");
  const std::uint64_t seed_echo = rng.engine()();  // consume one word as an id
  const int chains = cfg.chains, dim = target.dim;

  VectorXd log_p;
  MatrixXd states = init_chains(target, init, cfg, rng, log_p);

  const int keep = (n + chains - 1) / chains;
  const int post_steps = keep * cfg.thinning;
  const double target_accept = 0.234;
  double scale = cfg.proposal_scale;
  std::vector<double> scale_trace;
  scale_trace.reserve(cfg.warmup + post_steps);

  std::vector<MatrixXd> kept(chains, MatrixXd(keep, dim));
  VectorXd accepted_post = VectorXd::Zero(chains);
  int kept_rows = 0;

  for (int step = 0; step < cfg.warmup + post_steps; ++step) {
    const bool in_warmup = step < cfg.warmup;
    MatrixXd proposal = states + scale * rng.normal_mat(chains, dim);
    VectorXd lp_new = target.log_prob_rows(proposal);
    double accept_count = 0.0;
    for (int c = 0; c < chains; ++c) {
      double log_u = std::log(std::max(rng.uniform(), 1e-300));
      if (mh_accept(lp_new[c], log_p[c], log_u)) {
        states.row(c) = proposal.row(c);
        log_p[c] = lp_new[c];
        accept_count += 1.0;
        if (!in_warmup) accepted_post[c] += 1.0;
      }
    }
    if (in_warmup) {
      // Robbins-Monro step toward the target acceptance rate
      double gamma = std::pow(step + 1.0, -0.6);
      scale *= std::exp(gamma * (accept_count / chains - target_accept));
    }
    scale_trace.push_back(scale);
    if (!in_warmup) {
      int post_index = step - cfg.warmup;
      if ((post_index + 1) % cfg.thinning == 0) {
        for (int c = 0; c < chains; ++c) kept[c].row(kept_rows) = states.row(c);
        ++kept_rows;
      }
    }
  }

  fill_diagnostics(diag, kept, accepted_post / post_steps, scale,
                   std::move(scale_trace), seed_echo, cfg);
  return pool_round_robin(kept, n, dim);
}

MatrixXd slice_sample(const LogDensityTarget& target, const Distribution& init,
                      const McmcConfig& cfg, int n, Rng& rng,
                      McmcDiagnostics* diag) {
  validate_mcmc_config(cfg);
  if (n < 1) throw std::invalid_argument("slice_sample: n must be >= 1");
  const std::uint64_t seed_echo = rng.engine()();
  const int chains = cfg.chains, dim = target.dim;
  constexpr double kWidth = 1.0;
  constexpr int kMaxStepOut = 50;
  constexpr int kMaxShrink = 200;

  VectorXd log_p;
  MatrixXd states = init_chains(target, init, cfg, rng, log_p);

  const int keep = (n + chains - 1) / chains;
  const int post_steps = keep * cfg.thinning;
  std::vector<MatrixXd> kept(chains, MatrixXd(keep, dim));
  int kept_rows = 0;

  auto eval_at = [&](Eigen::RowVectorXd point) {
    MatrixXd m(1, dim);
    m.row(0) = point;
    return target.log_prob_rows(m)[0];
  };

  for (int step = 0; step < cfg.warmup + post_steps; ++step) {
    for (int c = 0; c < chains; ++c) {
      Eigen::RowVectorXd x = states.row(c);
      double lp = log_p[c];
      for (int j = 0; j < dim; ++j) {
        double log_y = lp - (-std::log(std::max(rng.uniform(), 1e-300)));
        double lo = x[j] - kWidth * rng.uniform();
        double hi = lo + kWidth;
        Eigen::RowVectorXd probe = x;
        int expand = 0;
        probe[j] = lo;
        while (expand < kMaxStepOut && eval_at(probe) > log_y) {
          lo -= kWidth;
          probe[j] = lo;
          ++expand;
        }
        expand = 0;
        probe[j] = hi;
        while (expand < kMaxStepOut && eval_at(probe) > log_y) {
          hi += kWidth;
          probe[j] = hi;
          ++expand;
        }
        for (int s = 0; s < kMaxShrink; ++s) {
          double cand = rng.uniform(lo, hi);
          probe[j] = cand;
          double lp_cand = eval_at(probe);
          if (lp_cand > log_y) {
            x[j] = cand;
            lp = lp_cand;
            break;
          }
          if (cand < x[j])
            lo = cand;
          else
            hi = cand;
        }
      }
      states.row(c) = x;
      log_p[c] = lp;
    }
    if (step >= cfg.warmup && (step - cfg.warmup + 1) % cfg.thinning == 0) {
      for (int c = 0; c < chains; ++c) kept[c].row(kept_rows) = states.row(c);
      ++kept_rows;
    }
  }

  // slice sampling always moves; report unit acceptance
  fill_diagnostics(diag, kept, VectorXd::Ones(chains), kWidth,
                   std::vector<double>(cfg.warmup + post_steps, kWidth), seed_echo,
                   cfg);
  return pool_round_robin(kept, n, dim);
}

RejectionResult rejection_sample(const LogDensityTarget& target,
                                 const Distribution& proposal, double log_m,
                                 int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("rejection_sample: n must be >= 1");
  constexpr long kMaxProposals = 10'000'000;
  constexpr double kMinRate = 1e-6;

  MatrixXd out(n, target.dim);
  long total = 0;
  int accepted = 0;
  const int chunk = std::max(1024, n);
  while (accepted < n) {
    MatrixXd draws = proposal.sample(chunk, rng);
    VectorXd lp_target = target.log_prob_rows(draws);
    VectorXd lp_prop = proposal.log_prob_rows(draws);
    for (int i = 0; i < chunk && accepted < n; ++i) {
      ++total;
      double log_alpha = lp_target[i] - log_m - lp_prop[i];
      if (log_alpha > 0.0) log_alpha = 0.0;  // tolerate tiny bound violations
      if (lp_target[i] > kNegInf &&
          std::log(std::max(rng.uniform(), 1e-300)) < log_alpha)
        out.row(accepted++) = draws.row(i);
    }
    if (total >= kMaxProposals &&
        static_cast<double>(accepted) / total < kMinRate)
      throw NumericError("rejection_sample: acceptance rate below 1e-6 after 1e7 "
                         "proposals");
  }
  return {out, static_cast<double>(accepted) / total};
}

ImportanceResult importance_sample(const LogDensityTarget& target,
                                   const Distribution& proposal, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("importance_sample: n must be >= 1");
  MatrixXd draws = proposal.sample(n, rng);
  VectorXd log_w = target.log_prob_rows(draws) - proposal.log_prob_rows(draws);
  double lse = logsumexp(log_w);
  if (lse == kNegInf)
    throw NumericError("importance_sample: all importance weights are zero");
  VectorXd w = (log_w.array() - lse).exp();
  double ess = 1.0 / w.array().square().sum();
  return {draws, w, ess};
}

VectorXd split_rhat(const std::vector<MatrixXd>& chains) {
  const int dim = static_cast<int>(chains[0].cols());
  const int half = static_cast<int>(chains[0].rows()) / 2;
  VectorXd rhat(dim);
  if (half < 2) {
    rhat.setConstant(std::numeric_limits<double>::quiet_NaN());
    return rhat;
  }
  for (int d = 0; d < dim; ++d) {
    std::vector<VectorXd> seqs;
    for (const auto& chain : chains) {
      seqs.push_back(chain.col(d).head(half));
      seqs.push_back(chain.col(d).segment(half, half));
    }
    const int m = static_cast<int>(seqs.size());
    VectorXd means(m), vars(m);
    for (int s = 0; s < m; ++s) {
      means[s] = seqs[s].mean();
      vars[s] = (seqs[s].array() - means[s]).square().sum() / (half - 1);
    }
    double w = vars.mean();
    double grand = means.mean();
    double b = half * (means.array() - grand).square().sum() / (m - 1);
    double var_plus = (half - 1.0) / half * w + b / half;
    rhat[d] = w > 0.0 ? std::sqrt(var_plus / w) : 1.0;
  }
  return rhat;
}

VectorXd effective_sample_size(const std::vector<MatrixXd>& chains) {
  const int dim = static_cast<int>(chains[0].cols());
  const int len = static_cast<int>(chains[0].rows());
  const int m = static_cast<int>(chains.size());
  VectorXd ess(dim);
  if (len < 4) {
    ess.setConstant(std::numeric_limits<double>::quiet_NaN());
    return ess;
  }
  for (int d = 0; d < dim; ++d) {
    // averaged within-chain autocovariances
    std::vector<double> acov(len, 0.0);
    double w = 0.0;
    double grand = 0.0;
    VectorXd means(m);
    for (int c = 0; c < m; ++c) means[c] = chains[c].col(d).mean();
    grand = means.mean();
    for (int c = 0; c < m; ++c) {
      VectorXd x = chains[c].col(d).array() - means[c];
      for (int lag = 0; lag < len; ++lag) {
        double s = 0.0;
        for (int i = 0; i + lag < len; ++i) s += x[i] * x[i + lag];
        acov[lag] += s / len / m;
      }
      w += x.squaredNorm() / (len - 1) / m;
    }
    double b = m > 1 ? len * (means.array() - grand).square().sum() / (m - 1) : 0.0;
    double var_plus = (len - 1.0) / len * w + (m > 1 ? b / len : acov[0] / len);
    if (var_plus <= 0.0) {
      ess[d] = static_cast<double>(m) * len;
      continue;
    }
    // Geyer initial positive sequence on paired correlations
    double tau = 1.0;
    for (int lag = 1; lag + 1 < len; lag += 2) {
      double rho_a = 1.0 - (w - acov[lag]) / var_plus;
      double rho_b = 1.0 - (w - acov[lag + 1]) / var_plus;
      if (rho_a + rho_b <= 0.0) break;
      tau += 2.0 * (rho_a + rho_b);
    }
    ess[d] = static_cast<double>(m) * len / std::max(tau, 1e-12);
  }
  return ess;
}

std::string McmcDiagnostics::to_json_string(int indent) const {
  auto vec = [](const VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  };
  json j{{"acceptance_per_chain", vec(acceptance_per_chain)},
         {"rhat", vec(rhat)},
         {"ess", vec(ess)},
         {"final_scale", final_scale},
         {"seed", seed},
         {"config",
          {{"chains", config.chains},
           {"warmup", config.warmup},
           {"thinning", config.thinning},
           {"proposal_scale", config.proposal_scale},
           {"init", config.init == McmcInit::kResampleBest ? "resample-best"
                                                           : "prior-draw"},
           {"init_candidates", config.init_candidates}}}};
  return j.dump(indent);
}

}  // namespace sbikit::smp
