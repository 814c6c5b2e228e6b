#include "sbikit/diagnostics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "sbikit/nn.hpp"

namespace sbikit::diag {

using nlohmann::json;

double ks_statistic_uniform01(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("ks: empty sample");
  std::sort(values.begin(), values.end());
  const int n = static_cast<int>(values.size());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    double cdf = values[i];  // uniform(0,1) CDF
    d = std::max(d, std::abs((i + 1.0) / n - cdf));
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
  }
  return d;
}

double ks_pvalue(double statistic, int n) {
  // Stephens' asymptotic approximation for the two-sided one-sample test
  double rn = std::sqrt(static_cast<double>(n));
  double lambda = (rn + 0.12 + 0.11 / rn) * statistic;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// SBC

SbcResult run_sbc(const Distribution& prior, const Simulator& sim,
                  const PosteriorSampler& posterior_fn, int trials,
                  int draws_per_trial, std::uint64_t seed) {
  if (trials < 50) throw ConfigError("run_sbc: needs >= 50 trials");
  if (draws_per_trial < 10) throw ConfigError("run_sbc: needs >= 10 posterior draws");

  const int d = prior.dim();
  SbcResult result;
  result.requested = trials;
  result.posterior_draws = draws_per_trial;

  std::vector<Eigen::VectorXi> rank_rows;
  for (int t = 0; t < trials; ++t) {
    Rng trial_rng(derive_seed(seed, "sbc-trial", t));
    MatrixXd theta_star = prior.sample(1, trial_rng);
    MatrixXd x;
    try {
      x = sim.fn(theta_star, {derive_seed(seed, "sbc-sim", t)});
    } catch (const std::exception&) {
      ++result.skipped;
      continue;
    }
    if (!x.allFinite() || !theta_star.allFinite()) {
      ++result.skipped;
      continue;
    }
    MatrixXd draws;
    try {
      draws = posterior_fn(x.row(0), draws_per_trial, trial_rng);
    } catch (const std::exception&) {
      ++result.skipped;
      continue;
    }
    Eigen::VectorXi rank(d);
    for (int j = 0; j < d; ++j)
      rank[j] =
          static_cast<int>((draws.col(j).array() < theta_star(0, j)).count());
    rank_rows.push_back(rank);
  }

  result.completed = static_cast<int>(rank_rows.size());
  if (result.skipped > trials / 5)
    throw NumericError("run_sbc: more than 20% of trials failed (" +
                       std::to_string(result.skipped) + " of " +
                       std::to_string(trials) + ")");

  result.ranks = Eigen::MatrixXi(result.completed, d);
  for (int i = 0; i < result.completed; ++i) result.ranks.row(i) = rank_rows[i];

  result.p_values = VectorXd(d);
  for (int j = 0; j < d; ++j) {
    // continuity-corrected map of the discrete ranks onto (0, 1)
    std::vector<double> u(result.completed);
    for (int i = 0; i < result.completed; ++i)
      u[i] = (result.ranks(i, j) + 0.5) / (draws_per_trial + 1.0);
    double stat = ks_statistic_uniform01(std::move(u));
    result.p_values[j] = ks_pvalue(stat, result.completed);
  }
  return result;
}

std::string SbcResult::to_json_string(double alpha, int indent) const {
  json p = json::array();
  for (int i = 0; i < p_values.size(); ++i) p.push_back(p_values[i]);
  json j{{"diagnostic", "sbc"},
         {"trials_requested", requested},
         {"trials_completed", completed},
         {"trials_skipped", skipped},
         {"posterior_draws", posterior_draws},
         {"p_values", p},
         {"alpha", alpha},
         {"verdict", pass(alpha) ? "pass" : "fail"}};
  return j.dump(indent);
}

// ---------------------------------------------------------------------------
// Coverage curves

namespace {

VectorXd coverage_grid() {
  std::vector<double> g{0.0};
  for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
  g.push_back(1.0);
  return Eigen::Map<VectorXd>(g.data(), g.size());
}

CoverageCurve curve_from_credibilities(const VectorXd& f, bool strict_less) {
  CoverageCurve curve;
  curve.alphas = coverage_grid();
  curve.cases = static_cast<int>(f.size());
  curve.ecp = VectorXd(curve.alphas.size());
  for (int a = 0; a < curve.alphas.size(); ++a) {
    double alpha = curve.alphas[a];
    if (a == 0) {
      curve.ecp[a] = 0.0;  // empty credible region
    } else if (a + 1 == curve.alphas.size()) {
      curve.ecp[a] = 1.0;  // full credible region
    } else {
      double count = strict_less ? (f.array() < alpha).count()
                                 : (f.array() <= alpha).count();
      curve.ecp[a] = count / curve.cases;
    }
    curve.max_abs_dev = std::max(curve.max_abs_dev,
                                 std::abs(curve.ecp[a] - curve.alphas[a]));
  }
  return curve;
}

}  // namespace

namespace {

using ReferenceDrawFn = std::function<VectorXd(const MatrixXd& case_draws, Rng&)>;

CoverageCurve tarp_impl(const MatrixXd& theta_star,
                        const std::vector<MatrixXd>& posterior_samples,
                        const ReferenceDrawFn& draw_reference, std::uint64_t seed) {
  const int n_cases = static_cast<int>(theta_star.rows());
  if (static_cast<int>(posterior_samples.size()) != n_cases)
    throw std::invalid_argument("run_tarp: one sample matrix per case required");
  if (n_cases < 100) throw ConfigError("run_tarp: needs >= 100 cases");

  Rng rng(derive_seed(seed, "tarp-ref"));
  VectorXd f(n_cases);
  for (int i = 0; i < n_cases; ++i) {
    const MatrixXd& draws = posterior_samples[i];
    if (draws.rows() < 100) throw ConfigError("run_tarp: needs >= 100 draws per case");
    if ((draws.rowwise() - draws.row(0)).cwiseAbs().maxCoeff() == 0.0)
      throw NumericError("run_tarp: posterior samples for case " +
                         std::to_string(i) + " are all identical");
    VectorXd ref = draw_reference(draws, rng);
    double d_star = (theta_star.row(i).transpose() - ref).norm();
    int closer = 0;
    for (int m = 0; m < draws.rows(); ++m)
      if ((draws.row(m).transpose() - ref).norm() < d_star) ++closer;
    f[i] = static_cast<double>(closer) / draws.rows();
  }
  return curve_from_credibilities(f, /*strict_less=*/true);
}

}  // namespace

CoverageCurve run_tarp_with_reference(const MatrixXd& theta_star,
                                      const std::vector<MatrixXd>& posterior_samples,
                                      const Distribution& reference,
                                      std::uint64_t seed) {
  return tarp_impl(
      theta_star, posterior_samples,
      [&reference](const MatrixXd&, Rng& rng) -> VectorXd {
        return reference.sample(1, rng).row(0);
      },
      seed);
}

CoverageCurve run_tarp(const MatrixXd& theta_star,
                       const std::vector<MatrixXd>& posterior_samples,
                       std::uint64_t seed) {
  // reference point uniform over each case's sample bounding box
  return tarp_impl(
      theta_star, posterior_samples,
      [](const MatrixXd& draws, Rng& rng) {
        VectorXd lo = draws.colwise().minCoeff();
        VectorXd hi = draws.colwise().maxCoeff();
        VectorXd ref(lo.size());
        for (int j = 0; j < lo.size(); ++j)
          ref[j] = lo[j] + rng.uniform() * (hi[j] - lo[j]);
        return ref;
      },
      seed);
}

CoverageCurve expected_coverage_rank(const MatrixXd& theta_star,
                                     const CaseLogDensityFn& log_q,
                                     const std::vector<MatrixXd>& posterior_samples) {
  const int n_cases = static_cast<int>(theta_star.rows());
  if (static_cast<int>(posterior_samples.size()) != n_cases)
    throw std::invalid_argument(
        "expected_coverage_rank: one sample matrix per case required");
  if (n_cases < 1) throw std::invalid_argument("expected_coverage_rank: no cases");

  VectorXd f(n_cases);
  for (int i = 0; i < n_cases; ++i) {
    const MatrixXd& draws = posterior_samples[i];
    if (draws.rows() < 1)
      throw std::invalid_argument("expected_coverage_rank: empty sample matrix");
    if (draws.rows() > 1 &&
        (draws.rowwise() - draws.row(0)).cwiseAbs().maxCoeff() == 0.0)
      throw NumericError("expected_coverage_rank: posterior samples for case " +
                         std::to_string(i) + " are all identical");
    double lq_star = log_q(theta_star.row(i), i);
    int higher = 0;
    for (int m = 0; m < draws.rows(); ++m)
      if (log_q(draws.row(m), i) > lq_star) ++higher;
    f[i] = static_cast<double>(higher) / draws.rows();
  }
  return curve_from_credibilities(f, /*strict_less=*/false);
}

std::string CoverageCurve::to_json_string(double tol, int indent) const {
  json a = json::array(), e = json::array();
  for (int i = 0; i < alphas.size(); ++i) {
    a.push_back(alphas[i]);
    e.push_back(ecp[i]);
  }
  json j{{"diagnostic", "coverage"},
         {"alphas", a},
         {"ecp", e},
         {"cases", cases},
         {"max_abs_deviation", max_abs_dev},
         {"tolerance", tol},
         {"verdict", pass(tol) ? "pass" : "fail"}};
  return j.dump(indent);
}

// ---------------------------------------------------------------------------
// C2ST

C2stResult c2st(const MatrixXd& samples_p, const MatrixXd& samples_q, int folds,
                std::uint64_t seed) {
  if (samples_p.cols() != samples_q.cols())
    throw std::invalid_argument("c2st: sample dimensions do not match");
  if (samples_p.rows() != samples_q.rows())
    throw std::invalid_argument("c2st: needs equal sample counts per side");
  if (samples_p.rows() < 200) throw ConfigError("c2st: needs >= 200 samples per side");
  if (folds < 2) throw ConfigError("c2st: needs >= 2 folds");

  const int n_side = static_cast<int>(samples_p.rows());
  const int n = 2 * n_side;
  const int d = static_cast<int>(samples_p.cols());

  MatrixXd pooled(n, d);
  pooled << samples_p, samples_q;
  VectorXd labels(n);
  labels.head(n_side).setOnes();
  labels.tail(n_side).setZero();
  pooled = nn::Standardizer::fit(pooled).transform(pooled);

  Rng rng(derive_seed(seed, "c2st"));
  std::vector<int> order = rng.permutation(n);

  nn::TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 200;
  cfg.patience = 10;
  cfg.max_epochs = 200;

  double accuracy_sum = 0.0;
  for (int fold = 0; fold < folds; ++fold) {
    int lo = fold * n / folds, hi = (fold + 1) * n / folds;
    int n_test = hi - lo, n_train = n - n_test;
    MatrixXd train_x(n_train, d), test_x(n_test, d);
    MatrixXd train_y(n_train, 1), test_y(n_test, 1);
    int it = 0, iv = 0;
    for (int i = 0; i < n; ++i) {
      int row = order[i];
      if (i >= lo && i < hi) {
        test_x.row(iv) = pooled.row(row);
        test_y(iv++, 0) = labels[row];
      } else {
        train_x.row(it) = pooled.row(row);
        train_y(it++, 0) = labels[row];
      }
    }

    nn::ParamStore params;
    Rng init_rng(derive_seed(seed, "c2st-init", fold));
    nn::Mlp net = nn::Mlp::create(params, "c2st", {d, 50, 50, 1},
                                  nn::Activation::kRelu, init_rng);
    nn::LossBuilder loss = [&net](ad::Tape& tape, const std::vector<ad::Var>& p,
                                  const MatrixXd& features, const MatrixXd& ys,
                                  std::uint64_t) {
      ad::Var logits = net.forward(tape, p, tape.leaf(features));
      // BCE with logits: softplus(logit) - y * logit
      ad::Var y = tape.leaf(ys);
      return ad::mean_all(
          ad::sub(ad::softplus(logits), ad::mul(y, logits)));
    };
    cfg.seed = derive_seed(seed, "c2st-train", fold);
    nn::train(params, loss, train_x, train_y, cfg);

    ad::Tape tape;
    auto leaves = params.leaves(tape);
    VectorXd logits =
        tape.value(net.forward(tape, leaves, tape.leaf(test_x))).col(0);
    int correct = 0;
    for (int i = 0; i < n_test; ++i)
      if ((logits[i] > 0.0) == (test_y(i, 0) > 0.5)) ++correct;
    accuracy_sum += static_cast<double>(correct) / n_test;
  }

  C2stResult r;
  r.accuracy = accuracy_sum / folds;
  r.folds = folds;
  r.n_per_side = n_side;
  return r;
}

std::string C2stResult::to_json_string(int indent) const {
  json j{{"diagnostic", "c2st"},
         {"accuracy", accuracy},
         {"folds", folds},
         {"n_per_side", n_per_side}};
  return j.dump(indent);
}

}  // namespace sbikit::diag
