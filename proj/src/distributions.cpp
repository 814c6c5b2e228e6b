#include "sbikit/distributions.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <utility>

namespace sbikit {

using nlohmann::json;

std::string to_string(DistKind k) {
  switch (k) {
    case DistKind::kUniformBox: return "uniform-box";
    case DistKind::kGaussianDiag: return "gaussian-diag";
    case DistKind::kGaussianFull: return "gaussian-full";
    case DistKind::kMixtureOfGaussians: return "mixture-of-gaussians";
    case DistKind::kCategorical: return "categorical";
    case DistKind::kIndependentProduct: return "independent-product";
  }
  throw std::logic_error("unreachable distribution kind");
}

DistKind dist_kind_from_string(const std::string& s) {
  if (s == "uniform-box") return DistKind::kUniformBox;
  if (s == "gaussian-diag") return DistKind::kGaussianDiag;
  if (s == "gaussian-full") return DistKind::kGaussianFull;
  if (s == "mixture-of-gaussians") return DistKind::kMixtureOfGaussians;
  if (s == "categorical") return DistKind::kCategorical;
  if (s == "independent-product") return DistKind::kIndependentProduct;
  throw ConfigError("unknown distribution kind: " + s);
}

Distribution::Distribution(DistKind kind, int dim, Data data)
    : kind_(kind), dim_(dim), data_(std::make_shared<const Data>(std::move(data))) {}

Distribution Distribution::uniform_box(VectorXd lower, VectorXd upper) {
  if (lower.size() == 0 || lower.size() != upper.size())
    throw ConfigError("uniform-box: bounds must be nonempty and equal length");
  for (int i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i]))
      throw ConfigError("uniform-box: lower[" + std::to_string(i) +
                        "] must be < upper[" + std::to_string(i) + "]");
  }
  int d = static_cast<int>(lower.size());
  return Distribution(DistKind::kUniformBox, d,
                      UniformBoxData{std::move(lower), std::move(upper)});
}

Distribution Distribution::gaussian_diag(VectorXd mean, VectorXd std_dev) {
  if (mean.size() == 0 || mean.size() != std_dev.size())
    throw ConfigError("gaussian-diag: mean/std must be nonempty and equal length");
  for (int i = 0; i < std_dev.size(); ++i)
    if (!(std_dev[i] > 0.0) || !std::isfinite(std_dev[i]))
      throw ConfigError("gaussian-diag: std must be strictly positive");
  int d = static_cast<int>(mean.size());
  return Distribution(DistKind::kGaussianDiag, d,
                      GaussianDiagData{std::move(mean), std::move(std_dev)});
}

Distribution::GaussianFullData Distribution::make_gaussian_full_data(
    VectorXd mean, MatrixXd cov) {
  if (mean.size() == 0 || cov.rows() != mean.size() || cov.cols() != mean.size())
    throw ConfigError("gaussian-full: covariance shape must match mean");
  if (!cov.isApprox(cov.transpose(), 1e-12))
    throw ConfigError("gaussian-full: covariance must be symmetric");
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw ConfigError("gaussian-full: covariance must be positive definite");
  MatrixXd chol = llt.matrixL();
  double log_det_half = chol.diagonal().array().log().sum();
  return GaussianFullData{std::move(mean), std::move(chol), log_det_half};
}

Distribution Distribution::gaussian_full(VectorXd mean, MatrixXd cov) {
  auto data = make_gaussian_full_data(std::move(mean), std::move(cov));
  int d = static_cast<int>(data.mean.size());
  return Distribution(DistKind::kGaussianFull, d, std::move(data));
}

Distribution Distribution::mixture_of_gaussians(VectorXd weights,
                                                std::vector<VectorXd> means,
                                                std::vector<MatrixXd> covs) {
  if (weights.size() == 0 ||
      means.size() != static_cast<size_t>(weights.size()) ||
      covs.size() != means.size())
    throw ConfigError("mixture: weights/means/covs counts must match");
  for (int i = 0; i < weights.size(); ++i)
    if (weights[i] < 0.0) throw ConfigError("mixture: weights must be nonnegative");
  if (std::abs(weights.sum() - 1.0) > 1e-9)
    throw ConfigError("mixture: weights must sum to 1 within 1e-9");
  MixtureData data;
  data.weights = std::move(weights);
  int d = static_cast<int>(means[0].size());
  for (size_t k = 0; k < means.size(); ++k) {
    if (means[k].size() != d)
      throw ConfigError("mixture: all components must share one dimension");
    data.components.push_back(
        make_gaussian_full_data(std::move(means[k]), std::move(covs[k])));
  }
  return Distribution(DistKind::kMixtureOfGaussians, d, std::move(data));
}

Distribution Distribution::categorical(VectorXd probs) {
  if (probs.size() == 0) throw ConfigError("categorical: needs >= 1 category");
  for (int i = 0; i < probs.size(); ++i)
    if (probs[i] < 0.0) throw ConfigError("categorical: probabilities must be nonnegative");
  if (std::abs(probs.sum() - 1.0) > 1e-9)
    throw ConfigError("categorical: probabilities must sum to 1 within 1e-9");
  return Distribution(DistKind::kCategorical, 1, CategoricalData{std::move(probs)});
}

Distribution Distribution::independent_product(std::vector<Distribution> components) {
  if (components.empty())
    throw ConfigError("independent-product: needs >= 1 component");
  int d = 0;
  for (const auto& c : components) d += c.dim();
  return Distribution(DistKind::kIndependentProduct, d,
                      ProductData{std::move(components)});
}

namespace {

double uniform_box_log_prob(const VectorXd& lower, const VectorXd& upper,
                            const VectorXd& x) {
  double lp = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] || x[i] >= upper[i]) return kNegInf;
    lp -= std::log(upper[i] - lower[i]);
  }
  return lp;
}

double gaussian_diag_log_prob(const VectorXd& mean, const VectorXd& std_dev,
                              const VectorXd& x) {
  double lp = -0.5 * x.size() * kLog2Pi;
  for (int i = 0; i < x.size(); ++i) {
    double z = (x[i] - mean[i]) / std_dev[i];
    lp -= 0.5 * z * z + std::log(std_dev[i]);
  }
  return lp;
}

}  // namespace

double Distribution::gaussian_full_log_prob(const GaussianFullData& g,
                                            const VectorXd& x) {
  VectorXd z = g.chol.triangularView<Eigen::Lower>().solve(x - g.mean);
  return -0.5 * z.squaredNorm() - g.log_det_half - 0.5 * x.size() * kLog2Pi;
}

double Distribution::log_prob(const VectorXd& theta) const {
  if (theta.size() != dim_)
    throw std::invalid_argument("log_prob: expected dim " + std::to_string(dim_) +
                                ", got " + std::to_string(theta.size()));
  return std::visit(
      [&](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformBoxData>) {
          return uniform_box_log_prob(d.lower, d.upper, theta);
        } else if constexpr (std::is_same_v<T, GaussianDiagData>) {
          return gaussian_diag_log_prob(d.mean, d.std_dev, theta);
        } else if constexpr (std::is_same_v<T, GaussianFullData>) {
          return gaussian_full_log_prob(d, theta);
        } else if constexpr (std::is_same_v<T, MixtureData>) {
          VectorXd terms(d.weights.size());
          for (int k = 0; k < d.weights.size(); ++k) {
            terms[k] = d.weights[k] <= 0.0
                           ? kNegInf
                           : std::log(d.weights[k]) +
                                 gaussian_full_log_prob(d.components[k], theta);
          }
          return logsumexp(terms);
        } else if constexpr (std::is_same_v<T, CategoricalData>) {
          double v = theta[0];
          double r = std::round(v);
          if (std::abs(v - r) > 1e-9) return kNegInf;
          int k = static_cast<int>(r);
          if (k < 0 || k >= d.probs.size()) return kNegInf;
          return d.probs[k] > 0.0 ? std::log(d.probs[k]) : kNegInf;
        } else {
          static_assert(std::is_same_v<T, ProductData>);
          double lp = 0.0;
          int off = 0;
          for (const auto& c : d.components) {
            lp += c.log_prob(theta.segment(off, c.dim()));
            off += c.dim();
            if (lp == kNegInf) return kNegInf;
          }
          return lp;
        }
      },
      *data_);
}

VectorXd Distribution::log_prob_rows(const MatrixXd& thetas) const {
  VectorXd out(thetas.rows());
  for (int i = 0; i < thetas.rows(); ++i) out[i] = log_prob(thetas.row(i));
  return out;
}

MatrixXd Distribution::sample(int n, Rng& rng) const {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  MatrixXd out(n, dim_);
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformBoxData>) {
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < dim_; ++j)
              out(i, j) = d.lower[j] + rng.uniform() * (d.upper[j] - d.lower[j]);
        } else if constexpr (std::is_same_v<T, GaussianDiagData>) {
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < dim_; ++j)
              out(i, j) = d.mean[j] + d.std_dev[j] * rng.normal();
        } else if constexpr (std::is_same_v<T, GaussianFullData>) {
          for (int i = 0; i < n; ++i) {
            VectorXd z = rng.normal_vec(dim_);
            out.row(i) = (d.mean + d.chol * z).transpose();
          }
        } else if constexpr (std::is_same_v<T, MixtureData>) {
          for (int i = 0; i < n; ++i) {
            int k = rng.categorical(d.weights);
            VectorXd z = rng.normal_vec(dim_);
            out.row(i) = (d.components[k].mean + d.components[k].chol * z).transpose();
          }
        } else if constexpr (std::is_same_v<T, CategoricalData>) {
          for (int i = 0; i < n; ++i)
            out(i, 0) = static_cast<double>(rng.categorical(d.probs));
        } else {
          static_assert(std::is_same_v<T, ProductData>);
          // row-major fill so each row is one joint draw
          for (int i = 0; i < n; ++i) {
            int off = 0;
            for (const auto& c : d.components) {
              out.block(i, off, 1, c.dim()) = c.sample(1, rng);
              off += c.dim();
            }
          }
        }
      },
      *data_);
  return out;
}

bool Distribution::is_gaussian() const {
  return kind_ == DistKind::kGaussianDiag || kind_ == DistKind::kGaussianFull;
}

VectorXd Distribution::gaussian_mean() const {
  if (kind_ == DistKind::kGaussianDiag)
    return std::get<GaussianDiagData>(*data_).mean;
  if (kind_ == DistKind::kGaussianFull)
    return std::get<GaussianFullData>(*data_).mean;
  throw std::invalid_argument("gaussian_mean: not a Gaussian distribution");
}

MatrixXd Distribution::gaussian_cov() const {
  if (kind_ == DistKind::kGaussianDiag) {
    const auto& d = std::get<GaussianDiagData>(*data_);
    return d.std_dev.array().square().matrix().asDiagonal();
  }
  if (kind_ == DistKind::kGaussianFull) {
    const auto& d = std::get<GaussianFullData>(*data_);
    return d.chol * d.chol.transpose();
  }
  throw std::invalid_argument("gaussian_cov: not a Gaussian distribution");
}

VectorXd Distribution::box_lower() const {
  if (kind_ != DistKind::kUniformBox)
    throw std::invalid_argument("box_lower: not a uniform-box");
  return std::get<UniformBoxData>(*data_).lower;
}

VectorXd Distribution::box_upper() const {
  if (kind_ != DistKind::kUniformBox)
    throw std::invalid_argument("box_upper: not a uniform-box");
  return std::get<UniformBoxData>(*data_).upper;
}

Distribution linear_gaussian_posterior(const Distribution& prior,
                                       const MatrixXd& likelihood_cov,
                                       const VectorXd& x_o) {
  if (!prior.is_gaussian())
    throw ConfigError("linear_gaussian_posterior: prior must be Gaussian");
  int d = prior.dim();
  if (likelihood_cov.rows() != d || likelihood_cov.cols() != d || x_o.size() != d)
    throw ConfigError("linear_gaussian_posterior: dimension mismatch");
  Eigen::LLT<MatrixXd> lik_llt(likelihood_cov);
  if (lik_llt.info() != Eigen::Success)
    throw ConfigError("linear_gaussian_posterior: likelihood covariance not SPD");
  MatrixXd eye = MatrixXd::Identity(d, d);
  MatrixXd lik_prec = lik_llt.solve(eye);
  MatrixXd prior_prec = Eigen::LLT<MatrixXd>(prior.gaussian_cov()).solve(eye);
  MatrixXd post_prec = prior_prec + lik_prec;
  Eigen::LLT<MatrixXd> post_llt(post_prec);
  MatrixXd post_cov = post_llt.solve(eye);
  VectorXd post_mean =
      post_llt.solve(prior_prec * prior.gaussian_mean() + lik_prec * x_o);
  // re-symmetrize before the SPD check inside gaussian_full
  post_cov = 0.5 * (post_cov + post_cov.transpose());
  return Distribution::gaussian_full(post_mean, post_cov);
}

Distribution scale_gaussian_cov(const Distribution& gaussian, double factor) {
  if (!gaussian.is_gaussian() || !(factor > 0.0))
    throw ConfigError("scale_gaussian_cov: needs a Gaussian and factor > 0");
  return Distribution::gaussian_full(gaussian.gaussian_mean(),
                                     factor * gaussian.gaussian_cov());
}

// ---------------------------------------------------------------------------
// JSON serialization. Field names are part of the CLI file-format contract.

struct DistributionJson {
  static json vec_to_json(const VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
  }
  static VectorXd vec_from_json(const json& a) {
    VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
  }
  static json mat_to_json(const MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) rows.push_back(vec_to_json(m.row(i)));
    return rows;
  }
  static MatrixXd mat_from_json(const json& rows) {
    if (rows.empty()) throw ConfigError("matrix JSON must be nonempty");
    MatrixXd m(rows.size(), rows[0].size());
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size())
        throw ConfigError("matrix JSON rows must have equal length");
      for (size_t j = 0; j < rows[i].size(); ++j)
        m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j].get<double>();
    }
    return m;
  }

  static json to_json(const Distribution& d) {
    json params;
    std::visit(
        [&](const auto& data) {
          using T = std::decay_t<decltype(data)>;
          if constexpr (std::is_same_v<T, Distribution::UniformBoxData>) {
            params["lower"] = vec_to_json(data.lower);
            params["upper"] = vec_to_json(data.upper);
          } else if constexpr (std::is_same_v<T, Distribution::GaussianDiagData>) {
            params["mean"] = vec_to_json(data.mean);
            params["std"] = vec_to_json(data.std_dev);
          } else if constexpr (std::is_same_v<T, Distribution::GaussianFullData>) {
            params["mean"] = vec_to_json(data.mean);
            params["cov"] = mat_to_json(data.chol * data.chol.transpose());
          } else if constexpr (std::is_same_v<T, Distribution::MixtureData>) {
            params["weights"] = vec_to_json(data.weights);
            json comps = json::array();
            for (const auto& c : data.components) {
              json cj;
              cj["mean"] = vec_to_json(c.mean);
              cj["cov"] = mat_to_json(c.chol * c.chol.transpose());
              comps.push_back(cj);
            }
            params["components"] = comps;
          } else if constexpr (std::is_same_v<T, Distribution::CategoricalData>) {
            params["probs"] = vec_to_json(data.probs);
          } else {
            static_assert(std::is_same_v<T, Distribution::ProductData>);
            json comps = json::array();
            for (const auto& c : data.components) comps.push_back(to_json(c));
            params["components"] = comps;
          }
        },
        *d.data_);
    return json{{"kind", to_string(d.kind())}, {"dim", d.dim()}, {"params", params}};
  }

  static Distribution from_json(const json& j) {
    if (!j.contains("kind") || !j.contains("params"))
      throw ConfigError("distribution JSON needs \"kind\" and \"params\"");
    DistKind kind = dist_kind_from_string(j.at("kind").get<std::string>());
    const json& p = j.at("params");
    Distribution out = [&]() -> Distribution {
      switch (kind) {
        case DistKind::kUniformBox:
          return Distribution::uniform_box(vec_from_json(p.at("lower")),
                                           vec_from_json(p.at("upper")));
        case DistKind::kGaussianDiag:
          return Distribution::gaussian_diag(vec_from_json(p.at("mean")),
                                             vec_from_json(p.at("std")));
        case DistKind::kGaussianFull:
          return Distribution::gaussian_full(vec_from_json(p.at("mean")),
                                             mat_from_json(p.at("cov")));
        case DistKind::kMixtureOfGaussians: {
          std::vector<VectorXd> means;
          std::vector<MatrixXd> covs;
          for (const auto& cj : p.at("components")) {
            means.push_back(vec_from_json(cj.at("mean")));
            covs.push_back(mat_from_json(cj.at("cov")));
          }
          return Distribution::mixture_of_gaussians(vec_from_json(p.at("weights")),
                                                    std::move(means), std::move(covs));
        }
        case DistKind::kCategorical:
          return Distribution::categorical(vec_from_json(p.at("probs")));
        case DistKind::kIndependentProduct: {
          std::vector<Distribution> comps;
          for (const auto& cj : p.at("components")) comps.push_back(from_json(cj));
          return Distribution::independent_product(std::move(comps));
        }
      }
      throw std::logic_error("unreachable");
    }();
    if (j.contains("dim") && j.at("dim").get<int>() != out.dim())
      throw ConfigError("distribution JSON: declared dim does not match parameters");
    return out;
  }
};

std::string Distribution::to_json_string(int indent) const {
  return DistributionJson::to_json(*this).dump(indent);
}

Distribution Distribution::from_json_string(const std::string& text) {
  return DistributionJson::from_json(json::parse(text));
}

}  // namespace sbikit
