#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "sbikit/common.hpp"

namespace sbikit {

enum class DistKind {
  kUniformBox,
  kGaussianDiag,
  kGaussianFull,
  kMixtureOfGaussians,
  kCategorical,
  kIndependentProduct,
};

std::string to_string(DistKind k);
DistKind dist_kind_from_string(const std::string& s);

/// Immutable probability distribution over a parameter or data space.
/// Continuous coordinates are reals, discrete coordinates are
/// integer-valued reals, so one vector type carries mixed spaces.
/// Invalid parameters are rejected at construction; after that, only
/// dimension mismatches can fail.
class Distribution {
 public:
  // uniform on the half-open box [lower, upper)
  static Distribution uniform_box(VectorXd lower, VectorXd upper);
  static Distribution gaussian_diag(VectorXd mean, VectorXd std_dev);
  // covariance must be symmetric positive definite
  static Distribution gaussian_full(VectorXd mean, MatrixXd cov);
  static Distribution mixture_of_gaussians(VectorXd weights,
                                           std::vector<VectorXd> means,
                                           std::vector<MatrixXd> covs);
  // categories 0..K-1, represented as integer-valued reals in a 1-d space
  static Distribution categorical(VectorXd probs);
  static Distribution independent_product(std::vector<Distribution> components);

  int dim() const { return dim_; }
  DistKind kind() const { return kind_; }

  /// n i.i.d. draws, one per row. Every row has log_prob > -inf.
  MatrixXd sample(int n, Rng& rng) const;

  /// Exact log-density (log-mass on discrete coordinates); -inf outside
  /// the support, finite inside. Throws on dimension mismatch.
  double log_prob(const VectorXd& theta) const;

  /// log_prob applied to each row.
  VectorXd log_prob_rows(const MatrixXd& thetas) const;

  // Gaussian accessors (gaussian-diag and gaussian-full only).
  bool is_gaussian() const;
  VectorXd gaussian_mean() const;
  MatrixXd gaussian_cov() const;

  // uniform-box accessors
  bool is_uniform_box() const { return kind_ == DistKind::kUniformBox; }
  VectorXd box_lower() const;
  VectorXd box_upper() const;

  std::string to_json_string(int indent = -1) const;
  static Distribution from_json_string(const std::string& text);

 private:
  struct UniformBoxData {
    VectorXd lower, upper;
  };
  struct GaussianDiagData {
    VectorXd mean, std_dev;
  };
  struct GaussianFullData {
    VectorXd mean;
    MatrixXd chol;      // lower-triangular, strictly positive diagonal
    double log_det_half;  // sum of log diag(chol)
  };
  struct MixtureData {
    VectorXd weights;
    std::vector<GaussianFullData> components;
  };
  struct CategoricalData {
    VectorXd probs;
  };
  struct ProductData {
    std::vector<Distribution> components;
  };
  using Data = std::variant<UniformBoxData, GaussianDiagData, GaussianFullData,
                            MixtureData, CategoricalData, ProductData>;

  Distribution(DistKind kind, int dim, Data data);

  static GaussianFullData make_gaussian_full_data(VectorXd mean, MatrixXd cov);
  static double gaussian_full_log_prob(const GaussianFullData& g,
                                       const VectorXd& x);

  DistKind kind_;
  int dim_;
  std::shared_ptr<const Data> data_;

  friend struct DistributionJson;
};

/// Exact conjugate posterior for the simulator x = theta + eps,
/// eps ~ N(0, likelihood_cov), given a Gaussian prior and one observation.
Distribution linear_gaussian_posterior(const Distribution& prior,
                                       const MatrixXd& likelihood_cov,
                                       const VectorXd& x_o);

/// Gaussian with the same mean and covariance scaled by `factor`
/// (diagnostic helper for deliberately mis-calibrated posteriors).
Distribution scale_gaussian_cov(const Distribution& gaussian, double factor);

}  // namespace sbikit
