#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbikit/nn.hpp"

namespace sbikit::est {

enum class EmbeddingKind { kIdentity, kMlp, kMeanPool };

std::string to_string(EmbeddingKind k);
EmbeddingKind embedding_kind_from_string(const std::string& s);

struct EmbeddingConfig {
  EmbeddingKind kind = EmbeddingKind::kIdentity;
  std::vector<int> hidden = {50, 50};
  int output_dim = 10;  // ignored for identity
};

/// Learned summary-statistics map applied to the conditioning input.
/// kMeanPool is exactly permutation-invariant over set elements (per-element
/// net phi, mean pooling, post net rho); a single row is a set of one.
struct EmbeddingNet {
  EmbeddingKind kind = EmbeddingKind::kIdentity;
  int input_dim = 0;
  int output_dim = 0;
  nn::Mlp mlp;       // kMlp
  nn::Mlp phi, rho;  // kMeanPool

  static EmbeddingNet create(nn::ParamStore& ps, const std::string& prefix,
                             int input_dim, const EmbeddingConfig& cfg, Rng& rng);

  /// Embeds each row independently (rows are size-one sets).
  ad::Var embed_rows(ad::Tape& tape, const std::vector<ad::Var>& params,
                     ad::Var rows) const;

  /// Embeds a whole set of rows into a single [1 x output_dim] vector.
  ad::Var embed_set(ad::Tape& tape, const std::vector<ad::Var>& params,
                    ad::Var set_rows) const;

  MatrixXd embed_rows_value(const nn::ParamStore& ps, const MatrixXd& rows) const;
  Eigen::RowVectorXd embed_set_value(const nn::ParamStore& ps,
                                     const MatrixXd& set_rows) const;

  bool permutation_invariant() const { return kind == EmbeddingKind::kMeanPool; }
};

// ---------------------------------------------------------------------------

struct MdnConfig {
  int components = 10;
  std::vector<int> hidden = {50, 50};
  nn::Activation activation = nn::Activation::kRelu;
};

/// Mixture density network: a backbone from the embedded condition to
/// per-component mixture logits, means and covariance Cholesky factors
/// (softplus + 1e-6 floored diagonal, unconstrained strict lower triangle).
/// Densities are standardized internally; log_prob is reported in original
/// coordinates including the Jacobian correction.
struct MdnEstimator {
  int target_dim = 0;
  int cond_dim = 0;
  MdnConfig config;
  nn::ParamStore params;
  EmbeddingNet embedding;
  nn::Mlp net;
  nn::Standardizer target_std, cond_std;

  static MdnEstimator create(int target_dim, int cond_dim, const MdnConfig& cfg,
                             const EmbeddingConfig& emb, std::uint64_t seed);

  /// Per-row log q(target_i | condition_i), differentiable w.r.t. params.
  ad::Var log_prob_nodes(ad::Tape& tape, const std::vector<ad::Var>& params_v,
                         const MatrixXd& targets, const MatrixXd& conditions) const;

  VectorXd log_prob(const MatrixXd& targets, const MatrixXd& conditions) const;

  /// log q(target_i | x_obs) against one observation (rows of x_obs are
  /// i.i.d. set elements, embedded jointly).
  VectorXd log_prob_obs(const MatrixXd& targets, const MatrixXd& x_obs) const;

  MatrixXd sample_obs(const MatrixXd& x_obs, int n, Rng& rng) const;

  /// Negative mean log-likelihood loss.
  nn::LossBuilder loss_builder() const;

  /// Mixture parameters at one embedded+standardized condition, in
  /// standardized target coordinates.
  struct Heads {
    VectorXd log_weights;           // log softmax of logits, length K
    std::vector<VectorXd> means;    // K x [d]
    std::vector<MatrixXd> chols;    // K x [d x d] lower-triangular
  };
  Heads heads_at(const Eigen::RowVectorXd& embedded_cond) const;

  int head_dim() const;

 private:
  ad::Var log_prob_given_embedded(ad::Tape& tape,
                                  const std::vector<ad::Var>& params_v,
                                  const MatrixXd& targets, ad::Var embedded) const;
  Eigen::RowVectorXd embed_observation(const MatrixXd& x_obs) const;
};

// ---------------------------------------------------------------------------

struct MafConfig {
  int n_layers = 5;
  int hidden = 50;
  int n_hidden_layers = 2;
  double log_scale_clamp = 7.0;
  nn::Activation activation = nn::Activation::kRelu;
};

/// Masked autoregressive flow: a stack of autoregressively masked affine
/// layers with reversing permutations in between and a standard normal
/// base. The theta -> base direction subtracts the shift and multiplies by
/// exp(-log_scale); its log-determinant is the sum of negated log-scales.
struct MafEstimator {
  int target_dim = 0;
  int cond_dim = 0;
  MafConfig config;
  nn::ParamStore params;
  EmbeddingNet embedding;
  nn::Standardizer target_std, cond_std;

  struct Layer {
    std::vector<int> w_idx, b_idx;
    std::vector<MatrixXd> masks;  // one per weight matrix
    std::vector<int> perm;        // input column order for this layer
  };
  std::vector<Layer> layers;

  static MafEstimator create(int target_dim, int cond_dim, const MafConfig& cfg,
                             const EmbeddingConfig& emb, std::uint64_t seed);

  ad::Var log_prob_nodes(ad::Tape& tape, const std::vector<ad::Var>& params_v,
                         const MatrixXd& targets, const MatrixXd& conditions) const;
  VectorXd log_prob(const MatrixXd& targets, const MatrixXd& conditions) const;
  VectorXd log_prob_obs(const MatrixXd& targets, const MatrixXd& x_obs) const;
  MatrixXd sample_obs(const MatrixXd& x_obs, int n, Rng& rng) const;
  nn::LossBuilder loss_builder() const;

  /// theta -> base transform in standardized coordinates (diagnostic).
  std::pair<MatrixXd, VectorXd> forward_transform(const MatrixXd& targets_std,
                                                  const MatrixXd& embedded) const;
  /// base -> theta inverse, sequential per-dimension inversion.
  MatrixXd inverse_transform(const MatrixXd& base,
                             const Eigen::RowVectorXd& embedded) const;

 private:
  ad::Var log_prob_given_embedded(ad::Tape& tape,
                                  const std::vector<ad::Var>& params_v,
                                  const MatrixXd& targets, ad::Var embedded) const;
  std::pair<ad::Var, ad::Var> masked_net(ad::Tape& tape,
                                         const std::vector<ad::Var>& params_v,
                                         const Layer& layer, ad::Var input) const;
  Eigen::RowVectorXd embed_observation(const MatrixXd& x_obs) const;
};

// ---------------------------------------------------------------------------

struct ClassifierConfig {
  std::vector<int> hidden = {50, 50};
  nn::Activation activation = nn::Activation::kRelu;
};

/// Classifier over (theta, embedded x) pairs; at the optimum of the
/// contrastive loss its logit equals the log likelihood-to-evidence ratio.
struct RatioClassifier {
  int theta_dim = 0;
  int x_dim = 0;
  ClassifierConfig config;
  nn::ParamStore params;
  EmbeddingNet embedding;
  nn::Mlp net;
  nn::Standardizer theta_std, x_std;

  static RatioClassifier create(int theta_dim, int x_dim,
                                const ClassifierConfig& cfg,
                                const EmbeddingConfig& emb, std::uint64_t seed);

  ad::Var logit_nodes(ad::Tape& tape, const std::vector<ad::Var>& params_v,
                      const MatrixXd& thetas, const MatrixXd& xs) const;
  VectorXd logit(const MatrixXd& thetas, const MatrixXd& xs) const;
  VectorXd logit_obs(const MatrixXd& thetas, const MatrixXd& x_obs) const;

  /// Binary cross-entropy on aligned pairs (label 1) versus pairs with
  /// theta rows rotated by a seeded nonzero offset (label 0). Needs >= 2
  /// rows; the offset is drawn from `stream`.
  ad::Var loss_nodes(ad::Tape& tape, const std::vector<ad::Var>& params_v,
                     const MatrixXd& thetas, const MatrixXd& xs,
                     std::uint64_t stream) const;
  double loss(const MatrixXd& thetas, const MatrixXd& xs,
              std::uint64_t stream) const;
  nn::LossBuilder loss_builder() const;
};

}  // namespace sbikit::est
