#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sbikit/autodiff.hpp"
#include "sbikit/common.hpp"

namespace sbikit::nn {

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Flat, ordered collection of named parameter matrices. The index order
/// is the serialization order.
class ParamStore {
 public:
  int add(std::string name, MatrixXd init);
  int count() const { return static_cast<int>(mats_.size()); }
  MatrixXd& mat(int i) { return mats_[i]; }
  const MatrixXd& mat(int i) const { return mats_[i]; }
  const std::string& name(int i) const { return names_[i]; }

  /// One differentiable leaf per parameter, in index order.
  std::vector<ad::Var> leaves(ad::Tape& tape) const;

  /// Flattened copy of all parameters (row-major within each matrix).
  VectorXd pack() const;
  void unpack(const VectorXd& flat);
  int total_size() const;

 private:
  std::vector<std::string> names_;
  std::vector<MatrixXd> mats_;
};

/// Feed-forward network with a linear output layer. Parameters live in an
/// external ParamStore; the Mlp only remembers its indices.
struct Mlp {
  std::vector<int> widths;  // [in, hidden..., out]
  Activation act = Activation::kRelu;
  std::vector<int> w_idx, b_idx;

  static Mlp create(ParamStore& ps, const std::string& prefix,
                    std::vector<int> widths, Activation act, Rng& rng);

  ad::Var forward(ad::Tape& tape, const std::vector<ad::Var>& params,
                  ad::Var input) const;

  int in_dim() const { return widths.front(); }
  int out_dim() const { return widths.back(); }
  int param_count() const;
};

/// Per-dimension z-scoring fitted on training inputs, with a floored
/// standard deviation so constant columns stay finite.
struct Standardizer {
  static constexpr double kSigmaMin = 1e-14;

  VectorXd mean;
  VectorXd std_dev;

  static Standardizer fit(const MatrixXd& data);
  static Standardizer identity(int dim);

  MatrixXd transform(const MatrixXd& v) const;
  MatrixXd inverse(const MatrixXd& v_hat) const;

  /// log-density correction for densities modeled in standardized
  /// coordinates: log q(v) = log q_hat(v_hat) + log_jacobian().
  double log_jacobian() const { return -std_dev.array().log().sum(); }

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Preconfigured training-loop settings.
struct TrainConfig {
  double learning_rate = 5e-4;
  int batch_size = 200;
  double validation_fraction = 0.1;
  int patience = 20;
  int max_epochs = 1 << 14;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
};

struct AdamState {
  std::vector<MatrixXd> m, v;
  long step = 0;
};

/// Bias-corrected adaptive-moment update (beta1 0.9, beta2 0.999, eps 1e-8).
void adam_step(ParamStore& params, const std::vector<MatrixXd>& grads,
               AdamState& state, double learning_rate);

/// Scales grads in place so the global L2 norm is at most max_norm.
void clip_global_norm(std::vector<MatrixXd>& grads, double max_norm);

/// Builds the mean loss over a batch of aligned (theta, x) rows. `stream`
/// distinguishes evaluation contexts for losses with internal randomness
/// (the ratio-classifier shuffle); deterministic losses ignore it.
using LossBuilder = std::function<ad::Var(
    ad::Tape& tape, const std::vector<ad::Var>& params, const MatrixXd& theta_rows,
    const MatrixXd& x_rows, std::uint64_t stream)>;

struct TrainTrace {
  std::vector<double> train_loss;  // full-pass loss at each epoch end
  std::vector<double> val_loss;
  int best_epoch = -1;             // 0-based index into the traces
  double best_val_loss = 0.0;
};

/// Seeded split, mini-batch optimization, early stopping on validation
/// loss, restore of the best-epoch parameters. Losses are re-evaluated on
/// the full train/validation splits at every epoch end for the trace.
TrainTrace train(ParamStore& params, const LossBuilder& loss_fn,
                 const MatrixXd& theta, const MatrixXd& x, const TrainConfig& cfg);

}  // namespace sbikit::nn
