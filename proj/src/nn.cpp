#include "sbikit/nn.hpp"

#include <algorithm>
#include <cmath>

namespace sbikit::nn {

std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation: " + s);
}

int ParamStore::add(std::string name, MatrixXd init) {
  names_.push_back(std::move(name));
  mats_.push_back(std::move(init));
  return count() - 1;
}

std::vector<ad::Var> ParamStore::leaves(ad::Tape& tape) const {
  std::vector<ad::Var> vars;
  vars.reserve(mats_.size());
  for (const auto& m : mats_) vars.push_back(tape.leaf(m, /*requires_grad=*/true));
  return vars;
}

int ParamStore::total_size() const {
  int n = 0;
  for (const auto& m : mats_) n += static_cast<int>(m.size());
  return n;
}

VectorXd ParamStore::pack() const {
  VectorXd flat(total_size());
  int off = 0;
  for (const auto& m : mats_) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) flat[off++] = m(i, j);
  }
  return flat;
}

void ParamStore::unpack(const VectorXd& flat) {
  if (flat.size() != total_size())
    throw std::invalid_argument("unpack: size mismatch");
  int off = 0;
  for (auto& m : mats_) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = flat[off++];
  }
}

Mlp Mlp::create(ParamStore& ps, const std::string& prefix,
                std::vector<int> widths, Activation act, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp: needs >= 2 widths");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("Mlp: widths must be positive");
  Mlp mlp;
  mlp.widths = std::move(widths);
  mlp.act = act;
  for (size_t l = 0; l + 1 < mlp.widths.size(); ++l) {
    int fan_in = mlp.widths[l], fan_out = mlp.widths[l + 1];
    double a = std::sqrt(6.0 / (fan_in + fan_out));  // Glorot uniform
    MatrixXd w(fan_in, fan_out);
    for (int i = 0; i < fan_in; ++i)
      for (int j = 0; j < fan_out; ++j) w(i, j) = rng.uniform(-a, a);
    mlp.w_idx.push_back(ps.add(prefix + ".w" + std::to_string(l), std::move(w)));
    mlp.b_idx.push_back(
        ps.add(prefix + ".b" + std::to_string(l), MatrixXd::Zero(1, fan_out)));
  }
  return mlp;
}

ad::Var Mlp::forward(ad::Tape& tape, const std::vector<ad::Var>& params,
                     ad::Var input) const {
  ad::Var h = input;
  for (size_t l = 0; l < w_idx.size(); ++l) {
    h = ad::add_rowvec(ad::matmul(h, params[w_idx[l]]), params[b_idx[l]]);
    if (l + 1 < w_idx.size())
      h = (act == Activation::kRelu) ? ad::relu(h) : ad::vtanh(h);
  }
  return h;
}

int Mlp::param_count() const {
  int n = 0;
  for (size_t l = 0; l + 1 < widths.size(); ++l)
    n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

Standardizer Standardizer::fit(const MatrixXd& data) {
  if (data.rows() < 1) throw std::invalid_argument("Standardizer: empty data");
  Standardizer s;
  s.mean = data.colwise().mean();
  VectorXd var = (data.rowwise() - s.mean.transpose()).array().square().colwise().mean();
  s.std_dev = var.array().sqrt().max(kSigmaMin);
  return s;
}

Standardizer Standardizer::identity(int dim) {
  Standardizer s;
  s.mean = VectorXd::Zero(dim);
  s.std_dev = VectorXd::Ones(dim);
  return s;
}

MatrixXd Standardizer::transform(const MatrixXd& v) const {
  if (v.cols() != dim()) throw std::invalid_argument("standardize: dim mismatch");
  return (v.rowwise() - mean.transpose()).array().rowwise() /
         std_dev.transpose().array();
}

MatrixXd Standardizer::inverse(const MatrixXd& v_hat) const {
  if (v_hat.cols() != dim()) throw std::invalid_argument("destandardize: dim mismatch");
  return (v_hat.array().rowwise() * std_dev.transpose().array()).matrix().rowwise() +
         mean.transpose();
}

void clip_global_norm(std::vector<MatrixXd>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double f = max_norm / norm;
    for (auto& g : grads) g *= f;
  }
}

void adam_step(ParamStore& params, const std::vector<MatrixXd>& grads,
               AdamState& state, double learning_rate) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (state.m.empty()) {
    for (int i = 0; i < params.count(); ++i) {
      state.m.push_back(MatrixXd::Zero(params.mat(i).rows(), params.mat(i).cols()));
      state.v.push_back(MatrixXd::Zero(params.mat(i).rows(), params.mat(i).cols()));
    }
  }
  if (static_cast<int>(grads.size()) != params.count())
    throw std::invalid_argument("adam_step: gradient count mismatch");
  state.step += 1;
  double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (int i = 0; i < params.count(); ++i) {
    state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * grads[i];
    state.v[i] = (kBeta2 * state.v[i]).array() +
                 (1.0 - kBeta2) * grads[i].array().square();
    MatrixXd m_hat = state.m[i] / bc1;
    MatrixXd v_hat = state.v[i] / bc2;
    params.mat(i).array() -=
        learning_rate * m_hat.array() / (v_hat.array().sqrt() + kEps);
  }
}

namespace {

double eval_loss(ParamStore& params, const LossBuilder& loss_fn,
                 const MatrixXd& theta, const MatrixXd& x, std::uint64_t stream) {
  ad::Tape tape;
  auto leaves = params.leaves(tape);
  ad::Var loss = loss_fn(tape, leaves, theta, x, stream);
  return tape.value(loss)(0, 0);
}

MatrixXd take_rows(const MatrixXd& m, const std::vector<int>& idx, int lo, int hi) {
  MatrixXd out(hi - lo, m.cols());
  for (int i = lo; i < hi; ++i) out.row(i - lo) = m.row(idx[i]);
  return out;
}

}  // namespace

TrainTrace train(ParamStore& params, const LossBuilder& loss_fn,
                 const MatrixXd& theta, const MatrixXd& x, const TrainConfig& cfg) {
  const int n = static_cast<int>(theta.rows());
  if (x.rows() != n) throw std::invalid_argument("train: theta/x row mismatch");
  if (cfg.validation_fraction <= 0.0 || cfg.validation_fraction >= 1.0)
    throw ConfigError("train: validation_fraction must be in (0, 1)");
  if (cfg.learning_rate <= 0.0 || cfg.batch_size < 1 || cfg.max_epochs < 1 ||
      cfg.patience < 0 || cfg.grad_clip_norm <= 0.0)
    throw ConfigError("train: nonpositive training setting");

  Rng rng(derive_seed(cfg.seed, "train"));
  std::vector<int> order = rng.permutation(n);
  int val_n = std::max(1, static_cast<int>(std::lround(n * cfg.validation_fraction)));
  int train_n = n - val_n;
  if (train_n < 2)
    throw ConfigError("train: need >= 2 training samples after validation split");

  std::vector<int> val_idx(order.begin(), order.begin() + val_n);
  std::vector<int> train_idx(order.begin() + val_n, order.end());
  MatrixXd theta_val = take_rows(theta, val_idx, 0, val_n);
  MatrixXd x_val = take_rows(x, val_idx, 0, val_n);
  MatrixXd theta_train = take_rows(theta, train_idx, 0, train_n);
  MatrixXd x_train = take_rows(x, train_idx, 0, train_n);

  const std::uint64_t val_stream = derive_seed(cfg.seed, "val-stream");
  const std::uint64_t train_eval_stream = derive_seed(cfg.seed, "train-eval-stream");

  TrainTrace trace;
  VectorXd best_params = params.pack();
  double best_val = std::numeric_limits<double>::infinity();
  int non_improving = 0;
  AdamState adam;
  std::uint64_t batch_counter = 0;

  std::vector<int> batch_order(train_n);
  for (int i = 0; i < train_n; ++i) batch_order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    // seeded in-epoch shuffle
    for (int i = train_n - 1; i > 0; --i)
      std::swap(batch_order[i], batch_order[rng.index(i + 1)]);

    int batch_no = 0;
    for (int lo = 0; lo < train_n; lo += cfg.batch_size, ++batch_no) {
      int hi = std::min(train_n, lo + cfg.batch_size);
      MatrixXd tb = take_rows(theta_train, batch_order, lo, hi);
      MatrixXd xb = take_rows(x_train, batch_order, lo, hi);

      ad::Tape tape;
      auto leaves = params.leaves(tape);
      ad::Var loss = loss_fn(tape, leaves, tb, xb, ++batch_counter);
      double loss_val = tape.value(loss)(0, 0);
      if (!std::isfinite(loss_val))
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
      tape.backward(loss);
      std::vector<MatrixXd> grads;
      grads.reserve(leaves.size());
      for (auto v : leaves) grads.push_back(tape.grad(v));
      clip_global_norm(grads, cfg.grad_clip_norm);
      adam_step(params, grads, adam, cfg.learning_rate);
    }

    double train_epoch_loss =
        eval_loss(params, loss_fn, theta_train, x_train, train_eval_stream);
    double val_epoch_loss = eval_loss(params, loss_fn, theta_val, x_val, val_stream);
    if (!std::isfinite(val_epoch_loss) || !std::isfinite(train_epoch_loss))
      throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                         " (end-of-epoch evaluation)");
    trace.train_loss.push_back(train_epoch_loss);
    trace.val_loss.push_back(val_epoch_loss);

    if (val_epoch_loss < best_val) {
      best_val = val_epoch_loss;
      best_params = params.pack();
      trace.best_epoch = epoch;
      non_improving = 0;
    } else {
      ++non_improving;
    }
    // patience = allowed consecutive non-improving epochs
    if (non_improving >= std::max(cfg.patience, 1)) break;
  }

  params.unpack(best_params);
  trace.best_val_loss = best_val;
  return trace;
}

}  // namespace sbikit::nn
