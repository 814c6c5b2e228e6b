#include "sbikit/estimators.hpp"

#include <cmath>

namespace sbikit::est {

using ad::Tape;
using ad::Var;

std::string to_string(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::kIdentity: return "identity";
    case EmbeddingKind::kMlp: return "mlp";
    case EmbeddingKind::kMeanPool: return "mean-pool";
  }
  throw std::logic_error("unreachable embedding kind");
}

EmbeddingKind embedding_kind_from_string(const std::string& s) {
  if (s == "identity") return EmbeddingKind::kIdentity;
  if (s == "mlp") return EmbeddingKind::kMlp;
  if (s == "mean-pool") return EmbeddingKind::kMeanPool;
  throw ConfigError("unknown embedding kind: " + s);
}

EmbeddingNet EmbeddingNet::create(nn::ParamStore& ps, const std::string& prefix,
                                  int input_dim, const EmbeddingConfig& cfg,
                                  Rng& rng) {
  EmbeddingNet e;
  e.kind = cfg.kind;
  e.input_dim = input_dim;
  switch (cfg.kind) {
    case EmbeddingKind::kIdentity:
      e.output_dim = input_dim;
      break;
    case EmbeddingKind::kMlp: {
      std::vector<int> widths{input_dim};
      widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
      widths.push_back(cfg.output_dim);
      e.mlp = nn::Mlp::create(ps, prefix + ".mlp", widths, nn::Activation::kRelu, rng);
      e.output_dim = cfg.output_dim;
      break;
    }
    case EmbeddingKind::kMeanPool: {
      std::vector<int> phi_widths{input_dim};
      phi_widths.insert(phi_widths.end(), cfg.hidden.begin(), cfg.hidden.end());
      phi_widths.push_back(cfg.output_dim);
      e.phi = nn::Mlp::create(ps, prefix + ".phi", phi_widths,
                              nn::Activation::kRelu, rng);
      std::vector<int> rho_widths{cfg.output_dim};
      rho_widths.insert(rho_widths.end(), cfg.hidden.begin(), cfg.hidden.end());
      rho_widths.push_back(cfg.output_dim);
      e.rho = nn::Mlp::create(ps, prefix + ".rho", rho_widths,
                              nn::Activation::kRelu, rng);
      e.output_dim = cfg.output_dim;
      break;
    }
  }
  return e;
}

Var EmbeddingNet::embed_rows(Tape& tape, const std::vector<Var>& params,
                             Var rows) const {
  switch (kind) {
    case EmbeddingKind::kIdentity:
      return rows;
    case EmbeddingKind::kMlp:
      return mlp.forward(tape, params, rows);
    case EmbeddingKind::kMeanPool:
      // each row is a set of one element; mean pooling is the identity
      return rho.forward(tape, params, phi.forward(tape, params, rows));
  }
  throw std::logic_error("unreachable");
}

Var EmbeddingNet::embed_set(Tape& tape, const std::vector<Var>& params,
                            Var set_rows) const {
  const int m = static_cast<int>(tape.value(set_rows).rows());
  if (m < 1) throw std::invalid_argument("embed: empty observation set");
  if (kind == EmbeddingKind::kMeanPool) {
    Var per_element = phi.forward(tape, params, set_rows);
    Var pooled = ad::scale(ad::colsum(per_element), 1.0 / m);
    return rho.forward(tape, params, pooled);
  }
  if (m > 1)
    throw std::invalid_argument(
        "embed: multiple i.i.d. rows need a permutation-invariant (mean-pool) "
        "embedding net");
  return embed_rows(tape, params, set_rows);
}

MatrixXd EmbeddingNet::embed_rows_value(const nn::ParamStore& ps,
                                        const MatrixXd& rows) const {
  Tape tape;
  auto leaves = ps.leaves(tape);
  Var out = embed_rows(tape, leaves, tape.leaf(rows));
  return tape.value(out);
}

Eigen::RowVectorXd EmbeddingNet::embed_set_value(const nn::ParamStore& ps,
                                                 const MatrixXd& set_rows) const {
  Tape tape;
  auto leaves = ps.leaves(tape);
  Var out = embed_set(tape, leaves, tape.leaf(set_rows));
  return tape.value(out).row(0);
}

// ---------------------------------------------------------------------------
// MDN

int MdnEstimator::head_dim() const {
  const int d = target_dim, k = config.components;
  return k + 2 * k * d + k * d * (d - 1) / 2;
}

MdnEstimator MdnEstimator::create(int target_dim, int cond_dim,
                                  const MdnConfig& cfg, const EmbeddingConfig& emb,
                                  std::uint64_t seed) {
  if (target_dim < 1 || cond_dim < 1)
    throw std::invalid_argument("MdnEstimator: dims must be >= 1");
  if (cfg.components < 1)
    throw std::invalid_argument("MdnEstimator: needs >= 1 component");
  MdnEstimator m;
  m.target_dim = target_dim;
  m.cond_dim = cond_dim;
  m.config = cfg;
  Rng rng(derive_seed(seed, "mdn-init"));
  m.embedding = EmbeddingNet::create(m.params, "embedding", cond_dim, emb, rng);
  std::vector<int> widths{m.embedding.output_dim};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(m.head_dim());
  m.net = nn::Mlp::create(m.params, "mdn", widths, cfg.activation, rng);
  m.target_std = nn::Standardizer::identity(target_dim);
  m.cond_std = nn::Standardizer::identity(cond_dim);
  return m;
}

Var MdnEstimator::log_prob_given_embedded(Tape& tape,
                                          const std::vector<Var>& params_v,
                                          const MatrixXd& targets,
                                          Var embedded) const {
  const int d = target_dim, K = config.components;
  const int t = d * (d - 1) / 2;
  Var heads = net.forward(tape, params_v, embedded);
  Var theta = tape.leaf(target_std.transform(targets));

  Var log_alpha = ad::log_softmax_rows(ad::cols(heads, 0, K));
  Var lognorms{};  // [n x K] after hcat over components
  for (int k = 0; k < K; ++k) {
    Var mu = ad::cols(heads, K + k * d, d);
    Var s = ad::add_const(ad::softplus(ad::cols(heads, K + K * d + k * d, d)), 1e-6);
    Var r = ad::sub(theta, mu);
    // forward substitution z = L^{-1} r, one column node per dimension
    std::vector<Var> z(d);
    for (int i = 0; i < d; ++i) {
      Var acc = ad::cols(r, i, 1);
      for (int j = 0; j < i; ++j) {
        int off = K + 2 * K * d + k * t + i * (i - 1) / 2 + j;
        Var l_ij = ad::cols(heads, off, 1);
        acc = ad::sub(acc, ad::mul(l_ij, z[j]));
      }
      z[i] = ad::divv(acc, ad::cols(s, i, 1));
    }
    Var quad = ad::square(z[0]);
    for (int i = 1; i < d; ++i) quad = ad::add(quad, ad::square(z[i]));
    Var log_det = ad::rowsum(ad::vlog(s));
    Var log_norm = ad::add_const(ad::sub(ad::scale(quad, -0.5), log_det),
                                 -0.5 * d * kLog2Pi);
    lognorms = (k == 0) ? log_norm : ad::hcat(lognorms, log_norm);
  }
  Var mix = ad::logsumexp_rows(ad::add(log_alpha, lognorms));
  return ad::add_const(mix, target_std.log_jacobian());
}

Var MdnEstimator::log_prob_nodes(Tape& tape, const std::vector<Var>& params_v,
                                 const MatrixXd& targets,
                                 const MatrixXd& conditions) const {
  if (targets.rows() != conditions.rows())
    throw std::invalid_argument("mdn: target/condition row mismatch");
  Var cond = tape.leaf(cond_std.transform(conditions));
  Var embedded = embedding.embed_rows(tape, params_v, cond);
  return log_prob_given_embedded(tape, params_v, targets, embedded);
}

VectorXd MdnEstimator::log_prob(const MatrixXd& targets,
                                const MatrixXd& conditions) const {
  Tape tape;
  auto leaves = params.leaves(tape);
  Var lp = log_prob_nodes(tape, leaves, targets, conditions);
  return tape.value(lp).col(0);
}

Eigen::RowVectorXd MdnEstimator::embed_observation(const MatrixXd& x_obs) const {
  return embedding.embed_set_value(params, cond_std.transform(x_obs));
}

VectorXd MdnEstimator::log_prob_obs(const MatrixXd& targets,
                                    const MatrixXd& x_obs) const {
  Eigen::RowVectorXd e = embed_observation(x_obs);
  Tape tape;
  auto leaves = params.leaves(tape);
  MatrixXd embedded = e.replicate(targets.rows(), 1);
  Var lp = log_prob_given_embedded(tape, leaves, targets, tape.leaf(embedded));
  return tape.value(lp).col(0);
}

MdnEstimator::Heads MdnEstimator::heads_at(
    const Eigen::RowVectorXd& embedded_cond) const {
  const int d = target_dim, K = config.components;
  const int t = d * (d - 1) / 2;
  Tape tape;
  auto leaves = params.leaves(tape);
  Var head_var = net.forward(tape, leaves, tape.leaf(embedded_cond));
  Eigen::RowVectorXd h = tape.value(head_var).row(0);

  Heads out;
  VectorXd logits = h.segment(0, K);
  double lse = logsumexp(logits);
  out.log_weights = logits.array() - lse;
  for (int k = 0; k < K; ++k) {
    out.means.push_back(h.segment(K + k * d, d));
    MatrixXd chol = MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
      double raw = h[K + K * d + k * d + i];
      chol(i, i) = (raw >= 0.0 ? raw + std::log1p(std::exp(-raw))
                               : std::log1p(std::exp(raw))) +
                   1e-6;
      for (int j = 0; j < i; ++j)
        chol(i, j) = h[K + 2 * K * d + k * t + i * (i - 1) / 2 + j];
    }
    out.chols.push_back(std::move(chol));
  }
  return out;
}

MatrixXd MdnEstimator::sample_obs(const MatrixXd& x_obs, int n, Rng& rng) const {
  if (n < 1) throw std::invalid_argument("mdn sample: n must be >= 1");
  Heads heads = heads_at(embed_observation(x_obs));
  VectorXd weights = heads.log_weights.array().exp();
  MatrixXd std_draws(n, target_dim);
  for (int i = 0; i < n; ++i) {
    int k = rng.categorical(weights);
    VectorXd z = rng.normal_vec(target_dim);
    std_draws.row(i) = (heads.means[k] + heads.chols[k] * z).transpose();
  }
  return target_std.inverse(std_draws);
}

nn::LossBuilder MdnEstimator::loss_builder() const {
  return [this](Tape& tape, const std::vector<Var>& params_v,
                const MatrixXd& targets, const MatrixXd& conditions,
                std::uint64_t) {
    Var lp = log_prob_nodes(tape, params_v, targets, conditions);
    return ad::scale(ad::mean_all(lp), -1.0);
  };
}

// ---------------------------------------------------------------------------
// MAF

namespace {

// MADE degree assignment: theta input at (permuted) position i has degree
// i+1, conditioning inputs degree 0, hidden units cycle 1..d-1 (all 0 when
// d == 1 so they read only the conditioning input).
std::vector<MatrixXd> made_masks(int d, int cond_dim, int hidden,
                                 int n_hidden_layers) {
  std::vector<int> in_deg(d + cond_dim, 0);
  for (int i = 0; i < d; ++i) in_deg[i] = i + 1;
  std::vector<int> hid_deg(hidden, 0);
  if (d >= 2)
    for (int u = 0; u < hidden; ++u) hid_deg[u] = (u % (d - 1)) + 1;
  std::vector<int> out_deg(2 * d);
  for (int i = 0; i < d; ++i) out_deg[i] = out_deg[d + i] = i + 1;

  std::vector<MatrixXd> masks;
  MatrixXd first(d + cond_dim, hidden);
  for (int i = 0; i < d + cond_dim; ++i)
    for (int u = 0; u < hidden; ++u) first(i, u) = hid_deg[u] >= in_deg[i] ? 1.0 : 0.0;
  masks.push_back(std::move(first));
  for (int l = 1; l < n_hidden_layers; ++l) {
    MatrixXd mid(hidden, hidden);
    for (int u = 0; u < hidden; ++u)
      for (int v = 0; v < hidden; ++v) mid(u, v) = hid_deg[v] >= hid_deg[u] ? 1.0 : 0.0;
    masks.push_back(std::move(mid));
  }
  MatrixXd last(hidden, 2 * d);
  for (int u = 0; u < hidden; ++u)
    for (int o = 0; o < 2 * d; ++o) last(u, o) = out_deg[o] > hid_deg[u] ? 1.0 : 0.0;
  masks.push_back(std::move(last));
  return masks;
}

MatrixXd permutation_matrix(const std::vector<int>& perm) {
  const int d = static_cast<int>(perm.size());
  MatrixXd p = MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) p(perm[i], i) = 1.0;  // out col i = in col perm[i]
  return p;
}

}  // namespace

MafEstimator MafEstimator::create(int target_dim, int cond_dim,
                                  const MafConfig& cfg, const EmbeddingConfig& emb,
                                  std::uint64_t seed) {
  if (target_dim < 1 || cond_dim < 1)
    throw std::invalid_argument("MafEstimator: dims must be >= 1");
  if (cfg.n_layers < 1 || cfg.hidden < 1 || cfg.n_hidden_layers < 1)
    throw std::invalid_argument("MafEstimator: invalid layer configuration");
  MafEstimator f;
  f.target_dim = target_dim;
  f.cond_dim = cond_dim;
  f.config = cfg;
  Rng rng(derive_seed(seed, "maf-init"));
  f.embedding = EmbeddingNet::create(f.params, "embedding", cond_dim, emb, rng);
  const int e = f.embedding.output_dim;
  const int d = target_dim;
  auto masks = made_masks(d, e, cfg.hidden, cfg.n_hidden_layers);

  std::vector<int> identity(d), reversed(d);
  for (int i = 0; i < d; ++i) {
    identity[i] = i;
    reversed[i] = d - 1 - i;
  }
  for (int t = 0; t < cfg.n_layers; ++t) {
    Layer layer;
    layer.perm = (t == 0) ? identity : reversed;
    layer.masks = masks;
    std::vector<int> widths{d + e};
    for (int l = 0; l < cfg.n_hidden_layers; ++l) widths.push_back(cfg.hidden);
    widths.push_back(2 * d);
    nn::Mlp net = nn::Mlp::create(f.params, "maf" + std::to_string(t), widths,
                                  cfg.activation, rng);
    layer.w_idx = net.w_idx;
    layer.b_idx = net.b_idx;
    f.layers.push_back(std::move(layer));
  }
  f.target_std = nn::Standardizer::identity(target_dim);
  f.cond_std = nn::Standardizer::identity(cond_dim);
  return f;
}

std::pair<Var, Var> MafEstimator::masked_net(Tape& tape,
                                             const std::vector<Var>& params_v,
                                             const Layer& layer, Var input) const {
  Var h = input;
  const size_t n_layers = layer.w_idx.size();
  for (size_t l = 0; l < n_layers; ++l) {
    Var w = ad::mul_mask(params_v[layer.w_idx[l]], layer.masks[l]);
    h = ad::add_rowvec(ad::matmul(h, w), params_v[layer.b_idx[l]]);
    if (l + 1 < n_layers)
      h = (config.activation == nn::Activation::kRelu) ? ad::relu(h) : ad::vtanh(h);
  }
  const int d = target_dim;
  Var shift = ad::cols(h, 0, d);
  Var log_scale =
      ad::clamp(ad::cols(h, d, d), -config.log_scale_clamp, config.log_scale_clamp);
  return {shift, log_scale};
}

Var MafEstimator::log_prob_given_embedded(Tape& tape,
                                          const std::vector<Var>& params_v,
                                          const MatrixXd& targets,
                                          Var embedded) const {
  const int d = target_dim;
  Var y = tape.leaf(target_std.transform(targets));
  Var log_det{};
  bool have_log_det = false;
  for (const auto& layer : layers) {
    Var y_p = ad::matmul(y, tape.leaf(permutation_matrix(layer.perm)));
    auto [shift, log_scale] = masked_net(tape, params_v, layer,
                                         ad::hcat(y_p, embedded));
    y = ad::mul(ad::sub(y_p, shift), ad::vexp(ad::neg(log_scale)));
    Var contrib = ad::scale(ad::rowsum(log_scale), -1.0);
    log_det = have_log_det ? ad::add(log_det, contrib) : contrib;
    have_log_det = true;
  }
  Var base = ad::add_const(ad::scale(ad::rowsum(ad::square(y)), -0.5),
                           -0.5 * d * kLog2Pi);
  return ad::add_const(ad::add(base, log_det), target_std.log_jacobian());
}

Var MafEstimator::log_prob_nodes(Tape& tape, const std::vector<Var>& params_v,
                                 const MatrixXd& targets,
                                 const MatrixXd& conditions) const {
  if (targets.rows() != conditions.rows())
    throw std::invalid_argument("maf: target/condition row mismatch");
  Var cond = tape.leaf(cond_std.transform(conditions));
  Var embedded = embedding.embed_rows(tape, params_v, cond);
  return log_prob_given_embedded(tape, params_v, targets, embedded);
}

VectorXd MafEstimator::log_prob(const MatrixXd& targets,
                                const MatrixXd& conditions) const {
  Tape tape;
  auto leaves = params.leaves(tape);
  Var lp = log_prob_nodes(tape, leaves, targets, conditions);
  return tape.value(lp).col(0);
}

Eigen::RowVectorXd MafEstimator::embed_observation(const MatrixXd& x_obs) const {
  return embedding.embed_set_value(params, cond_std.transform(x_obs));
}

VectorXd MafEstimator::log_prob_obs(const MatrixXd& targets,
                                    const MatrixXd& x_obs) const {
  Eigen::RowVectorXd e = embed_observation(x_obs);
  Tape tape;
  auto leaves = params.leaves(tape);
  MatrixXd embedded = e.replicate(targets.rows(), 1);
  Var lp = log_prob_given_embedded(tape, leaves, targets, tape.leaf(embedded));
  return tape.value(lp).col(0);
}

std::pair<MatrixXd, VectorXd> MafEstimator::forward_transform(
    const MatrixXd& targets_std, const MatrixXd& embedded) const {
  Tape tape;
  auto leaves = params.leaves(tape);
  const int d = target_dim;
  Var y = tape.leaf(targets_std);
  VectorXd log_det = VectorXd::Zero(targets_std.rows());
  for (const auto& layer : layers) {
    Var y_p = ad::matmul(y, tape.leaf(permutation_matrix(layer.perm)));
    auto [shift, log_scale] =
        masked_net(tape, leaves, layer, ad::hcat(y_p, tape.leaf(embedded)));
    y = ad::mul(ad::sub(y_p, shift), ad::vexp(ad::neg(log_scale)));
    log_det -= tape.value(log_scale).rowwise().sum();
  }
  (void)d;
  return {tape.value(y), log_det};
}

MatrixXd MafEstimator::inverse_transform(const MatrixXd& base,
                                         const Eigen::RowVectorXd& embedded) const {
  const int n = static_cast<int>(base.rows());
  const int d = target_dim;
  MatrixXd embedded_rows = embedded.replicate(n, 1);
  MatrixXd y = base;
  for (int t = static_cast<int>(layers.size()) - 1; t >= 0; --t) {
    const Layer& layer = layers[t];
    MatrixXd u = y;
    MatrixXd y_p = MatrixXd::Zero(n, d);
    // sequential per-dimension inversion in the layer's autoregressive order
    for (int i = 0; i < d; ++i) {
      Tape tape;
      auto leaves = params.leaves(tape);
      MatrixXd in(n, d + embedded_rows.cols());
      in << y_p, embedded_rows;
      auto [shift, log_scale] = masked_net(tape, leaves, layer, tape.leaf(in));
      y_p.col(i) = u.col(i).cwiseProduct(
                       tape.value(log_scale).col(i).array().exp().matrix()) +
                   tape.value(shift).col(i);
    }
    for (int i = 0; i < d; ++i) y.col(layer.perm[i]) = y_p.col(i);
  }
  return y;
}

MatrixXd MafEstimator::sample_obs(const MatrixXd& x_obs, int n, Rng& rng) const {
  if (n < 1) throw std::invalid_argument("maf sample: n must be >= 1");
  Eigen::RowVectorXd e = embed_observation(x_obs);
  MatrixXd base = rng.normal_mat(n, target_dim);
  return target_std.inverse(inverse_transform(base, e));
}

nn::LossBuilder MafEstimator::loss_builder() const {
  return [this](Tape& tape, const std::vector<Var>& params_v,
                const MatrixXd& targets, const MatrixXd& conditions,
                std::uint64_t) {
    Var lp = log_prob_nodes(tape, params_v, targets, conditions);
    return ad::scale(ad::mean_all(lp), -1.0);
  };
}

// ---------------------------------------------------------------------------
// RatioClassifier

RatioClassifier RatioClassifier::create(int theta_dim, int x_dim,
                                        const ClassifierConfig& cfg,
                                        const EmbeddingConfig& emb,
                                        std::uint64_t seed) {
  if (theta_dim < 1 || x_dim < 1)
    throw std::invalid_argument("RatioClassifier: dims must be >= 1");
  RatioClassifier c;
  c.theta_dim = theta_dim;
  c.x_dim = x_dim;
  c.config = cfg;
  Rng rng(derive_seed(seed, "nre-init"));
  c.embedding = EmbeddingNet::create(c.params, "embedding", x_dim, emb, rng);
  std::vector<int> widths{theta_dim + c.embedding.output_dim};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  c.net = nn::Mlp::create(c.params, "classifier", widths, cfg.activation, rng);
  c.theta_std = nn::Standardizer::identity(theta_dim);
  c.x_std = nn::Standardizer::identity(x_dim);
  return c;
}

Var RatioClassifier::logit_nodes(Tape& tape, const std::vector<Var>& params_v,
                                 const MatrixXd& thetas, const MatrixXd& xs) const {
  if (thetas.rows() != xs.rows())
    throw std::invalid_argument("classifier: theta/x row mismatch");
  Var t = tape.leaf(theta_std.transform(thetas));
  Var x = tape.leaf(x_std.transform(xs));
  Var e = embedding.embed_rows(tape, params_v, x);
  return net.forward(tape, params_v, ad::hcat(t, e));
}

VectorXd RatioClassifier::logit(const MatrixXd& thetas, const MatrixXd& xs) const {
  Tape tape;
  auto leaves = params.leaves(tape);
  return tape.value(logit_nodes(tape, leaves, thetas, xs)).col(0);
}

VectorXd RatioClassifier::logit_obs(const MatrixXd& thetas,
                                    const MatrixXd& x_obs) const {
  Eigen::RowVectorXd e =
      embedding.embed_set_value(params, x_std.transform(x_obs));
  Tape tape;
  auto leaves = params.leaves(tape);
  Var t = tape.leaf(theta_std.transform(thetas));
  Var emb = tape.leaf(MatrixXd(e.replicate(thetas.rows(), 1)));
  Var out = net.forward(tape, leaves, ad::hcat(t, emb));
  return tape.value(out).col(0);
}

Var RatioClassifier::loss_nodes(Tape& tape, const std::vector<Var>& params_v,
                                const MatrixXd& thetas, const MatrixXd& xs,
                                std::uint64_t stream) const {
  const int n = static_cast<int>(thetas.rows());
  if (n < 2)
    throw std::invalid_argument("classifier loss: needs a batch of >= 2 pairs");
  Rng rng(derive_seed(stream, "nre-shuffle"));
  int shift = 1 + rng.index(n - 1);  // nonzero rotation, no fixed points
  MatrixXd theta_rot(n, thetas.cols());
  for (int i = 0; i < n; ++i) theta_rot.row(i) = thetas.row((i + shift) % n);

  Var logit_joint = logit_nodes(tape, params_v, thetas, xs);
  Var logit_marg = logit_nodes(tape, params_v, theta_rot, xs);
  // binary cross-entropy with logits: labels 1 on joint, 0 on rotated
  Var loss_joint = ad::mean_all(ad::softplus(ad::neg(logit_joint)));
  Var loss_marg = ad::mean_all(ad::softplus(logit_marg));
  return ad::scale(ad::add(loss_joint, loss_marg), 0.5);
}

double RatioClassifier::loss(const MatrixXd& thetas, const MatrixXd& xs,
                             std::uint64_t stream) const {
  Tape tape;
  auto leaves = params.leaves(tape);
  return tape.value(loss_nodes(tape, leaves, thetas, xs, stream))(0, 0);
}

nn::LossBuilder RatioClassifier::loss_builder() const {
  return [this](Tape& tape, const std::vector<Var>& params_v,
                const MatrixXd& thetas, const MatrixXd& xs, std::uint64_t stream) {
    return loss_nodes(tape, params_v, thetas, xs, stream);
  };
}

}  // namespace sbikit::est
