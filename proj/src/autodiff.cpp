#include "sbikit/autodiff.hpp"

namespace sbikit::ad {

namespace {

void check_same_shape(const MatrixXd& a, const MatrixXd& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
}

void check_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape)
    throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

double stable_sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

double stable_softplus(double x) {
  return x >= 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

Var Tape::leaf(MatrixXd value, bool requires_grad) {
  return emplace(std::move(value), requires_grad, nullptr);
}

Var Tape::emplace(MatrixXd value, bool requires_grad,
                  std::function<void(Tape&, int, const MatrixXd&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{this, size() - 1};
}

void Tape::accum(int id, const MatrixXd& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

MatrixXd Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return MatrixXd::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  Node& ln = node(loss);
  if (ln.value.rows() != 1 || ln.value.cols() != 1)
    throw std::invalid_argument("backward: loss must be a 1x1 node");
  if (!std::isfinite(ln.value(0, 0)))
    throw NumericError("backward: loss is not finite");
  accum(loss.id, MatrixXd::Ones(1, 1));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backprop) continue;
    n.backprop(*this, i, n.grad);
  }
}

// --- binary elementwise -----------------------------------------------------

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  Tape& t = *a.tape;
  check_same_shape(t.value(a), t.value(b), "add");
  bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  int pa = a.id, pb = b.id;
  return t.emplace(t.value(a) + t.value(b), rg,
                   [pa, pb](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, g);
                     t.accum(pb, g);
                   });
}

Var add_rowvec(Var a, Var b) {
  check_same_tape(a, b, "add_rowvec");
  Tape& t = *a.tape;
  const MatrixXd& av = t.value(a);
  const MatrixXd& bv = t.value(b);
  if (bv.rows() != 1 || bv.cols() != av.cols())
    throw std::invalid_argument("add_rowvec: b must be [1 x cols(a)]");
  bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  int pa = a.id, pb = b.id;
  MatrixXd out = av;
  out.rowwise() += bv.row(0);
  return t.emplace(std::move(out), rg,
                   [pa, pb](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, g);
                     t.accum(pb, g.colwise().sum());
                   });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  Tape& t = *a.tape;
  check_same_shape(t.value(a), t.value(b), "sub");
  bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  int pa = a.id, pb = b.id;
  return t.emplace(t.value(a) - t.value(b), rg,
                   [pa, pb](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, g);
                     t.accum(pb, -g);
                   });
}

Var sub_colvec(Var a, Var b) {
  check_same_tape(a, b, "sub_colvec");
  Tape& t = *a.tape;
  const MatrixXd& av = t.value(a);
  const MatrixXd& bv = t.value(b);
  if (bv.cols() != 1 || bv.rows() != av.rows())
    throw std::invalid_argument("sub_colvec: b must be [rows(a) x 1]");
  bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  int pa = a.id, pb = b.id;
  MatrixXd out = av;
  out.colwise() -= bv.col(0);
  return t.emplace(std::move(out), rg,
                   [pa, pb](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, g);
                     t.accum(pb, -g.rowwise().sum());
                   });
}

Var neg(Var a) { return scale(a, -1.0); }

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  Tape& t = *a.tape;
  check_same_shape(t.value(a), t.value(b), "mul");
  bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  int pa = a.id, pb = b.id;
  return t.emplace(t.value(a).cwiseProduct(t.value(b)), rg,
                   [pa, pb](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, g.cwiseProduct(t.nodes_[pb].value));
                     t.accum(pb, g.cwiseProduct(t.nodes_[pa].value));
                   });
}

Var divv(Var a, Var b) {
  check_same_tape(a, b, "div");
  Tape& t = *a.tape;
  check_same_shape(t.value(a), t.value(b), "div");
  bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  int pa = a.id, pb = b.id;
  return t.emplace(t.value(a).cwiseQuotient(t.value(b)), rg,
                   [pa, pb](Tape& t, int self, const MatrixXd& g) {
                     const MatrixXd& bv = t.nodes_[pb].value;
                     t.accum(pa, g.cwiseQuotient(bv));
                     t.accum(pb, -g.cwiseProduct(t.nodes_[self].value).cwiseQuotient(bv));
                   });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(c * t.value(a), t.node(a).requires_grad,
                   [pa, c](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, c * g);
                   });
}

Var add_const(Var a, double c) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(t.value(a).array() + c, t.node(a).requires_grad,
                   [pa](Tape& t, int, const MatrixXd& g) { t.accum(pa, g); });
}

Var mul_mask(Var a, const MatrixXd& mask) {
  Tape& t = *a.tape;
  check_same_shape(t.value(a), mask, "mul_mask");
  int pa = a.id;
  return t.emplace(t.value(a).cwiseProduct(mask), t.node(a).requires_grad,
                   [pa, mask](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, g.cwiseProduct(mask));
                   });
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  Tape& t = *a.tape;
  if (t.value(a).cols() != t.value(b).rows())
    throw std::invalid_argument("matmul: inner dimensions do not match");
  bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  int pa = a.id, pb = b.id;
  return t.emplace(t.value(a) * t.value(b), rg,
                   [pa, pb](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, g * t.nodes_[pb].value.transpose());
                     t.accum(pb, t.nodes_[pa].value.transpose() * g);
                   });
}

// --- unary elementwise ------------------------------------------------------

Var relu(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(t.value(a).cwiseMax(0.0), t.node(a).requires_grad,
                   [pa](Tape& t, int, const MatrixXd& g) {
                     const MatrixXd& av = t.nodes_[pa].value;
                     t.accum(pa, (av.array() > 0.0).cast<double>().matrix().cwiseProduct(g));
                   });
}

Var vtanh(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(t.value(a).array().tanh(), t.node(a).requires_grad,
                   [pa](Tape& t, int self, const MatrixXd& g) {
                     const MatrixXd& y = t.nodes_[self].value;
                     t.accum(pa, ((1.0 - y.array().square()) * g.array()).matrix());
                   });
}

Var vexp(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(t.value(a).array().exp(), t.node(a).requires_grad,
                   [pa](Tape& t, int self, const MatrixXd& g) {
                     t.accum(pa, g.cwiseProduct(t.nodes_[self].value));
                   });
}

Var vlog(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(t.value(a).array().log(), t.node(a).requires_grad,
                   [pa](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, g.cwiseQuotient(t.nodes_[pa].value));
                   });
}

Var softplus(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(t.value(a).unaryExpr([](double x) { return stable_softplus(x); }),
                   t.node(a).requires_grad,
                   [pa](Tape& t, int, const MatrixXd& g) {
                     MatrixXd s = t.nodes_[pa].value.unaryExpr(
                         [](double x) { return stable_sigmoid(x); });
                     t.accum(pa, g.cwiseProduct(s));
                   });
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(t.value(a).cwiseMax(lo).cwiseMin(hi), t.node(a).requires_grad,
                   [pa, lo, hi](Tape& t, int, const MatrixXd& g) {
                     const auto& av = t.nodes_[pa].value.array();
                     MatrixXd pass =
                         ((av > lo) && (av < hi)).cast<double>().matrix();
                     t.accum(pa, g.cwiseProduct(pass));
                   });
}

Var square(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(t.value(a).array().square(), t.node(a).requires_grad,
                   [pa](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, 2.0 * g.cwiseProduct(t.nodes_[pa].value));
                   });
}

// --- reductions ---------------------------------------------------------

Var sum_all(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  MatrixXd out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.emplace(std::move(out), t.node(a).requires_grad,
                   [pa](Tape& t, int, const MatrixXd& g) {
                     const MatrixXd& av = t.nodes_[pa].value;
                     t.accum(pa, MatrixXd::Constant(av.rows(), av.cols(), g(0, 0)));
                   });
}

Var mean_all(Var a) {
  Tape& t = *a.tape;
  double n = static_cast<double>(t.value(a).size());
  return scale(sum_all(a), 1.0 / n);
}

Var rowsum(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(t.value(a).rowwise().sum(), t.node(a).requires_grad,
                   [pa](Tape& t, int, const MatrixXd& g) {
                     const MatrixXd& av = t.nodes_[pa].value;
                     t.accum(pa, g * Eigen::RowVectorXd::Ones(av.cols()));
                   });
}

Var colsum(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  return t.emplace(t.value(a).colwise().sum(), t.node(a).requires_grad,
                   [pa](Tape& t, int, const MatrixXd& g) {
                     const MatrixXd& av = t.nodes_[pa].value;
                     t.accum(pa, Eigen::VectorXd::Ones(av.rows()) * g);
                   });
}

namespace {

MatrixXd softmax_rows_value(const MatrixXd& a) {
  MatrixXd s(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    double m = a.row(i).maxCoeff();
    Eigen::RowVectorXd e = (a.row(i).array() - m).exp();
    s.row(i) = e / e.sum();
  }
  return s;
}

}  // namespace

Var logsumexp_rows(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  const MatrixXd& av = t.value(a);
  MatrixXd out(av.rows(), 1);
  for (int i = 0; i < av.rows(); ++i) {
    double m = av.row(i).maxCoeff();
    out(i, 0) = m + std::log((av.row(i).array() - m).exp().sum());
  }
  return t.emplace(std::move(out), t.node(a).requires_grad,
                   [pa](Tape& t, int, const MatrixXd& g) {
                     MatrixXd sm = softmax_rows_value(t.nodes_[pa].value);
                     t.accum(pa, sm.array().colwise() * g.col(0).array());
                   });
}

Var log_softmax_rows(Var a) {
  Tape& t = *a.tape;
  int pa = a.id;
  const MatrixXd& av = t.value(a);
  MatrixXd out(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i) {
    double m = av.row(i).maxCoeff();
    double lse = m + std::log((av.row(i).array() - m).exp().sum());
    out.row(i) = av.row(i).array() - lse;
  }
  return t.emplace(std::move(out), t.node(a).requires_grad,
                   [pa](Tape& t, int self, const MatrixXd& g) {
                     MatrixXd sm = t.nodes_[self].value.array().exp();
                     Eigen::VectorXd rs = g.rowwise().sum();
                     t.accum(pa, g - (sm.array().colwise() * rs.array()).matrix());
                   });
}

// --- structural -----------------------------------------------------------

Var hcat(Var a, Var b) {
  check_same_tape(a, b, "hcat");
  Tape& t = *a.tape;
  const MatrixXd& av = t.value(a);
  const MatrixXd& bv = t.value(b);
  if (av.rows() != bv.rows())
    throw std::invalid_argument("hcat: row counts do not match");
  bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  int pa = a.id, pb = b.id;
  int ac = static_cast<int>(av.cols());
  int bc = static_cast<int>(bv.cols());
  MatrixXd out(av.rows(), ac + bc);
  out << av, bv;
  return t.emplace(std::move(out), rg,
                   [pa, pb, ac, bc](Tape& t, int, const MatrixXd& g) {
                     t.accum(pa, g.leftCols(ac));
                     t.accum(pb, g.rightCols(bc));
                   });
}

Var cols(Var a, int start, int len) {
  Tape& t = *a.tape;
  const MatrixXd& av = t.value(a);
  if (start < 0 || len < 1 || start + len > av.cols())
    throw std::invalid_argument("cols: slice out of range");
  int pa = a.id;
  return t.emplace(av.middleCols(start, len), t.node(a).requires_grad,
                   [pa, start, len](Tape& t, int, const MatrixXd& g) {
                     const MatrixXd& av = t.nodes_[pa].value;
                     MatrixXd full = MatrixXd::Zero(av.rows(), av.cols());
                     full.middleCols(start, len) = g;
                     t.accum(pa, full);
                   });
}

}  // namespace sbikit::ad
