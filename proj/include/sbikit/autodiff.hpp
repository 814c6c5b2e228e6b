#pragma once

#include <functional>
#include <vector>

#include "sbikit/common.hpp"

namespace sbikit::ad {

class Tape;

/// Handle to a matrix-valued node on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

/// Reverse-mode tape over matrix-valued nodes. Construction order is the
/// topological order, so backward() is a single reverse sweep. Shape
/// mismatches are rejected when the op is built, never during backward.
class Tape {
 public:
  Var leaf(MatrixXd value, bool requires_grad = false);

  const MatrixXd& value(Var v) const { return node(v).value; }

  /// Gradient of the last backward() loss w.r.t. v. Zero if untouched.
  MatrixXd grad(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. loss must
  /// be 1x1.
  void backward(Var loss);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    MatrixXd value;
    MatrixXd grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    std::function<void(Tape&, int self, const MatrixXd& g)> backprop;
  };

  Node& node(Var v) {
    if (v.tape != this || v.id < 0 || v.id >= size())
      throw std::invalid_argument("Var does not belong to this tape");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    return const_cast<Tape*>(this)->node(v);
  }

  Var emplace(MatrixXd value, bool requires_grad,
              std::function<void(Tape&, int, const MatrixXd&)> backprop);
  void accum(int id, const MatrixXd& g);

  std::vector<Node> nodes_;

  friend Var add(Var, Var);
  friend Var add_rowvec(Var, Var);
  friend Var sub(Var, Var);
  friend Var sub_colvec(Var, Var);
  friend Var neg(Var);
  friend Var mul(Var, Var);
  friend Var divv(Var, Var);
  friend Var scale(Var, double);
  friend Var add_const(Var, double);
  friend Var mul_mask(Var, const MatrixXd&);
  friend Var matmul(Var, Var);
  friend Var relu(Var);
  friend Var vtanh(Var);
  friend Var vexp(Var);
  friend Var vlog(Var);
  friend Var softplus(Var);
  friend Var clamp(Var, double, double);
  friend Var square(Var);
  friend Var sum_all(Var);
  friend Var mean_all(Var);
  friend Var rowsum(Var);
  friend Var colsum(Var);
  friend Var logsumexp_rows(Var);
  friend Var log_softmax_rows(Var);
  friend Var hcat(Var, Var);
  friend Var cols(Var, int, int);
};

// Elementwise and structural ops. All shape checks happen here.
Var add(Var a, Var b);                  // same shape
Var add_rowvec(Var a, Var b);           // [n x m] + [1 x m]
Var sub(Var a, Var b);                  // same shape
Var sub_colvec(Var a, Var b);           // [n x m] - [n x 1] broadcast
Var neg(Var a);
Var mul(Var a, Var b);                  // elementwise, same shape
Var divv(Var a, Var b);                 // elementwise, same shape
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var mul_mask(Var a, const MatrixXd& mask);  // elementwise by a constant
Var matmul(Var a, Var b);
Var relu(Var a);
Var vtanh(Var a);
Var vexp(Var a);
Var vlog(Var a);
Var softplus(Var a);
Var clamp(Var a, double lo, double hi);  // gradient zero outside (lo, hi)
Var square(Var a);
Var sum_all(Var a);                      // -> [1 x 1]
Var mean_all(Var a);                     // -> [1 x 1]
Var rowsum(Var a);                       // [n x m] -> [n x 1]
Var colsum(Var a);                       // [n x m] -> [1 x m]
Var logsumexp_rows(Var a);               // [n x m] -> [n x 1]
Var log_softmax_rows(Var a);             // [n x m] -> [n x m]
Var hcat(Var a, Var b);
Var cols(Var a, int start, int len);

}  // namespace sbikit::ad
