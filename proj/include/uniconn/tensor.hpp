#pragma once

// Dense reverse-mode automatic differentiation over double matrices.
//
// A Tape records every primitive applied during one forward pass
// (define-by-run). Var is a cheap handle to a recorded node. Gradients are
// accumulated, never overwritten, while walking the tape in exact reverse
// order. Separate tapes share no state and may live on different threads.

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "uniconn/error.hpp"

namespace uniconn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

std::string shape_str(const Matrix& m);

namespace ad {

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Pulls the node's own gradient and pushes contributions to its inputs.
  using Backward = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var leaf(Matrix value, bool requires_grad = true);

  /// Marks an externally owned parameter matrix as trainable for this tape.
  void watch(const Matrix& param);
  bool watched(const Matrix& param) const { return watched_.contains(&param); }

  /// Leaf for an externally owned parameter. The same matrix always maps to
  /// the same node, so reuse across subjects accumulates gradients.
  Var param(const Matrix& param);

  const Matrix& value(Var v) const { return nodes_[check(v)].value; }
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }

  /// Gradient of the last backward() w.r.t. a watched parameter; zeros when
  /// the parameter was not reached.
  Matrix grad_of(const Matrix& param) const;

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  /// Index and op name of the first node holding a NaN/inf value.
  std::optional<std::pair<int, std::string>> first_non_finite() const;

  // Primitive-author interface.
  Var record(const char* op, Matrix value, std::initializer_list<Var> inputs, Backward backward);
  const Matrix& value_at(int id) const { return nodes_[id].value; }
  const Matrix& grad_at(int id) const { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].requires_grad; }

  template <class Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

 private:
  struct Node {
    const char* op;
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool is_leaf = false;
    Backward backward;
  };

  int check(Var v) const;

  std::deque<Node> nodes_;
  std::unordered_map<const Matrix*, int> params_;
  std::unordered_set<const Matrix*> watched_;
  bool backward_done_ = false;
};

// Primitive set. Every primitive validates shapes and raises ShapeError
// naming the operation and both shapes.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // element-wise
Var scale(Var a, double s);
Var shift(Var a, double c);  // a + c element-wise
Var concat_cols(Var a, Var b);
Var row_mean(Var a);  // R x C -> R x 1
Var col_mean(Var a);  // R x C -> 1 x C
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var softmax_rows(Var a);
Var log(Var a);
Var abs_sum(Var a);  // L1 norm, 1 x 1
Var sum(Var a);      // 1 x 1
Var broadcast_rows(Var row, Eigen::Index rows);  // 1 x C -> rows x C
Var clamp(Var a, double lo, double hi);
Var flatten_rows(Var a);  // row-major R x C -> 1 x (R*C)
Var detach(Var a);

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }

}  // namespace ad
}  // namespace uniconn
