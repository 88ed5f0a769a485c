#include "uniconn/tensor.hpp"

#include <cmath>

namespace uniconn {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

namespace ad {

namespace {

void require_same_tape(const char* op, Var a, Var b) {
  if (&a.tape() != &b.tape()) throw InvalidArgument(std::string(op) + ": operands on different tapes");
}

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_same_shape(const char* op, Var a, Var b) {
  require_same_tape(op, a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail(op, a.value(), b.value());
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("scalar: expected 1x1, got " + shape_str(v));
  return v(0, 0);
}

int Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ < 0 || v.id_ >= static_cast<int>(nodes_.size())) {
    throw InvalidArgument("variable does not belong to this tape");
  }
  return v.id_;
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{"constant", std::move(value), Matrix(), false, true, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  nodes_.push_back(Node{"leaf", std::move(value), Matrix(), requires_grad, true, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::watch(const Matrix& param) { watched_.insert(&param); }

Var Tape::param(const Matrix& param) {
  if (auto it = params_.find(&param); it != params_.end()) return Var(this, it->second);
  Var v = leaf(param, watched(param));
  nodes_[v.id_].op = "param";
  params_.emplace(&param, v.id_);
  return v;
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = nodes_[check(v)];
  if (!n.requires_grad) throw InvalidArgument("grad: node does not require grad");
  if (n.grad.size() == 0) throw InvalidArgument("grad: backward() has not reached this node");
  return n.grad;
}

Matrix Tape::grad_of(const Matrix& param) const {
  auto it = params_.find(&param);
  if (it == params_.end() || !nodes_[it->second].requires_grad || nodes_[it->second].grad.size() == 0) {
    return Matrix::Zero(param.rows(), param.cols());
  }
  return nodes_[it->second].grad;
}

Var Tape::record(const char* op, Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool rg = false;
  for (Var in : inputs) rg = rg || nodes_[check(in)].requires_grad;
  nodes_.push_back(Node{op, std::move(value), Matrix(), rg, false, rg ? Backward(std::move(backward)) : Backward()});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(Var loss) {
  const int root = check(loss);
  if (nodes_[root].value.size() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(nodes_[root].value));
  }
  if (backward_done_) throw InvalidArgument("backward: tape already consumed");
  backward_done_ = true;
  if (!nodes_[root].requires_grad) return;
  nodes_[root].grad = Matrix::Ones(1, 1);
  for (int id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, id);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.is_leaf || !n.requires_grad) continue;
    if (n.grad.size() == 0) {
      n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    } else if (!n.grad.allFinite()) {
      throw NonFiniteError("backward: non-finite gradient at leaf #" + std::to_string(i));
    }
  }
}

std::optional<std::pair<int, std::string>> Tape::first_non_finite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].value.allFinite()) return std::make_pair(static_cast<int>(i), std::string(nodes_[i].op));
  }
  return std::nullopt;
}

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  if (a.cols() != b.rows()) shape_fail("matmul", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.tape().record("matmul", a.value() * b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value_at(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value_at(ia).transpose() * g);
  });
}

Var transpose(Var a) {
  const int ia = a.id();
  return a.tape().record("transpose", a.value().transpose(), {a},
                         [ia](Tape& t, int self) { t.accumulate(ia, t.grad_at(self).transpose()); });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().record("add", a.value() + b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad_at(self));
    t.accumulate(ib, t.grad_at(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().record("sub", a.value() - b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad_at(self));
    t.accumulate(ib, -t.grad_at(self));
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().record("mul", a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value_at(ib)));
    if (t.needs_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value_at(ia)));
  });
}

Var scale(Var a, double s) {
  const int ia = a.id();
  return a.tape().record("scale", a.value() * s, {a},
                         [ia, s](Tape& t, int self) { t.accumulate(ia, t.grad_at(self) * s); });
}

Var shift(Var a, double c) {
  const int ia = a.id();
  return a.tape().record("shift", (a.value().array() + c).matrix(), {a},
                         [ia](Tape& t, int self) { t.accumulate(ia, t.grad_at(self)); });
}

Var concat_cols(Var a, Var b) {
  require_same_tape("concat_cols", a, b);
  if (a.rows() != b.rows()) shape_fail("concat_cols", a.value(), b.value());
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const int ia = a.id(), ib = b.id();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return a.tape().record("concat_cols", std::move(out), {a, b}, [ia, ib, ca, cb](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    t.accumulate(ia, g.leftCols(ca));
    t.accumulate(ib, g.rightCols(cb));
  });
}

Var row_mean(Var a) {
  const int ia = a.id();
  const Eigen::Index c = a.cols();
  return a.tape().record("row_mean", a.value().rowwise().mean(), {a}, [ia, c](Tape& t, int self) {
    t.accumulate(ia, (t.grad_at(self) / static_cast<double>(c)).replicate(1, c));
  });
}

Var col_mean(Var a) {
  const int ia = a.id();
  const Eigen::Index r = a.rows();
  return a.tape().record("col_mean", a.value().colwise().mean(), {a}, [ia, r](Tape& t, int self) {
    t.accumulate(ia, (t.grad_at(self) / static_cast<double>(r)).replicate(r, 1));
  });
}

Var sigmoid(Var a) {
  const int ia = a.id();
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape().record("sigmoid", std::move(y), {a}, [ia](Tape& t, int self) {
    const auto y = t.value_at(self).array();
    t.accumulate(ia, (t.grad_at(self).array() * y * (1.0 - y)).matrix());
  });
}

Var tanh(Var a) {
  const int ia = a.id();
  return a.tape().record("tanh", a.value().array().tanh().matrix(), {a}, [ia](Tape& t, int self) {
    const auto y = t.value_at(self).array();
    t.accumulate(ia, (t.grad_at(self).array() * (1.0 - y.square())).matrix());
  });
}

Var relu(Var a) {
  const int ia = a.id();
  return a.tape().record("relu", a.value().cwiseMax(0.0), {a}, [ia](Tape& t, int self) {
    const auto x = t.value_at(ia).array();
    t.accumulate(ia, (t.grad_at(self).array() * (x > 0.0).cast<double>()).matrix());
  });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix y = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
  y.array().colwise() /= y.rowwise().sum().array();
  const int ia = a.id();
  return a.tape().record("softmax_rows", std::move(y), {a}, [ia](Tape& t, int self) {
    const Matrix& y = t.value_at(self);
    const Matrix& g = t.grad_at(self);
    const Vector dot = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(ia, (y.array() * (g.colwise() - dot).array()).matrix());
  });
}

Var log(Var a) {
  const Matrix& x = a.value();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x(i, j) <= 0.0) {
        throw DomainError("log: non-positive input " + std::to_string(x(i, j)) + " at (" + std::to_string(i) +
                          ", " + std::to_string(j) + ")");
      }
    }
  }
  const int ia = a.id();
  return a.tape().record("log", x.array().log().matrix(), {a}, [ia](Tape& t, int self) {
    t.accumulate(ia, (t.grad_at(self).array() / t.value_at(ia).array()).matrix());
  });
}

Var abs_sum(Var a) {
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().cwiseAbs().sum();
  return a.tape().record("abs_sum", std::move(out), {a}, [ia](Tape& t, int self) {
    const double g = t.grad_at(self)(0, 0);
    // sign(x) with subgradient 0 at exactly 0
    t.accumulate(ia, (t.value_at(ia).array().sign() * g).matrix());
  });
}

Var sum(Var a) {
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record("sum", std::move(out), {a}, [ia, r, c](Tape& t, int self) {
    t.accumulate(ia, Matrix::Constant(r, c, t.grad_at(self)(0, 0)));
  });
}

Var broadcast_rows(Var row, Eigen::Index rows) {
  if (row.rows() != 1) {
    throw ShapeError("broadcast_rows: expected a 1xC row, got " + shape_str(row.value()));
  }
  const int ir = row.id();
  return row.tape().record("broadcast_rows", row.value().replicate(rows, 1), {row}, [ir](Tape& t, int self) {
    t.accumulate(ir, t.grad_at(self).colwise().sum());
  });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw InvalidArgument("clamp: lo > hi");
  const int ia = a.id();
  return a.tape().record("clamp", a.value().cwiseMax(lo).cwiseMin(hi), {a}, [ia, lo, hi](Tape& t, int self) {
    const auto x = t.value_at(ia).array();
    t.accumulate(ia, (t.grad_at(self).array() * ((x >= lo) && (x <= hi)).cast<double>()).matrix());
  });
}

Var flatten_rows(Var a) {
  const Matrix& x = a.value();
  const Eigen::Index r = x.rows(), c = x.cols();
  Matrix out(1, r * c);
  for (Eigen::Index i = 0; i < r; ++i) out.block(0, i * c, 1, c) = x.row(i);
  const int ia = a.id();
  return a.tape().record("flatten_rows", std::move(out), {a}, [ia, r, c](Tape& t, int self) {
    const Matrix& g = t.grad_at(self);
    Matrix back(r, c);
    for (Eigen::Index i = 0; i < r; ++i) back.row(i) = g.block(0, i * c, 1, c);
    t.accumulate(ia, back);
  });
}

Var detach(Var a) { return a.tape().constant(a.value()); }

}  // namespace ad
}  // namespace uniconn
