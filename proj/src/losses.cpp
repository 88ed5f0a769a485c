#include "uniconn/losses.hpp"

#include <cmath>

#include "json.hpp"

namespace uniconn {

namespace {

void require_unit_interval(const Matrix& target, const char* where) {
  if (!target.allFinite() || (target.array() < 0.0).any() || (target.array() > 1.0).any()) {
    throw DomainError(std::string(where) + ": targets must lie in [0, 1]");
  }
}

}  // namespace

ad::Var bce(const Matrix& target, ad::Var pred) {
  if (target.rows() != pred.rows() || target.cols() != pred.cols()) {
    throw ShapeError("bce: shape mismatch " + shape_str(target) + " vs " + shape_str(pred.value()));
  }
  require_unit_interval(target, "bce");
  ad::Tape& t = pred.tape();
  ad::Var p = ad::clamp(pred, kProbEps, 1.0 - kProbEps);
  ad::Var y = t.constant(target);
  ad::Var one_minus_y = t.constant((1.0 - target.array()).matrix());
  ad::Var ll = ad::mul(y, ad::log(p)) + ad::mul(one_minus_y, ad::log(ad::shift(-p, 1.0)));
  return -ad::mean(ll);
}

double bce(const Matrix& target, const Matrix& pred) {
  if (target.rows() != pred.rows() || target.cols() != pred.cols()) {
    throw ShapeError("bce: shape mismatch " + shape_str(target) + " vs " + shape_str(pred));
  }
  require_unit_interval(target, "bce");
  const auto p = pred.array().max(kProbEps).min(1.0 - kProbEps);
  const auto ll = target.array() * p.log() + (1.0 - target.array()) * (1.0 - p).log();
  return -ll.mean();
}

ad::Var rec_loss(const Matrix& x, ad::Var x_rec, const Matrix& a, ad::Var a_rec, const Matrix& v, ad::Var v_rec) {
  return bce(x, x_rec) + bce(a, a_rec) + bce(v, v_rec);
}

ad::Var cross_entropy(ad::Var logits, int label) {
  if (logits.rows() != 1 || label < 0 || label >= logits.cols()) {
    throw ShapeError("cross_entropy: logits " + shape_str(logits.value()) + " with label " + std::to_string(label));
  }
  Matrix onehot = Matrix::Zero(1, logits.cols());
  onehot(0, label) = 1.0;
  ad::Var prob = ad::sum(ad::mul(ad::softmax_rows(logits), logits.tape().constant(std::move(onehot))));
  return -ad::log(ad::clamp(prob, kProbEps, 1.0));
}

double cross_entropy(const Matrix& logits, int label) {
  if (logits.rows() != 1 || label < 0 || label >= logits.cols()) {
    throw ShapeError("cross_entropy: logits " + shape_str(logits) + " with label " + std::to_string(label));
  }
  const double top = logits.maxCoeff();
  const double z = (logits.array() - top).exp().sum();
  const double prob = std::exp(logits(0, label) - top) / z;
  return -std::log(std::max(prob, kProbEps));
}

ad::Var cls_loss(ad::Var logits_c1_z, ad::Var logits_c1_v, ad::Var logits_c2, int label) {
  return cross_entropy(logits_c1_z, label) + cross_entropy(logits_c1_v, label) + cross_entropy(logits_c2, label);
}

ad::Var sparse_loss(ad::Var m) { return ad::abs_sum(m); }
double sparse_loss(const Matrix& m) { return m.cwiseAbs().sum(); }

void LossReport::finalize(double lambda) {
  adv = g_loss + kAdvDiscWeight * d_loss;
  total = adv + rec1 + rec2 + cls1 + cls2 + cls3 + lambda * sparse;
}

LossReport& LossReport::operator+=(const LossReport& o) {
  d_loss += o.d_loss;
  g_loss += o.g_loss;
  adv += o.adv;
  rec1 += o.rec1;
  rec2 += o.rec2;
  cls1 += o.cls1;
  cls2 += o.cls2;
  cls3 += o.cls3;
  sparse += o.sparse;
  total += o.total;
  return *this;
}

LossReport& LossReport::operator*=(double s) {
  d_loss *= s;
  g_loss *= s;
  adv *= s;
  rec1 *= s;
  rec2 *= s;
  cls1 *= s;
  cls2 *= s;
  cls3 *= s;
  sparse *= s;
  total *= s;
  return *this;
}

std::string LossReport::to_json() const {
  nlohmann::ordered_json j;
  j["d_loss"] = d_loss;
  j["g_loss"] = g_loss;
  j["adv"] = adv;
  j["rec1"] = rec1;
  j["rec2"] = rec2;
  j["cls1"] = cls1;
  j["cls2"] = cls2;
  j["cls3"] = cls3;
  j["sparse"] = sparse;
  j["total"] = total;
  return j.dump();
}

}  // namespace uniconn
