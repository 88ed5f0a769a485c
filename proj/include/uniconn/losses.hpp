#pragma once

#include <string>

#include "uniconn/tensor.hpp"

namespace uniconn {

inline constexpr double kProbEps = 1e-7;
/// Weight of the discriminator loss inside the adversarial total.
inline constexpr double kAdvDiscWeight = 0.1;

/// Batch means of discriminator scores. d_z and d_x score the real pairs;
/// d_gz, d_g1, d_s score the pairs built from G2(Z), G1 and S outputs.
template <class T>
struct AdvScores {
  T d_z, d_x, d_gz, d_g1, d_s;
};

template <class T>
struct AdvLosses {
  T d;    // discriminator
  T g;    // generator side
  T adv;  // g + 0.1 d
};

template <class T>
AdvLosses<T> adv_losses(const AdvScores<T>& s) {
  T d = -s.d_z - 2.0 * s.d_x + s.d_gz + s.d_g1 + s.d_s;
  T g = -(s.d_gz + s.d_g1 + s.d_s);
  T adv = g + kAdvDiscWeight * d;
  return {d, g, adv};
}

/// Negated mean binary log-likelihood; predictions clamped to [eps, 1 - eps].
/// Targets must lie in [0, 1].
ad::Var bce(const Matrix& target, ad::Var pred);
double bce(const Matrix& target, const Matrix& pred);

ad::Var rec_loss(const Matrix& x, ad::Var x_rec, const Matrix& a, ad::Var a_rec, const Matrix& v, ad::Var v_rec);

/// Cross-entropy of 1 x C logits against a class index.
ad::Var cross_entropy(ad::Var logits, int label);
double cross_entropy(const Matrix& logits, int label);

ad::Var cls_loss(ad::Var logits_c1_z, ad::Var logits_c1_v, ad::Var logits_c2, int label);

/// L1 norm of M.
ad::Var sparse_loss(ad::Var m);
double sparse_loss(const Matrix& m);

struct LossReport {
  double d_loss = 0, g_loss = 0, adv = 0;
  double rec1 = 0, rec2 = 0;
  double cls1 = 0, cls2 = 0, cls3 = 0;
  double sparse = 0;
  double total = 0;

  /// Sets adv and total from the parts.
  void finalize(double lambda);
  LossReport& operator+=(const LossReport& o);
  LossReport& operator*=(double s);
  std::string to_json() const;
};

}  // namespace uniconn
