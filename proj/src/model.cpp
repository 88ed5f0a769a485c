#include "uniconn/model.hpp"

#include <cmath>

namespace uniconn {

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-s, s);
  Matrix w(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = u(rng);
  }
  return w;
}

Mlp init_mlp(int in, int hidden, int out, std::mt19937_64& rng) {
  Mlp m;
  m.w1 = glorot_uniform(in, hidden, rng);
  m.b1 = Matrix::Zero(1, hidden);
  m.w2 = glorot_uniform(hidden, out, rng);
  m.b2 = Matrix::Zero(1, out);
  return m;
}

namespace {

GcnStack init_gcn(int in, int hidden, int out, Activation act1, Activation act2, std::mt19937_64& rng) {
  GcnStack g;
  g.w1 = glorot_uniform(in, hidden, rng);
  g.w2 = glorot_uniform(hidden, out, rng);
  g.act1 = act1;
  g.act2 = act2;
  return g;
}

DiscBranch init_branch(int feat, int n, int c, std::mt19937_64& rng) {
  DiscBranch b;
  b.w_feat = glorot_uniform(feat, c, rng);
  b.b_feat = Matrix::Zero(1, c);
  b.w_node = glorot_uniform(n, c, rng);
  b.w_out = glorot_uniform(c, c, rng);
  b.b_out = Matrix::Zero(1, 1);
  return b;
}

}  // namespace

ModelParams init_model_params(const ModelDims& dims, std::mt19937_64& rng) {
  const int d = dims.fts_dim, q = dims.latent_dim, h = dims.hidden(), n = dims.n_rois, c = dims.disc_channels;
  ModelParams p;
  p.g1 = init_gcn(d, h, q, Activation::kTanh, Activation::kTanh, rng);
  p.g2 = init_gcn(q, h, d, Activation::kTanh, Activation::kSigmoid, rng);
  p.s = init_gcn(q, h, q, Activation::kTanh, Activation::kTanh, rng);
  p.s_dec = init_gcn(q, h, q, Activation::kTanh, Activation::kSigmoid, rng);
  p.c1 = init_mlp(dims.c1_input(), dims.c1_hidden, 2, rng);
  p.disc.data_proj = glorot_uniform(d, q, rng);
  p.disc.upper = init_branch(d, n, c, rng);
  p.disc.lower = init_branch(q, n, c, rng);
  p.disc.joint = init_branch(q, n, c, rng);
  return p;
}

std::size_t parameter_count(const ModelParams& p) {
  std::size_t total = 0;
  p.for_each([&](std::string_view, const Matrix& m) { total += static_cast<std::size_t>(m.size()); });
  return total;
}

std::size_t expected_parameter_count(const ModelDims& dims) {
  const std::size_t d = dims.fts_dim, q = dims.latent_dim, h = dims.hidden(), n = dims.n_rois,
                    c = dims.disc_channels, hc = dims.c1_hidden, in = dims.c1_input();
  const std::size_t gcns = (d * h + h * q) + (q * h + h * d) + 2 * (q * h + h * q);
  const std::size_t c1 = in * hc + hc + hc * 2 + 2;
  const auto branch = [&](std::size_t feat) { return feat * c + c + n * c + c * c + 1; };
  const std::size_t disc = d * q + branch(d) + 2 * branch(q);
  return gcns + c1 + disc;
}

Matrix normalized_adjacency(const Matrix& adj) {
  if (adj.rows() != adj.cols()) throw ShapeError("normalized_adjacency: adjacency must be square, got " + shape_str(adj));
  Matrix a = adj;
  a.diagonal().array() += 1.0;
  const Vector inv_sqrt = a.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

ad::Var activate(ad::Var x, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return ad::tanh(x);
    case Activation::kSigmoid:
      return ad::sigmoid(x);
    case Activation::kRelu:
      return ad::relu(x);
    case Activation::kIdentity:
      break;
  }
  return x;
}

ad::Var gcn_forward(ad::Tape& t, const GcnStack& stack, ad::Var norm_adj, ad::Var feats) {
  if (norm_adj.rows() != feats.rows()) {
    throw ShapeError("gcn_forward: shape mismatch " + shape_str(norm_adj.value()) + " vs " + shape_str(feats.value()));
  }
  ad::Var h = activate(ad::matmul(norm_adj, ad::matmul(feats, t.param(stack.w1))), stack.act1);
  return activate(ad::matmul(norm_adj, ad::matmul(h, t.param(stack.w2))), stack.act2);
}

ad::Var encode_fv(ad::Tape& t, const GcnStack& s, ad::Var norm_adj, ad::Var fv_row) {
  return gcn_forward(t, s, norm_adj, ad::broadcast_rows(fv_row, norm_adj.rows()));
}

ad::Var decode_fv(ad::Tape& t, const GcnStack& s_dec, ad::Var norm_adj, ad::Var v_hat) {
  return ad::col_mean(gcn_forward(t, s_dec, norm_adj, v_hat));
}

ad::Var reconstruct_adjacency(ad::Var z_hat) { return ad::sigmoid(ad::matmul(z_hat, ad::transpose(z_hat))); }

ad::Var branch_forward(ad::Tape& t, const DiscBranch& b, ad::Var input) {
  ad::Var feat = ad::matmul(input, t.param(b.w_feat));
  feat = ad::tanh(feat + ad::broadcast_rows(t.param(b.b_feat), feat.rows()));
  ad::Var map = ad::tanh(ad::matmul(ad::transpose(t.param(b.w_node)), feat));
  return ad::tanh(ad::sum(ad::mul(t.param(b.w_out), map)) + t.param(b.b_out));
}

PairScore discriminate(ad::Tape& t, const Discriminator& d, ad::Var data_item, ad::Var rep_item, bool split) {
  if (data_item.rows() != rep_item.rows() || data_item.cols() != d.data_proj.rows() ||
      rep_item.cols() != d.data_proj.cols()) {
    throw ShapeError("discriminate: shape mismatch " + shape_str(data_item.value()) + " vs " +
                     shape_str(rep_item.value()));
  }
  PairScore out;
  out.upper = branch_forward(t, d.upper, data_item);
  out.lower = branch_forward(t, d.lower, rep_item);
  if (split) {
    out.score = ad::scale(out.upper + out.lower, 0.5);
  } else {
    out.joint = branch_forward(t, d.joint, ad::matmul(data_item, t.param(d.data_proj)) + rep_item);
    out.score = ad::scale(out.upper + out.lower + out.joint, 1.0 / 3.0);
  }
  return out;
}

ad::Var mlp_forward(ad::Tape& t, const Mlp& m, ad::Var row) {
  ad::Var h = ad::tanh(ad::matmul(row, t.param(m.w1)) + t.param(m.b1));
  return ad::matmul(h, t.param(m.w2)) + t.param(m.b2);
}

ad::Var classify_c1(ad::Tape& t, const Mlp& c1, ad::Var rep, C1Axis axis) {
  ad::Var pooled = axis == C1Axis::kFeature ? ad::transpose(ad::row_mean(rep)) : ad::col_mean(rep);
  return mlp_forward(t, c1, pooled);
}

}  // namespace uniconn
