#include "uniconn/hpn.hpp"

#include <algorithm>
#include <numeric>

namespace uniconn {

HpnParams init_hpn_params(const ModelDims& dims, int k, double lambda, std::mt19937_64& rng) {
  if (k < 0 || k >= dims.n_rois) {
    throw InvalidArgument("hpn: k=" + std::to_string(k) + " must lie in [0, N-1]");
  }
  HpnParams p;
  p.fusion_w = glorot_uniform(2 * dims.latent_dim, dims.latent_dim, rng);
  p.c2 = init_mlp(dims.n_rois * dims.n_rois, dims.c2_hidden, 2, rng);
  p.k = k;
  p.lambda = lambda;
  return p;
}

std::size_t expected_hpn_parameter_count(const ModelDims& dims) {
  const std::size_t q = dims.latent_dim, n = dims.n_rois, h = dims.c2_hidden;
  return 2 * q * q + n * n * h + h + h * 2 + 2;
}

Hypergraph make_hypergraph(Matrix incidence) {
  Hypergraph hg;
  hg.edge_degree = incidence.colwise().sum().transpose();
  hg.vertex_degree = incidence.rowwise().sum();
  hg.incidence = std::move(incidence);
  if ((hg.edge_degree.array() <= 0.0).any() || (hg.vertex_degree.array() <= 0.0).any()) {
    throw DomainError("hypergraph: zero degree");
  }
  return hg;
}

Hypergraph build_hypergraph(const Matrix& rep, int k) {
  const auto n = static_cast<int>(rep.rows());
  if (k < 0 || k >= n) {
    throw InvalidArgument("build_hypergraph: k=" + std::to_string(k) + " must be < N=" + std::to_string(n));
  }
  Matrix h = Matrix::Zero(n, n);
  std::vector<int> order;
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int e = 0; e < n; ++e) {
    for (int v = 0; v < n; ++v) dist[v] = (rep.row(v) - rep.row(e)).squaredNorm();
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::erase(order, e);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
    h(e, e) = 1.0;
    for (int i = 0; i < k; ++i) h(order[i], e) = 1.0;
  }
  return make_hypergraph(std::move(h));
}

Hypergraph merge_hypergraphs(const Hypergraph& a, const Hypergraph& b) {
  if (a.incidence.rows() != b.incidence.rows() || a.incidence.cols() != b.incidence.cols()) {
    throw ShapeError("merge_hypergraphs: shape mismatch " + shape_str(a.incidence) + " vs " + shape_str(b.incidence));
  }
  return make_hypergraph(0.5 * (a.incidence + b.incidence));
}

Matrix hyperedge_operator(const Hypergraph& hg) {
  const Vector s = hg.edge_degree.array().rsqrt();
  return s.asDiagonal() * hg.incidence.transpose() * s.asDiagonal();
}

Matrix vertex_operator(const Hypergraph& hg) {
  const Vector s = hg.vertex_degree.array().rsqrt();
  return s.asDiagonal() * hg.incidence * s.asDiagonal();
}

ad::Var hyperedge_aggregate(const Hypergraph& hg, ad::Var rep) {
  return ad::matmul(rep.tape().constant(hyperedge_operator(hg)), rep);
}

Matrix hyperedge_aggregate(const Hypergraph& hg, const Matrix& rep) { return hyperedge_operator(hg) * rep; }

ad::Var fuse(ad::Tape& t, const Hypergraph& hz, const Hypergraph& hv, ad::Var z_e, ad::Var v_e, const Matrix& fusion_w) {
  const Hypergraph h = merge_hypergraphs(hz, hv);
  ad::Var mixed = ad::matmul(ad::concat_cols(z_e, v_e), t.param(fusion_w));
  return ad::matmul(t.constant(vertex_operator(h)), mixed);
}

ad::Var united_connectivity(ad::Var f) { return ad::sigmoid(ad::matmul(f, ad::transpose(f))); }

UnitedConnectivity united_connectivity(const Matrix& f) {
  const Matrix g = f * f.transpose();
  Matrix m = (1.0 + (-g.array()).exp()).inverse().matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) m(i, j) = m(j, i);
  }
  return {std::move(m)};
}

ad::Var classify_c2(ad::Tape& t, const Mlp& c2, ad::Var m) { return mlp_forward(t, c2, ad::flatten_rows(m)); }

HpnForward hpn_forward(ad::Tape& t, const HpnParams& p, ad::Var z_hat, ad::Var v_hat,
                       const std::optional<Hypergraph>& hz, const std::optional<Hypergraph>& hv) {
  HpnForward out;
  out.hz = hz ? *hz : build_hypergraph(z_hat.value(), p.k);
  out.hv = hv ? *hv : build_hypergraph(v_hat.value(), p.k);
  out.z_e = hyperedge_aggregate(out.hz, z_hat);
  out.v_e = hyperedge_aggregate(out.hv, v_hat);
  out.f = fuse(t, out.hz, out.hv, out.z_e, out.v_e, p.fusion_w);
  out.m = united_connectivity(out.f);
  out.logits = classify_c2(t, p.c2, out.m);
  return out;
}

}  // namespace uniconn
