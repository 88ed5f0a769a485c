#pragma once

#include <optional>
#include <random>
#include <string_view>

#include "uniconn/model.hpp"

namespace uniconn {

/// Incidence matrix with node rows and hyperedge columns.
struct Hypergraph {
  Matrix incidence;
  Vector edge_degree;    // column sums
  Vector vertex_degree;  // row sums
};

struct HpnParams {
  Matrix fusion_w;  // 2q x q
  Mlp c2;           // N^2 -> h2 -> 2
  int k = 4;
  double lambda = 1e-4;

  template <class F>
  void for_each(F&& f) {
    f(std::string_view("hpn.fusion_w"), fusion_w);
    ModelParams::visit_mlp("hpn.c2", c2, f);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<HpnParams*>(this)->for_each([&](std::string_view n, const Matrix& m) { f(n, m); });
  }
};

struct UnitedConnectivity {
  Matrix m;
};

HpnParams init_hpn_params(const ModelDims& dims, int k, double lambda, std::mt19937_64& rng);
std::size_t expected_hpn_parameter_count(const ModelDims& dims);

Hypergraph make_hypergraph(Matrix incidence);

/// Column e holds node e plus its k nearest rows of `rep` by Euclidean
/// distance, ties to the lower index.
Hypergraph build_hypergraph(const Matrix& rep, int k);

/// (H1 + H2) / 2 with recomputed degrees.
Hypergraph merge_hypergraphs(const Hypergraph& a, const Hypergraph& b);

/// D_e^{-1/2} H^T D_e^{-1/2}
Matrix hyperedge_operator(const Hypergraph& hg);
/// D_v^{-1/2} H D_v^{-1/2}
Matrix vertex_operator(const Hypergraph& hg);

ad::Var hyperedge_aggregate(const Hypergraph& hg, ad::Var rep);
Matrix hyperedge_aggregate(const Hypergraph& hg, const Matrix& rep);

/// F = Dv^{-1/2} H Dv^{-1/2} ((zE | vE) W) with H = (H_z + H_v) / 2.
ad::Var fuse(ad::Tape& t, const Hypergraph& hz, const Hypergraph& hv, ad::Var z_e, ad::Var v_e, const Matrix& fusion_w);

/// sigmoid(F F^T)
ad::Var united_connectivity(ad::Var f);
UnitedConnectivity united_connectivity(const Matrix& f);

/// Row-major flatten of M, then the C2 MLP. Returns 1 x 2 logits.
ad::Var classify_c2(ad::Tape& t, const Mlp& c2, ad::Var m);

struct HpnForward {
  Hypergraph hz;
  Hypergraph hv;
  ad::Var z_e;
  ad::Var v_e;
  ad::Var f;
  ad::Var m;
  ad::Var logits;
};

/// Full HPN pass. Hypergraphs are built from the current values of the
/// inputs unless supplied; they are constants for the backward pass.
HpnForward hpn_forward(ad::Tape& t, const HpnParams& p, ad::Var z_hat, ad::Var v_hat,
                       const std::optional<Hypergraph>& hz = std::nullopt,
                       const std::optional<Hypergraph>& hv = std::nullopt);

}  // namespace uniconn
