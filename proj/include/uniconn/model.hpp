#pragma once

#include <cstddef>
#include <random>
#include <string_view>

#include "uniconn/tensor.hpp"

namespace uniconn {

enum class Activation { kIdentity, kTanh, kSigmoid, kRelu };

/// Which axis C1 averages a N x q representation over before its MLP.
/// kFeature: per-node mean over q (input length N); kNode: per-feature mean
/// over nodes (input length q).
enum class C1Axis { kFeature, kNode };

struct ModelDims {
  int n_rois = 16;
  int fts_dim = 24;
  int latent_dim = 8;
  int gcn_hidden = 0;  // 0 means latent_dim
  int c1_hidden = 16;
  int c2_hidden = 32;
  int disc_channels = 16;
  C1Axis c1_axis = C1Axis::kFeature;

  int hidden() const { return gcn_hidden > 0 ? gcn_hidden : latent_dim; }
  int c1_input() const { return c1_axis == C1Axis::kFeature ? n_rois : latent_dim; }
};

/// Two graph-convolution layers without bias.
struct GcnStack {
  Matrix w1;
  Matrix w2;
  Activation act1 = Activation::kTanh;
  Activation act2 = Activation::kTanh;
};

/// x -> tanh(x W1 + b1) W2 + b2
struct Mlp {
  Matrix w1, b1, w2, b2;
};

/// One discriminator subnetwork: contract the feature axis into C channels,
/// contract the node axis into a C x C map, contract that map to a scalar.
struct DiscBranch {
  Matrix w_feat;  // F x C
  Matrix b_feat;  // 1 x C
  Matrix w_node;  // N x C
  Matrix w_out;   // C x C
  Matrix b_out;   // 1 x 1
};

struct Discriminator {
  Matrix data_proj;  // d x q, couples the data item into the joint branch
  DiscBranch upper;  // scores N x d data items
  DiscBranch lower;  // scores N x q representation items
  DiscBranch joint;  // scores data_proj(data) + rep
};

struct ModelParams {
  GcnStack g1;     // (A, X) -> Z_hat, d -> h -> q
  GcnStack g2;     // (A, Z) -> X_hat, q -> h -> d, sigmoid output
  GcnStack s;      // (A, V) -> V_hat, q -> h -> q
  GcnStack s_dec;  // (A, V_hat) -> V', q -> h -> q, sigmoid then node mean
  Mlp c1;
  Discriminator disc;

  /// Visits (name, matrix) for the generator-side group: G1, G2, S, S', C1.
  template <class F>
  void for_each_generator(F&& f) {
    visit_gcn("g1", g1, f);
    visit_gcn("g2", g2, f);
    visit_gcn("s", s, f);
    visit_gcn("s_dec", s_dec, f);
    visit_mlp("c1", c1, f);
  }
  template <class F>
  void for_each_discriminator(F&& f) {
    f(std::string_view("disc.data_proj"), disc.data_proj);
    visit_branch("disc.upper", disc.upper, f);
    visit_branch("disc.lower", disc.lower, f);
    visit_branch("disc.joint", disc.joint, f);
  }
  template <class F>
  void for_each(F&& f) {
    for_each_generator(f);
    for_each_discriminator(f);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each([&](std::string_view n, const Matrix& m) { f(n, m); });
  }

  template <class F>
  static void visit_mlp(std::string_view prefix, Mlp& m, F& f) {
    emit(prefix, ".w1", m.w1, f);
    emit(prefix, ".b1", m.b1, f);
    emit(prefix, ".w2", m.w2, f);
    emit(prefix, ".b2", m.b2, f);
  }

 private:
  template <class F>
  static void emit(std::string_view prefix, std::string_view suffix, Matrix& m, F& f) {
    std::string name(prefix);
    name += suffix;
    f(std::string_view(name), m);
  }
  template <class F>
  static void visit_gcn(std::string_view prefix, GcnStack& g, F& f) {
    emit(prefix, ".w1", g.w1, f);
    emit(prefix, ".w2", g.w2, f);
  }
  template <class F>
  static void visit_branch(std::string_view prefix, DiscBranch& b, F& f) {
    emit(prefix, ".w_feat", b.w_feat, f);
    emit(prefix, ".b_feat", b.b_feat, f);
    emit(prefix, ".w_node", b.w_node, f);
    emit(prefix, ".w_out", b.w_out, f);
    emit(prefix, ".b_out", b.b_out, f);
  }
};

/// Glorot-uniform weights, zero biases.
ModelParams init_model_params(const ModelDims& dims, std::mt19937_64& rng);
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
Mlp init_mlp(int in, int hidden, int out, std::mt19937_64& rng);

std::size_t parameter_count(const ModelParams& p);
/// Closed-form tally from layer dimensions.
std::size_t expected_parameter_count(const ModelDims& dims);

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
Matrix normalized_adjacency(const Matrix& adj);

ad::Var activate(ad::Var x, Activation act);

/// Two-layer GCN: act2(Â act1(Â X W1) W2).
ad::Var gcn_forward(ad::Tape& t, const GcnStack& stack, ad::Var norm_adj, ad::Var feats);

/// Broadcasts the 1 x q feature vector to N rows and runs encoder S.
ad::Var encode_fv(ad::Tape& t, const GcnStack& s, ad::Var norm_adj, ad::Var fv_row);
/// Decoder S': GCN followed by the mean over nodes, 1 x q.
ad::Var decode_fv(ad::Tape& t, const GcnStack& s_dec, ad::Var norm_adj, ad::Var v_hat);

/// sigmoid(Z Z^T).
ad::Var reconstruct_adjacency(ad::Var z_hat);

struct PairScore {
  ad::Var upper;
  ad::Var lower;
  ad::Var joint;  // invalid when split
  ad::Var score;  // mean of the enabled subnetwork outputs
};

ad::Var branch_forward(ad::Tape& t, const DiscBranch& b, ad::Var input);

/// Scores a (data item N x d, representation item N x q) pair. With
/// `split`, the joint subnetwork is disabled.
PairScore discriminate(ad::Tape& t, const Discriminator& d, ad::Var data_item, ad::Var rep_item, bool split);

ad::Var mlp_forward(ad::Tape& t, const Mlp& m, ad::Var row);

/// Averages the representation along the configured axis, then the MLP.
/// Returns 1 x 2 logits.
ad::Var classify_c1(ad::Tape& t, const Mlp& c1, ad::Var rep, C1Axis axis);

}  // namespace uniconn
