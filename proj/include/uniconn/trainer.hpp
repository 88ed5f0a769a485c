#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uniconn/data_io.hpp"
#include "uniconn/hpn.hpp"
#include "uniconn/losses.hpp"
#include "uniconn/model.hpp"
#include "uniconn/prior.hpp"

namespace uniconn {

enum class PriorMode { kNone, kNormal, kEstimated };

std::string to_string(PriorMode m);
PriorMode prior_mode_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 500;
  int batch_size = 8;
  double lr_main = 1e-3;
  double lr_main_late = 1e-4;
  double lr_disc = 1e-4;
  double lr_hpn = 1e-3;
  double poly_power = 0.9;
  double momentum = 0.9;
  double clip = 0.05;
  int breakpoint = -1;  // -1: min(100, epochs / 2)
  int k = 8;
  double lambda = 1e-5;
  PriorMode prior_mode = PriorMode::kEstimated;
  bool split_discriminator = false;
  std::uint64_t seed = 1;
  int folds = 0;  // 0: train on every subject; >= 2: stratified CV
  int prior_m = 10;
  std::optional<std::vector<int>> seed_rois;  // unset: dataset default
  int gcn_hidden = 0;
  int c1_hidden = 16;
  int c2_hidden = 32;
  int disc_channels = 16;
  C1Axis c1_axis = C1Axis::kFeature;

  int phase_breakpoint() const;
};

void validate(const TrainConfig& cfg);
/// Unknown keys and ill-typed values raise ConfigError.
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);

ModelDims model_dims(const Dataset& ds, const TrainConfig& cfg);
/// Hippocampus and parahippocampal ROIs for the 90-ROI atlas, else none.
std::vector<int> default_seed_rois(const Dataset& ds);

struct LearningRates {
  double main = 0;
  double disc = 0;
  double hpn = 0;
};

/// `iter` counts HPN-phase iterations from the breakpoint; 0 <= iter <= max_iter.
LearningRates lr_schedule(const TrainConfig& cfg, int epoch, long iter, long max_iter);

struct TrainState {
  ModelDims dims;
  ModelParams model;
  HpnParams hpn;
  ModelParams model_velocity;
  HpnParams hpn_velocity;
  int epoch = 0;
  std::mt19937_64 rng;
  std::vector<LossReport> history;  // one entry per step
  std::vector<LearningRates> lr_trace;
  std::vector<double> epoch_totals;

  ModelParams best_model;
  HpnParams best_hpn;
  int best_epoch = -1;
  double best_total = 0;
};

TrainState init_state(const TrainConfig& cfg, const ModelDims& dims);

/// v <- mu v - lr g; theta <- theta + v
void momentum_step(Matrix& theta, Matrix& velocity, const Matrix& grad, double lr, double mu);
void clip_discriminator(ModelParams& p, double clip);

/// Draws an N x q latent matrix for the configured prior.
Matrix sample_prior(PriorMode mode, const PriorModel* prior, int n_rows, int q, std::mt19937_64& rng);

struct GraphOptions {
  const Matrix* z = nullptr;  // prior draw; adversarial terms need it
  bool split = false;
  bool detach_hpn = true;
  bool adversarial_only = false;  // stop after the discriminator scores
  C1Axis c1_axis = C1Axis::kFeature;
  const std::optional<Hypergraph>* hz = nullptr;
  const std::optional<Hypergraph>* hv = nullptr;
};

/// Every intermediate and per-subject loss term of one forward pass.
struct SubjectGraph {
  ad::Var z_hat, v_hat;
  ad::Var x_rec, a_rec, v_rec;
  ad::Var x_gen;  // G2(Z)
  ad::Var rec1, rec2, cls1, cls2, cls3, sparse;
  AdvScores<ad::Var> scores{};
  bool has_scores = false;
  HpnForward hpn;
};

SubjectGraph build_subject_graph(ad::Tape& t, const ModelParams& p, const HpnParams& hpn, const Subject& s,
                                 const GraphOptions& opt);

LossReport train_step(TrainState& state, const TrainConfig& cfg, const std::vector<const Subject*>& batch,
                      const PriorModel* prior, const LearningRates& lr);

using EpochCallback = std::function<void(const TrainState&, const LossReport& epoch_mean)>;

TrainState train_fold(const TrainConfig& cfg, const ModelDims& dims, const std::vector<const Subject*>& train,
                      const PriorModel* prior, const EpochCallback& on_epoch = {});

struct SubjectOutputs {
  Matrix z_hat;
  Matrix v_hat;
  Matrix m;
  Matrix logits;  // C2, 1 x 2
  double score = 0;  // softmax probability of class 1
};

SubjectOutputs forward_subject(const ModelParams& p, const HpnParams& hpn, const Subject& s);

struct FoldResult {
  Fold fold;
  TrainState state;
  std::vector<double> test_scores;
};

/// Stratified k-fold training. Fits a prior per fold on its training split
/// when the mode needs one and `prior` is null. Folds run on up to `jobs`
/// threads with seeds derived from cfg.seed.
std::vector<FoldResult> cross_validate(const TrainConfig& cfg, const Dataset& ds, const PriorModel* prior, int jobs = 1);

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

struct Checkpoint {
  ModelDims dims;
  ModelParams model;
  HpnParams hpn;
};

void save_checkpoint(const std::filesystem::path& dir, const ModelDims& dims, const ModelParams& model,
                     const HpnParams& hpn);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace uniconn
