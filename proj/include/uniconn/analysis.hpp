#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "uniconn/trainer.hpp"

namespace uniconn {

struct Metrics {
  double acc = 0, sen = 0, spe = 0, auc = 0;
  int tp = 0, tn = 0, fp = 0, fn = 0;

  std::string to_json() const;
};

/// Area under the ROC curve by the trapezoid rule over all thresholds.
/// Tied scores contribute a diagonal segment. Needs both classes.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Confusion counts at `score >= threshold` plus AUC.
Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels, double threshold = 0.5);

/// C2 positive-class probabilities for each subject.
std::vector<double> predict_scores(const ModelParams& model, const HpnParams& hpn,
                                   const std::vector<const Subject*>& subjects);

Metrics evaluate(const ModelParams& model, const HpnParams& hpn, const std::vector<const Subject*>& subjects);

struct WelchResult {
  double t = 0;
  double dof = 0;
  double p = 1;
  bool degenerate = false;  // both groups have zero variance
};

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

using EdgeList = std::vector<std::pair<int, int>>;

struct EdgeStats {
  Matrix p_values;   // symmetric, unit diagonal
  Matrix t_values;   // group a minus group b orientation
  Matrix mean_diff;  // mean(a) - mean(b), every edge
  Matrix altered;    // mean_diff masked to significant_005
  EdgeList significant_005;
  EdgeList significant_0001;
  EdgeList degenerate;
  Vector roi_frequency;  // significant_005 edges per ROI
};

/// Welch t-test on every upper-triangle edge; group a is the patient group.
EdgeStats edge_ttest(const std::vector<UnitedConnectivity>& group_a, const std::vector<UnitedConnectivity>& group_b);

struct StrengthCell {
  double intra_increased = 0;
  double intra_decreased = 0;
  double inter_increased = 0;
  double inter_decreased = 0;

  double max_abs() const;
  double total() const { return intra_increased + intra_decreased + inter_increased + inter_decreased; }
};

/// Altered-connection strength per stage, decreased mass stored as a
/// positive magnitude.
struct NetworkStrength {
  std::vector<std::string> stages;
  std::vector<StrengthCell> cells;
};

/// Sums the upper-triangle mass of `altered` into intra/inter x
/// increased/decreased buckets.
StrengthCell strength_cell(const Matrix& altered, const std::vector<int>& partition);

/// Scales cells so the largest absolute cell is 1: across every stage when
/// `global`, else per stage. All-zero input stays zero.
NetworkStrength normalize_strengths(NetworkStrength s, bool global = true);

struct AlteredResult {
  Matrix altered;
  NetworkStrength strength;
};

AlteredResult altered_connections(const std::vector<UnitedConnectivity>& patients,
                                  const std::vector<UnitedConnectivity>& controls, const EdgeStats& stats,
                                  const std::vector<int>& partition);

struct EdgeRecord {
  int roi_i = 0;
  int roi_j = 0;
  double p = 1;
  double delta = 0;

  friend bool operator==(const EdgeRecord&, const EdgeRecord&) = default;
};

/// Edges with p < threshold, ascending by p then index.
std::vector<EdgeRecord> edges_below(const EdgeStats& stats, double threshold);
void export_edges(const EdgeStats& stats, double threshold, const std::filesystem::path& path);
std::vector<EdgeRecord> read_edges(const std::filesystem::path& path);

/// AUROC of ranking edges by ascending p against a ground-truth edge set.
double edge_recovery_auroc(const Matrix& p_values, const std::vector<PlantedEdge>& truth);

/// Zeroes row and column `roi` of A and row `roi` of X.
Subject shield_roi(const Subject& s, int roi);

struct FoldModel {
  const ModelParams* model = nullptr;
  const HpnParams* hpn = nullptr;
  std::vector<int> test;  // indices into the dataset
};

std::vector<FoldModel> fold_models(const std::vector<FoldResult>& folds);

/// 1 - mean fold accuracy with `roi` shielded in every evaluated subject.
double roi_importance(const std::vector<FoldModel>& folds, const Dataset& ds, int roi);
std::vector<double> roi_importance_all(const std::vector<FoldModel>& folds, const Dataset& ds);

/// Retrains the full cross-validation with `roi` shielded in every subject.
double roi_importance_retrain(const TrainConfig& cfg, const Dataset& ds, int roi, const PriorModel* prior, int jobs = 1);

/// Indices of the k largest values, descending, ties to the lower index.
std::vector<int> top_k(const std::vector<double>& values, int k);

}  // namespace uniconn
