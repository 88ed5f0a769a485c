#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uniconn/tensor.hpp"

namespace uniconn {

/// One multimodal sample: structural adjacency, functional time-series
/// features, MRI feature vector and class label (0 = control, 1 = patient).
struct Subject {
  std::string id;
  Matrix sc;   // N x N, binary, symmetric, zero diagonal
  Matrix fts;  // N x d, in [0, 1]
  Vector fv;   // q
  int label = 0;
};

enum class Direction { kIncreased, kDecreased };

struct PlantedEdge {
  int i = 0;
  int j = 0;
  Direction direction = Direction::kIncreased;

  friend bool operator==(const PlantedEdge&, const PlantedEdge&) = default;
};

struct Dataset {
  std::vector<Subject> subjects;
  int n_rois = 0;
  int fts_dim = 0;
  int latent_dim = 0;
  std::vector<std::string> roi_names;
  std::vector<int> partition;  // ROI -> region id, contiguous from 0
  std::vector<PlantedEdge> planted_edges;
};

struct SynthConfig {
  int n_per_group = 40;
  std::uint64_t seed = 7;
  int n_altered = 20;
  double effect_size = 1.5;
  std::vector<int> block_sizes = {4, 4, 4, 4};
  double noise_level = 1.0;
  int fts_dim = 24;
  int latent_dim = 8;

  int n_rois() const;
};

struct Fold {
  std::vector<int> train;  // indices into Dataset::subjects
  std::vector<int> test;
};

/// Throws on the first violated invariant of a single subject.
void validate_subject(const Subject& s, int n_rois, int fts_dim, int latent_dim, const std::string& where);
void validate_dataset(const Dataset& ds);

/// Per-subject min-max scaling to [0, 1]; constant matrices map to 0.
Matrix minmax_normalize(const Matrix& m);

Dataset load_dataset(const std::filesystem::path& manifest_path);
/// Writes per-subject CSVs and `manifest.json` into `dir`; returns the
/// manifest path. The manifest is written last and atomically.
std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir);

Dataset synthesize_cohort(const SynthConfig& cfg);
void validate_synth_config(const SynthConfig& cfg);

std::vector<Fold> kfold_split(const Dataset& ds, int k, std::uint64_t seed);

/// Pearson correlation between the FTS rows of every ROI pair.
Matrix functional_connectivity(const Subject& s);

/// AAL-90 short labels in atlas order.
const std::vector<std::string>& aal90_roi_names();
/// Stand-in 5-region lobe table for AAL-90: 0 frontal, 1 temporal,
/// 2 parietal, 3 occipital, 4 subcortical-central.
const std::vector<int>& aal90_lobe_partition();

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

}  // namespace uniconn
