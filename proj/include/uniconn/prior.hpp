#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "uniconn/data_io.hpp"

namespace uniconn {

/// Kernel-density prior over latent node representations, anchored on a
/// diverse subset of ROIs.
struct PriorModel {
  std::vector<int> prototypes;  // U0, ascending
  std::vector<int> seed_rois;
  Vector pca_mean;              // d
  Matrix pca_basis;             // d x q, orthonormal columns
  Matrix kde_centers;           // n_centers x q
  Vector bandwidth;             // q, per-dimension, > 0

  int latent_dim() const { return static_cast<int>(pca_basis.cols()); }
  int n_centers() const { return static_cast<int>(kde_centers.rows()); }
};

/// Ridge added to the averaged adjacency kernel before DPP selection.
inline constexpr double kDppRidge = 1e-3;

/// Greedy MAP for a DPP: starting from `seed_rois`, repeatedly adds the
/// index with the largest log-det gain (lowest index on ties) until `m`
/// indices are chosen. Returns the indices in ascending order.
std::vector<int> dpp_select(const Matrix& kernel, const std::vector<int>& seed_rois, int m);

/// log det(kernel[U, U]) via Cholesky; -inf when not positive definite.
double subset_logdet(const Matrix& kernel, const std::vector<int>& subset);

/// mean(A + I) + ridge * I over the given subjects.
Matrix prototype_kernel(const std::vector<const Subject*>& subjects);

PriorModel fit_prior(const std::vector<const Subject*>& train, int m, int q, const std::vector<int>& seed_rois);
PriorModel fit_prior(const Dataset& train, int m, int q, const std::vector<int>& seed_rois);

/// Scott's rule per dimension: sigma_j * n^(-1/(q+4)); sigma_j falls back
/// to 1 when the centers have no spread along j.
Vector scott_bandwidth(const Matrix& centers);

double density(const PriorModel& p, const Vector& z);
double log_density(const PriorModel& p, const Vector& z);

Matrix sample_z(const PriorModel& p, int n_rows, std::mt19937_64& rng);

void save_prior(const PriorModel& p, const std::filesystem::path& dir);
PriorModel load_prior(const std::filesystem::path& dir);

}  // namespace uniconn
