#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "uniconn/prior.hpp"

using namespace uniconn;
using uniconn::fixtures::random_matrix;
using uniconn::fixtures::TempDir;

namespace {

PriorModel prior_from(const Matrix& centers, const Vector& bandwidth) {
  PriorModel p;
  p.kde_centers = centers;
  p.bandwidth = bandwidth;
  p.pca_basis = Matrix::Identity(centers.cols(), centers.cols());
  p.pca_mean = Vector::Zero(centers.cols());
  return p;
}

double brute_force_best(const Matrix& k, int m) {
  const int n = static_cast<int>(k.rows());
  std::vector<int> pick(static_cast<std::size_t>(n), 0);
  std::fill(pick.end() - m, pick.end(), 1);
  double best = -1.0;
  do {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i) {
      if (pick[i]) idx.push_back(i);
    }
    best = std::max(best, std::exp(subset_logdet(k, idx)));
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

std::vector<Subject> subjects_with_rows(const std::vector<Matrix>& fts) {
  std::vector<Subject> out;
  for (const Matrix& x : fts) {
    Subject s;
    s.sc = Matrix::Zero(x.rows(), x.rows());
    s.fts = x;
    s.fv = Vector::Zero(2);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(Dpp, IdentityKernelTieBreak) {
  EXPECT_EQ(dpp_select(Matrix::Identity(6, 6), {0}, 3), (std::vector<int>{0, 1, 2}));
}

TEST(Dpp, DiagonalPlusOffDiagonalMatchesEnumeration) {
  Matrix k = Matrix::Constant(5, 5, 0.01);
  k.diagonal() << 5, 4, 3, 2, 1;
  const auto greedy = dpp_select(k, {}, 2);
  EXPECT_EQ(greedy, (std::vector<int>{0, 1}));
  EXPECT_NEAR(std::exp(subset_logdet(k, greedy)), brute_force_best(k, 2), 1e-12);
}

TEST(Dpp, GreedyDominatesRandomSubsets) {
  std::mt19937_64 rng(3);
  long wins = 0, comparisons = 0;
  for (int t = 0; t < 200; ++t) {
    const Matrix b = random_matrix(8, 8, rng);
    const Matrix k = b * b.transpose() + 1e-2 * Matrix::Identity(8, 8);
    const int m = 1 + t % 4;
    const double g = subset_logdet(k, dpp_select(k, {}, m));
    std::vector<int> all(8);
    std::iota(all.begin(), all.end(), 0);
    for (int r = 0; r < 1000; ++r) {
      std::shuffle(all.begin(), all.end(), rng);
      std::vector<int> sub(all.begin(), all.begin() + m);
      wins += g >= subset_logdet(k, sub) - 1e-12 ? 1 : 0;
      ++comparisons;
    }
  }
  EXPECT_GE(static_cast<double>(wins) / static_cast<double>(comparisons), 0.99);
}

TEST(Dpp, SeedsAreKeptAndErrorsRaised) {
  std::mt19937_64 rng(4);
  const Matrix b = random_matrix(7, 7, rng);
  const Matrix k = b * b.transpose() + Matrix::Identity(7, 7);
  const auto u = dpp_select(k, {5, 2}, 4);
  EXPECT_EQ(u.size(), 4u);
  EXPECT_TRUE(std::is_sorted(u.begin(), u.end()));
  EXPECT_TRUE(std::count(u.begin(), u.end(), 5) && std::count(u.begin(), u.end(), 2));
  EXPECT_THROW(dpp_select(k, {}, 8), InvalidArgument);
  Matrix asym = k;
  asym(0, 1) += 0.5;
  EXPECT_THROW(dpp_select(asym, {}, 2), AsymmetryError);
}

TEST(Prior, SingleSubjectSingletonHitsRankRule) {
  // One subject with m = 1 pools a single row, so no q >= 1 is estimable.
  std::mt19937_64 rng(5);
  const auto subs = subjects_with_rows({random_matrix(4, 3, rng, 0, 1)});
  EXPECT_THROW(fit_prior({&subs[0]}, 1, 1, {0}), RankError);
}

TEST(Prior, SingleCenterDensityIsOneGaussian) {
  Matrix c(1, 2);
  c << 0.3, -0.2;
  Vector b(2);
  b << 0.5, 2.0;
  const PriorModel p = prior_from(c, b);
  Vector z(2);
  z << 0.8, 1.0;
  const double expected = std::exp(-0.5 * (1.0 + 0.36)) / (0.5 * 2.0 * 2.0 * std::numbers::pi);
  EXPECT_NEAR(density(p, z), expected, 1e-15);
}

TEST(Prior, PcaExactOnRankQData) {
  std::mt19937_64 rng(6);
  const int d = 6, q = 2, n = 5;
  const Matrix basis = random_matrix(d, q, rng, -0.1, 0.1);
  const Vector offset = Vector::Constant(d, 0.5);
  std::vector<Matrix> fts;
  for (int s = 0; s < 4; ++s) {
    const Matrix coeffs = random_matrix(n, q, rng);
    fts.push_back((coeffs * basis.transpose()).rowwise() + offset.transpose());
  }
  const auto subs = subjects_with_rows(fts);
  std::vector<const Subject*> ptrs;
  for (const auto& s : subs) ptrs.push_back(&s);
  const PriorModel p = fit_prior(ptrs, 3, q, {});
  EXPECT_LT((p.pca_basis.transpose() * p.pca_basis - Matrix::Identity(q, q)).cwiseAbs().maxCoeff(), 1e-8);
  for (const auto& s : subs) {
    for (int roi : p.prototypes) {
      const Vector x = s.fts.row(roi).transpose();
      const Vector rec = p.pca_mean + p.pca_basis * (p.pca_basis.transpose() * (x - p.pca_mean));
      EXPECT_LT((rec - x).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Prior, EqualCentersPeakValue) {
  Matrix c = Matrix::Zero(5, 3);
  c.rowwise() += Eigen::RowVector3d(0.1, 0.2, 0.3);
  const PriorModel p = prior_from(c, scott_bandwidth(c));
  // zero spread falls back to sigma = 1
  const double b = std::pow(5.0, -1.0 / 7.0);
  EXPECT_NEAR(p.bandwidth(0), b, 1e-15);
  const double peak = 1.0 / std::pow(b * std::sqrt(2.0 * std::numbers::pi), 3);
  EXPECT_NEAR(density(p, c.row(0).transpose()), peak, 1e-12 * peak);
}

TEST(Prior, FitOnSyntheticCohortHonorsInvariants) {
  SynthConfig cfg;
  cfg.n_per_group = 5;
  const Dataset ds = synthesize_cohort(cfg);
  const PriorModel p = fit_prior(ds, 6, 8, {3, 9});
  EXPECT_EQ(p.prototypes.size(), 6u);
  EXPECT_TRUE(std::count(p.prototypes.begin(), p.prototypes.end(), 3));
  EXPECT_TRUE(std::count(p.prototypes.begin(), p.prototypes.end(), 9));
  EXPECT_EQ(p.n_centers(), 60);
  EXPECT_LT((p.pca_basis.transpose() * p.pca_basis - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_TRUE((p.bandwidth.array() > 0).all());
  const PriorModel again = fit_prior(ds, 6, 8, {3, 9});
  EXPECT_EQ(again.kde_centers, p.kde_centers);
  EXPECT_THROW(fit_prior(ds, 1, 10, {}), RankError);
}

TEST(Density, FarTailAndPermutationInvariance) {
  std::mt19937_64 rng(7);
  const Matrix c = random_matrix(6, 2, rng);
  const PriorModel p = prior_from(c, scott_bandwidth(c));
  Vector far(2);
  far << 1.5 + 10 * p.bandwidth(0) + 1.0, 0.0;
  EXPECT_LT(density(p, far), 1e-12);
  Matrix shuffled = c;
  shuffled.row(0).swap(shuffled.row(4));
  shuffled.row(1).swap(shuffled.row(3));
  const PriorModel q = prior_from(shuffled, p.bandwidth);
  const Vector z = random_matrix(2, 1, rng);
  EXPECT_NEAR(density(p, z), density(q, z), 1e-15);
  EXPECT_NEAR(log_density(p, z), std::log(density(p, z)), 1e-12);
}

TEST(Density, IntegratesToOneInOneDimension) {
  std::mt19937_64 rng(8);
  const Matrix c = random_matrix(4, 1, rng, -1, 1);
  const PriorModel p = prior_from(c, scott_bandwidth(c));
  const double lo = -1 - 12 * p.bandwidth(0), hi = 1 + 12 * p.bandwidth(0);
  const int n = 10000;
  double total = 0;
  for (int i = 0; i <= n; ++i) total += ((i == 0 || i == n) ? 0.5 : 1.0) * density(p, Vector::Constant(1, lo + i * (hi - lo) / n));
  EXPECT_NEAR(total * (hi - lo) / n, 1.0, 1e-3);
}

TEST(SampleZ, DegenerateBandwidthReturnsCenters) {
  std::mt19937_64 rng(9);
  const Matrix c = random_matrix(3, 2, rng);
  const PriorModel p = prior_from(c, Vector::Constant(2, 1e-12));
  const Matrix z = sample_z(p, 50, rng);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    double best = 1e9;
    for (Eigen::Index i = 0; i < c.rows(); ++i) best = std::min(best, (z.row(r) - c.row(i)).cwiseAbs().maxCoeff());
    EXPECT_LT(best, 1e-9);
  }
}

TEST(SampleZ, MomentsOfStandardKernel) {
  const PriorModel p = prior_from(Matrix::Zero(1, 1), Vector::Ones(1));
  std::mt19937_64 rng(10);
  const Matrix z = sample_z(p, 10000, rng);
  const double mean = z.mean();
  const double sd = std::sqrt((z.array() - mean).square().sum() / (z.size() - 1));
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(sd, 1.0, 0.05);
}

TEST(SampleZ, SameSeedSameMatrix) {
  const PriorModel p = prior_from(Matrix::Identity(3, 3), Vector::Ones(3));
  std::mt19937_64 a(11), b(11);
  EXPECT_EQ(sample_z(p, 16, a), sample_z(p, 16, b));
}

TEST(Prior, SaveLoadRoundTrip) {
  SynthConfig cfg;
  cfg.n_per_group = 3;
  const Dataset ds = synthesize_cohort(cfg);
  const PriorModel p = fit_prior(ds, 5, 4, {0});
  TempDir dir("prior");
  save_prior(p, dir.path());
  const PriorModel back = load_prior(dir.path());
  EXPECT_EQ(back.prototypes, p.prototypes);
  EXPECT_EQ(back.seed_rois, p.seed_rois);
  EXPECT_EQ(back.pca_mean, p.pca_mean);
  EXPECT_EQ(back.pca_basis, p.pca_basis);
  EXPECT_EQ(back.kde_centers, p.kde_centers);
  EXPECT_EQ(back.bandwidth, p.bandwidth);
}
