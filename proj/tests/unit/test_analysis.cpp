#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "uniconn/analysis.hpp"

using namespace uniconn;
using uniconn::fixtures::TempDir;

namespace {

// Two-sided Student-t p-value by Simpson integration of the density.
double t_pvalue(double t, double nu) {
  const double c = std::tgamma((nu + 1) / 2) / (std::sqrt(nu * std::numbers::pi) * std::tgamma(nu / 2));
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / nu, -(nu + 1) / 2); };
  const int n = 20000;
  const double h = std::abs(t) / n;
  double s = pdf(0) + pdf(std::abs(t));
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

std::vector<UnitedConnectivity> constant_group(int n, int count, double value) {
  return std::vector<UnitedConnectivity>(static_cast<std::size_t>(count), UnitedConnectivity{Matrix::Constant(n, n, value)});
}

EdgeStats planted_stats() {
  auto patients = constant_group(4, 3, 0.5);
  auto controls = constant_group(4, 3, 0.5);
  const double jitter[] = {0.0, 0.01, -0.01};
  for (int s = 0; s < 3; ++s) {
    patients[s].m(0, 1) = patients[s].m(1, 0) = 0.8 + jitter[s];
    controls[s].m(0, 1) = controls[s].m(1, 0) = 0.5 + jitter[s];
  }
  return edge_ttest(patients, controls);
}

}  // namespace

TEST(Metrics, PerfectSeparation) {
  const Metrics m = compute_metrics({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
  EXPECT_EQ(m.acc, 1.0);
  EXPECT_EQ(m.sen, 1.0);
  EXPECT_EQ(m.spe, 1.0);
  EXPECT_EQ(m.auc, 1.0);
  EXPECT_EQ(m.tp, 2);
  EXPECT_EQ(m.tn, 2);
}

TEST(Metrics, ConstantScoresGiveChanceAuc) {
  EXPECT_EQ(roc_auc({0.5, 0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0, 0}), 0.5);
}

TEST(Metrics, AucMatchesPairCounting) {
  // positives {0.9, 0.4, 0.35}, negatives {0.8, 0.4, 0.1}: 5.5 of 9 pairs
  EXPECT_DOUBLE_EQ(roc_auc({0.9, 0.8, 0.4, 0.4, 0.35, 0.1}, {1, 0, 1, 0, 1, 0}), 5.5 / 9.0);
}

TEST(Metrics, SingleClassRejected) {
  EXPECT_THROW(roc_auc({0.1, 0.2}, {1, 1}), InvalidArgument);
  EXPECT_THROW(roc_auc({0.1}, {1, 0}), ShapeError);
}

TEST(Welch, KnownExample) {
  const WelchResult r = welch_t_test({0.1, 0.2, 0.3}, {0.8, 0.9, 1.0});
  EXPECT_NEAR(r.t, -0.7 / std::sqrt(0.02 / 3.0), 1e-12);
  EXPECT_NEAR(r.t, -8.573, 1e-3);
  EXPECT_NEAR(r.dof, 4.0, 1e-12);
  EXPECT_LT(r.p, 0.01);
  EXPECT_NEAR(r.p, t_pvalue(r.t, 4.0), 1e-9);
}

TEST(Welch, UnequalVarianceDof) {
  const std::vector<double> a{1.0, 2.0, 4.0, 7.0}, b{0.5, 0.6, 0.4};
  const WelchResult r = welch_t_test(a, b);
  const double va = 7.0, vb = 0.01;  // sample variances
  const double sa = va / 4, sb = vb / 3;
  EXPECT_NEAR(r.dof, (sa + sb) * (sa + sb) / (sa * sa / 3 + sb * sb / 2), 1e-12);
  EXPECT_NEAR(r.p, t_pvalue(r.t, r.dof), 1e-7);
}

TEST(Welch, IdenticalAndDegenerateGroups) {
  const WelchResult same = welch_t_test({0.1, 0.4, 0.3}, {0.1, 0.4, 0.3});
  EXPECT_EQ(same.t, 0.0);
  EXPECT_NEAR(same.p, 1.0, 1e-12);
  const WelchResult flat = welch_t_test({0.2, 0.2}, {0.2, 0.2});
  EXPECT_TRUE(flat.degenerate);
  EXPECT_EQ(flat.p, 1.0);
  EXPECT_THROW(welch_t_test({0.2}, {0.1, 0.3}), InvalidArgument);
}

TEST(EdgeTtest, RoiPermutationCommutes) {
  std::mt19937_64 rng(3);
  std::vector<UnitedConnectivity> a, b;
  for (int s = 0; s < 5; ++s) {
    Matrix x = uniconn::fixtures::random_matrix(5, 5, rng, 0, 1);
    a.push_back({(x + x.transpose()) / 2});
    Matrix y = uniconn::fixtures::random_matrix(5, 5, rng, 0, 1);
    b.push_back({(y + y.transpose()) / 2});
  }
  const Matrix perm = uniconn::fixtures::permutation_matrix({3, 0, 4, 1, 2});
  auto permuted = [&](std::vector<UnitedConnectivity> g) {
    for (auto& u : g) u.m = perm * u.m * perm.transpose();
    return g;
  };
  const EdgeStats s = edge_ttest(a, b);
  const EdgeStats p = edge_ttest(permuted(a), permuted(b));
  EXPECT_LT((perm * s.p_values * perm.transpose() - p.p_values).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((perm * s.t_values * perm.transpose() - p.t_values).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(s.p_values.diagonal(), Vector::Ones(5));
}

TEST(Altered, IdenticalGroupsGiveZero) {
  const auto g = constant_group(4, 3, 0.4);
  const EdgeStats st = edge_ttest(g, g);
  EXPECT_TRUE(st.significant_005.empty());
  const AlteredResult r = altered_connections(g, g, st, {0, 0, 1, 1});
  EXPECT_EQ(r.altered, Matrix::Zero(4, 4));
  EXPECT_EQ(r.strength.cells.at(0).total(), 0.0);
}

TEST(Altered, SingleIntraEdgeIncrease) {
  const EdgeStats st = planted_stats();
  ASSERT_EQ(st.significant_005, (EdgeList{{0, 1}}));
  auto patients = constant_group(4, 3, 0.5);
  auto controls = constant_group(4, 3, 0.5);
  for (auto& u : patients) u.m(0, 1) = u.m(1, 0) = 0.8;
  const AlteredResult r = altered_connections(patients, controls, st, {0, 0, 1, 1});
  EXPECT_NEAR(r.altered(0, 1), 0.3, 1e-12);
  EXPECT_EQ(r.altered(1, 0), r.altered(0, 1));
  const StrengthCell& c = r.strength.cells.at(0);
  EXPECT_DOUBLE_EQ(c.intra_increased, 1.0);
  EXPECT_EQ(c.intra_decreased + c.inter_increased + c.inter_decreased, 0.0);
}

TEST(Altered, NormalizationModes) {
  NetworkStrength s;
  s.stages = {"a", "b"};
  s.cells = {{2.0, 1.0, 0.0, 0.0}, {0.5, 0.0, 0.0, 0.25}};
  const NetworkStrength g = normalize_strengths(s, true);
  EXPECT_DOUBLE_EQ(g.cells[0].intra_increased, 1.0);
  EXPECT_DOUBLE_EQ(g.cells[1].intra_increased, 0.25);
  const NetworkStrength per = normalize_strengths(s, false);
  EXPECT_DOUBLE_EQ(per.cells[1].intra_increased, 1.0);
  EXPECT_DOUBLE_EQ(per.cells[1].inter_decreased, 0.5);
}

TEST(ExportEdges, HeaderOnlyNestedAndRoundTrip) {
  const EdgeStats st = planted_stats();
  TempDir dir("edges");
  export_edges(st, 1e-12, dir / "none.csv");
  EXPECT_TRUE(read_edges(dir / "none.csv").empty());
  export_edges(st, 0.05, dir / "loose.csv");
  export_edges(st, 0.001, dir / "tight.csv");
  const auto loose = read_edges(dir / "loose.csv");
  const auto tight = read_edges(dir / "tight.csv");
  EXPECT_LE(tight.size(), loose.size());
  for (const auto& e : tight) EXPECT_NE(std::find(loose.begin(), loose.end(), e), loose.end());
  EXPECT_EQ(loose, edges_below(st, 0.05));
  ASSERT_EQ(loose.size(), 1u);
  EXPECT_EQ(loose[0].roi_i, 0);
  EXPECT_EQ(loose[0].roi_j, 1);
  EXPECT_NEAR(loose[0].delta, 0.3, 1e-12);
  EXPECT_THROW(export_edges(st, 0.0, dir / "bad.csv"), InvalidArgument);
  EXPECT_THROW(export_edges(st, 1.5, dir / "bad.csv"), InvalidArgument);
}

TEST(Recovery, PerfectRankingGivesOne) {
  Matrix p = Matrix::Constant(4, 4, 0.5);
  p(0, 2) = p(2, 0) = 1e-4;
  p(1, 3) = p(3, 1) = 1e-3;
  EXPECT_EQ(edge_recovery_auroc(p, {{0, 2, Direction::kIncreased}, {1, 3, Direction::kDecreased}}), 1.0);
}

TEST(Importance, RangeAndShielding) {
  SynthConfig sc;
  sc.n_per_group = 4;
  const Dataset ds = synthesize_cohort(sc);
  const Subject s = shield_roi(ds.subjects[0], 2);
  EXPECT_EQ(s.sc.row(2).sum() + s.sc.col(2).sum(), 0.0);
  EXPECT_EQ(s.fts.row(2).sum(), 0.0);
  EXPECT_EQ(s.fts.row(3), ds.subjects[0].fts.row(3));

  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.folds = 2;
  cfg.batch_size = 2;
  cfg.k = 3;
  cfg.prior_mode = PriorMode::kNormal;
  const auto folds = cross_validate(cfg, ds, nullptr);
  const auto imp = roi_importance_all(fold_models(folds), ds);
  ASSERT_EQ(imp.size(), static_cast<std::size_t>(ds.n_rois));
  for (double v : imp) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(roi_importance(fold_models(folds), ds, ds.n_rois), InvalidArgument);
}

TEST(TopK, OrderAndTies) {
  EXPECT_EQ(top_k({0.1, 0.5, 0.3, 0.5, 0.2}, 3), (std::vector<int>{1, 3, 2}));
  EXPECT_EQ(top_k({0.1, 0.2}, 5), (std::vector<int>{1, 0}));
}
