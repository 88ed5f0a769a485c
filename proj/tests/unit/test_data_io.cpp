#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "uniconn/analysis.hpp"
#include "uniconn/data_io.hpp"
#include "uniconn/matrix_io.hpp"

using namespace uniconn;
using uniconn::fixtures::TempDir;

namespace {

Dataset tiny_dataset(int subjects) {
  std::mt19937_64 rng(42);
  Dataset ds;
  ds.n_rois = 4;
  ds.fts_dim = 6;
  ds.latent_dim = 3;
  ds.roi_names = {"a", "b", "c", "d"};
  ds.partition = {0, 0, 1, 1};
  for (int i = 0; i < subjects; ++i) {
    Subject s = fixtures::random_subject(4, 6, 3, i % 2, rng);
    s.id = "s" + std::to_string(i);
    s.fts = minmax_normalize(s.fts);
    ds.subjects.push_back(s);
  }
  return ds;
}

void expect_same(const Dataset& a, const Dataset& b) {
  ASSERT_EQ(a.subjects.size(), b.subjects.size());
  EXPECT_EQ(a.n_rois, b.n_rois);
  EXPECT_EQ(a.fts_dim, b.fts_dim);
  EXPECT_EQ(a.latent_dim, b.latent_dim);
  EXPECT_EQ(a.roi_names, b.roi_names);
  EXPECT_EQ(a.partition, b.partition);
  EXPECT_EQ(a.planted_edges, b.planted_edges);
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    EXPECT_EQ(a.subjects[i].id, b.subjects[i].id);
    EXPECT_EQ(a.subjects[i].label, b.subjects[i].label);
    EXPECT_EQ(a.subjects[i].sc, b.subjects[i].sc);
    EXPECT_EQ(a.subjects[i].fts, b.subjects[i].fts);
    EXPECT_EQ(a.subjects[i].fv, b.subjects[i].fv);
  }
}

double fc_edge(const Subject& s, int i, int j) { return functional_connectivity(s)(i, j); }

}  // namespace

TEST(DataIo, TwoSubjectManifestLoads) {
  TempDir dir("io2");
  const Dataset ds = tiny_dataset(2);
  const Dataset back = load_dataset(save_dataset(ds, dir.path()));
  EXPECT_EQ(back.subjects.size(), 2u);
  expect_same(ds, back);
}

TEST(DataIo, AsymmetricScNamesTheIndex) {
  TempDir dir("asym");
  const Dataset ds = tiny_dataset(2);
  const auto manifest = save_dataset(ds, dir.path());
  Matrix sc = ds.subjects[0].sc;
  sc(1, 2) = 1.0;
  sc(2, 1) = 0.0;
  write_matrix_csv(dir / "subjects/s0_sc.csv", sc);
  try {
    load_dataset(manifest);
    FAIL() << "expected AsymmetryError";
  } catch (const AsymmetryError& e) {
    EXPECT_EQ(e.row(), 1);
    EXPECT_EQ(e.col(), 2);
    EXPECT_NE(std::string(e.what()).find("(1, 2)"), std::string::npos);
  }
}

TEST(DataIo, FtsIsMinMaxNormalizedAtLoad) {
  TempDir dir("norm");
  const Dataset ds = tiny_dataset(2);
  const auto manifest = save_dataset(ds, dir.path());
  Matrix raw = ds.subjects[1].fts * 3.0;
  raw(2, 3) = 7.3;
  raw(0, 0) = -1.0;
  write_matrix_csv(dir / "subjects/s1_fts.csv", raw);
  const Dataset back = load_dataset(manifest);
  EXPECT_EQ(back.subjects[1].fts.maxCoeff(), 1.0);
  EXPECT_EQ(back.subjects[1].fts.minCoeff(), 0.0);
  EXPECT_EQ(back.subjects[1].fts(2, 3), 1.0);
}

TEST(DataIo, DistinctErrorsForBrokenInputs) {
  TempDir dir("errs");
  const Dataset ds = tiny_dataset(2);
  const auto manifest = save_dataset(ds, dir.path());
  EXPECT_THROW(load_dataset(dir / "nope.json"), MissingFileError);

  write_matrix_csv(dir / "subjects/s0_fts.csv", Matrix::Zero(4, 5));
  EXPECT_THROW(load_dataset(manifest), ShapeError);
  write_matrix_csv(dir / "subjects/s0_fts.csv", ds.subjects[0].fts);

  std::ofstream(dir / "subjects/s0_fv.csv") << "0.1,nan,0.3\n";
  EXPECT_THROW(load_dataset(manifest), NonFiniteError);
  write_matrix_csv(dir / "subjects/s0_fv.csv", ds.subjects[0].fv.transpose());

  std::filesystem::remove(dir / "subjects/s1_sc.csv");
  try {
    load_dataset(manifest);
    FAIL() << "expected MissingFileError";
  } catch (const MissingFileError& e) {
    EXPECT_NE(e.path().find("s1_sc.csv"), std::string::npos);
  }

  std::ofstream(dir / "bad.json") << "{not json";
  EXPECT_THROW(load_dataset(dir / "bad.json"), FormatError);
}

TEST(DataIo, SyntheticCohortRoundTripsBitExactly) {
  TempDir dir("synth_rt");
  SynthConfig cfg;
  cfg.n_per_group = 4;
  const Dataset ds = synthesize_cohort(cfg);
  ASSERT_EQ(ds.subjects.size(), 8u);
  expect_same(ds, load_dataset(save_dataset(ds, dir.path())));
}

TEST(DataIo, EmptySubjectListIsValid) {
  TempDir dir("empty");
  Dataset ds = tiny_dataset(0);
  const Dataset back = load_dataset(save_dataset(ds, dir.path()));
  EXPECT_TRUE(back.subjects.empty());
  EXPECT_EQ(back.n_rois, 4);
}

TEST(DataIo, UnwritableDirectoryLeavesNoManifest) {
  TempDir dir("unwritable");
  std::ofstream(dir / "blocker") << "file";
  const auto target = dir / "blocker/cohort";
  EXPECT_THROW(save_dataset(tiny_dataset(2), target), IoError);
  EXPECT_FALSE(std::filesystem::exists(target / "manifest.json"));
}

TEST(Synth, DeterministicUnderSeed) {
  SynthConfig cfg;
  cfg.n_per_group = 5;
  const Dataset a = synthesize_cohort(cfg), b = synthesize_cohort(cfg);
  expect_same(a, b);
  cfg.seed = 8;
  EXPECT_NE(synthesize_cohort(cfg).subjects[0].fts, a.subjects[0].fts);
}

TEST(Synth, SubjectsSatisfyInvariants) {
  SynthConfig cfg;
  cfg.n_per_group = 6;
  const Dataset ds = synthesize_cohort(cfg);
  EXPECT_NO_THROW(validate_dataset(ds));
  EXPECT_EQ(static_cast<int>(ds.planted_edges.size()), cfg.n_altered);
  for (const auto& s : ds.subjects) {
    EXPECT_EQ(s.sc, s.sc.transpose());
    EXPECT_EQ(s.sc.diagonal(), Vector::Zero(ds.n_rois));
    EXPECT_TRUE((s.fv.array() > 0).all() && (s.fv.array() < 1).all());
  }
  EXPECT_EQ(ds.partition, (std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3}));
}

TEST(Synth, InvalidConfigRejected) {
  SynthConfig cfg;
  cfg.n_altered = 16 * 15 / 2 + 1;
  EXPECT_THROW(synthesize_cohort(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.block_sizes = {};
  EXPECT_THROW(synthesize_cohort(cfg), ConfigError);
  cfg = SynthConfig{};
  cfg.effect_size = -1.0;
  EXPECT_THROW(synthesize_cohort(cfg), ConfigError);
}

TEST(Synth, NullEffectGivesNominalFalsePositiveRate) {
  // 5 cohorts x 100 edges of functional connectivity, Welch t at alpha 0.05
  int tested = 0, rejected = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig cfg;
    cfg.n_per_group = 40;
    cfg.effect_size = 0.0;
    cfg.n_altered = 100;
    cfg.seed = seed;
    const Dataset ds = synthesize_cohort(cfg);
    for (const auto& e : ds.planted_edges) {
      std::vector<double> a, b;
      for (const auto& s : ds.subjects) (s.label == 1 ? a : b).push_back(fc_edge(s, e.i, e.j));
      ++tested;
      if (welch_t_test(a, b).p < 0.05) ++rejected;
    }
  }
  ASSERT_EQ(tested, 500);
  EXPECT_NEAR(static_cast<double>(rejected) / tested, 0.05, 0.02);
}

TEST(Synth, PlantedEdgesCarryStrongSignal) {
  SynthConfig cfg;
  cfg.n_per_group = 40;
  cfg.n_altered = 20;
  cfg.effect_size = 1.5;
  const Dataset ds = synthesize_cohort(cfg);
  int strong = 0;
  for (const auto& e : ds.planted_edges) {
    std::vector<double> a, b;
    for (const auto& s : ds.subjects) (s.label == 1 ? a : b).push_back(fc_edge(s, e.i, e.j));
    if (std::abs(welch_t_test(a, b).t) > 3.0) ++strong;
  }
  EXPECT_GE(strong, 16);
}

TEST(KFold, TenFoldsOnTwentySubjects) {
  SynthConfig cfg;
  cfg.n_per_group = 10;
  const Dataset ds = synthesize_cohort(cfg);
  const auto folds = kfold_split(ds, 10, 3);
  ASSERT_EQ(folds.size(), 10u);
  for (const auto& f : folds) {
    ASSERT_EQ(f.test.size(), 2u);
    EXPECT_NE(ds.subjects[f.test[0]].label, ds.subjects[f.test[1]].label);
    EXPECT_EQ(f.train.size(), 18u);
  }
}

TEST(KFold, PartitionAndBalance) {
  SynthConfig cfg;
  cfg.n_per_group = 13;
  const Dataset ds = synthesize_cohort(cfg);
  const auto folds = kfold_split(ds, 4, 1);
  std::multiset<int> seen;
  std::vector<int> per_class[2];
  for (const auto& f : folds) {
    int c[2] = {0, 0};
    for (int i : f.test) {
      seen.insert(i);
      ++c[ds.subjects[i].label];
    }
    per_class[0].push_back(c[0]);
    per_class[1].push_back(c[1]);
    std::set<int> train(f.train.begin(), f.train.end());
    for (int i : f.test) EXPECT_EQ(train.count(i), 0u);
    EXPECT_EQ(f.train.size() + f.test.size(), ds.subjects.size());
  }
  EXPECT_EQ(seen.size(), ds.subjects.size());
  EXPECT_EQ(std::set<int>(seen.begin(), seen.end()).size(), ds.subjects.size());
  for (const auto& v : per_class) EXPECT_LE(*std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end()), 1);
}

TEST(KFold, SeedDeterminism) {
  SynthConfig cfg;
  cfg.n_per_group = 10;
  const Dataset ds = synthesize_cohort(cfg);
  const auto ref = kfold_split(ds, 5, 100);
  for (std::uint64_t seed = 101; seed <= 105; ++seed) {
    EXPECT_EQ(kfold_split(ds, 5, 100)[0].test, ref[0].test);
    bool differs = false;
    const auto other = kfold_split(ds, 5, seed);
    for (std::size_t f = 0; f < ref.size(); ++f) differs = differs || other[f].test != ref[f].test;
    EXPECT_TRUE(differs) << seed;
  }
}

TEST(KFold, TooFewSubjects) {
  SynthConfig cfg;
  cfg.n_per_group = 3;
  const Dataset ds = synthesize_cohort(cfg);
  EXPECT_THROW(kfold_split(ds, 4, 1), InvalidArgument);
  EXPECT_THROW(kfold_split(ds, 1, 1), InvalidArgument);
}

TEST(MatrixIo, ShortestRoundTripFormatting) {
  std::mt19937_64 rng(9);
  const Matrix m = fixtures::random_matrix(5, 7, rng, -1e3, 1e3);
  TempDir dir("csv");
  write_matrix_csv(dir / "m.csv", m);
  EXPECT_EQ(read_matrix_csv(dir / "m.csv"), m);
  EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Atlas, NinetyNamesAndFiveRegions) {
  EXPECT_EQ(aal90_roi_names().size(), 90u);
  EXPECT_EQ(aal90_roi_names()[36], "HIP.L");
  const auto& lobes = aal90_lobe_partition();
  EXPECT_EQ(std::set<int>(lobes.begin(), lobes.end()), (std::set<int>{0, 1, 2, 3, 4}));
}
