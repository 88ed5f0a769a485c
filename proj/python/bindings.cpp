#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "uniconn/analysis.hpp"

namespace py = pybind11;
using namespace uniconn;

namespace {

std::vector<const Subject*> pointers(const Dataset& ds) {
  std::vector<const Subject*> out;
  for (const auto& s : ds.subjects) out.push_back(&s);
  return out;
}

}  // namespace

PYBIND11_MODULE(_uniconn, m) {
  m.doc() = "Prior-guided adversarial graph learning with hypergraph fusion";
  m.attr("__version__") = UNICONN_VERSION;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<DomainError>(m, "DomainError", base);
  auto io = py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<MissingFileError>(m, "MissingFileError", io);
  py::register_exception<FormatError>(m, "FormatError", io);
  py::register_exception<AsymmetryError>(m, "AsymmetryError", base);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", base);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base);
  py::register_exception<RankError>(m, "RankError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);

  py::enum_<Direction>(m, "Direction")
      .value("increased", Direction::kIncreased)
      .value("decreased", Direction::kDecreased);

  py::class_<Subject>(m, "Subject")
      .def(py::init<>())
      .def_readwrite("id", &Subject::id)
      .def_readwrite("sc", &Subject::sc)
      .def_readwrite("fts", &Subject::fts)
      .def_readwrite("fv", &Subject::fv)
      .def_readwrite("label", &Subject::label)
      .def("__repr__", [](const Subject& s) { return "<Subject " + s.id + " label=" + std::to_string(s.label) + ">"; });

  py::class_<PlantedEdge>(m, "PlantedEdge")
      .def_readonly("i", &PlantedEdge::i)
      .def_readonly("j", &PlantedEdge::j)
      .def_readonly("direction", &PlantedEdge::direction);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("subjects", &Dataset::subjects)
      .def_readwrite("n_rois", &Dataset::n_rois)
      .def_readwrite("fts_dim", &Dataset::fts_dim)
      .def_readwrite("latent_dim", &Dataset::latent_dim)
      .def_readwrite("roi_names", &Dataset::roi_names)
      .def_readwrite("partition", &Dataset::partition)
      .def_readwrite("planted_edges", &Dataset::planted_edges)
      .def("__len__", [](const Dataset& d) { return d.subjects.size(); });

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_per_group", &SynthConfig::n_per_group)
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("n_altered", &SynthConfig::n_altered)
      .def_readwrite("effect_size", &SynthConfig::effect_size)
      .def_readwrite("block_sizes", &SynthConfig::block_sizes)
      .def_readwrite("noise_level", &SynthConfig::noise_level)
      .def_readwrite("fts_dim", &SynthConfig::fts_dim)
      .def_readwrite("latent_dim", &SynthConfig::latent_dim);

  m.def(
      "synthesize_cohort",
      [](int n_per_group, std::uint64_t seed, double effect_size, int n_altered) {
        SynthConfig c;
        c.n_per_group = n_per_group;
        c.seed = seed;
        c.effect_size = effect_size;
        c.n_altered = n_altered;
        return synthesize_cohort(c);
      },
      py::arg("n_per_group") = 40, py::arg("seed") = 7, py::arg("effect_size") = 1.5, py::arg("n_altered") = 20);
  m.def("synthesize_config", &synthesize_cohort, py::arg("config"));
  m.def("load_dataset", &load_dataset, py::arg("manifest"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("directory"));
  m.def("functional_connectivity", &functional_connectivity, py::arg("subject"));
  m.def("kfold_split", [](const Dataset& ds, int k, std::uint64_t seed) {
    std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
    for (const auto& f : kfold_split(ds, k, seed)) out.emplace_back(f.train, f.test);
    return out;
  }, py::arg("dataset"), py::arg("k"), py::arg("seed"));

  py::class_<PriorModel>(m, "PriorModel")
      .def_readonly("prototypes", &PriorModel::prototypes)
      .def_readonly("seed_rois", &PriorModel::seed_rois)
      .def_readonly("pca_mean", &PriorModel::pca_mean)
      .def_readonly("pca_basis", &PriorModel::pca_basis)
      .def_readonly("kde_centers", &PriorModel::kde_centers)
      .def_readonly("bandwidth", &PriorModel::bandwidth)
      .def("density", &density, py::arg("z"))
      .def("log_density", &log_density, py::arg("z"))
      .def(
          "sample",
          [](const PriorModel& p, int n_rows, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            return sample_z(p, n_rows, rng);
          },
          py::arg("n_rows"), py::arg("seed"));

  m.def("dpp_select", &dpp_select, py::arg("kernel"), py::arg("seed_rois"), py::arg("m"));
  m.def("fit_prior", py::overload_cast<const Dataset&, int, int, const std::vector<int>&>(&fit_prior),
        py::arg("dataset"), py::arg("m"), py::arg("q"), py::arg("seed_rois") = std::vector<int>{});
  m.def("save_prior", &save_prior, py::arg("prior"), py::arg("directory"));
  m.def("load_prior", &load_prior, py::arg("directory"));

  m.def("normalized_adjacency", &normalized_adjacency, py::arg("adjacency"));
  m.def("knn_incidence", [](const Matrix& rep, int k) { return build_hypergraph(rep, k).incidence; },
        py::arg("rep"), py::arg("k"));
  m.def("united_connectivity", [](const Matrix& f) { return united_connectivity(f).m; }, py::arg("f"));

  py::enum_<PriorMode>(m, "PriorMode")
      .value("none", PriorMode::kNone)
      .value("normal", PriorMode::kNormal)
      .value("estimated", PriorMode::kEstimated);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_static("from_json", &train_config_from_json, py::arg("text"))
      .def("to_json", &train_config_to_json)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("k", &TrainConfig::k)
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("prior_mode", &TrainConfig::prior_mode)
      .def_readwrite("split_discriminator", &TrainConfig::split_discriminator)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("folds", &TrainConfig::folds)
      .def_readwrite("prior_m", &TrainConfig::prior_m);

  py::class_<LearningRates>(m, "LearningRates")
      .def_readonly("main", &LearningRates::main)
      .def_readonly("disc", &LearningRates::disc)
      .def_readonly("hpn", &LearningRates::hpn);
  m.def("lr_schedule", &lr_schedule, py::arg("config"), py::arg("epoch"), py::arg("iter"), py::arg("max_iter"));

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("acc", &Metrics::acc)
      .def_readonly("sen", &Metrics::sen)
      .def_readonly("spe", &Metrics::spe)
      .def_readonly("auc", &Metrics::auc)
      .def_readonly("tp", &Metrics::tp)
      .def_readonly("tn", &Metrics::tn)
      .def_readonly("fp", &Metrics::fp)
      .def_readonly("fn", &Metrics::fn)
      .def("to_json", &Metrics::to_json);

  py::class_<SubjectOutputs>(m, "SubjectOutputs")
      .def_readonly("z_hat", &SubjectOutputs::z_hat)
      .def_readonly("v_hat", &SubjectOutputs::v_hat)
      .def_readonly("uc", &SubjectOutputs::m)
      .def_readonly("logits", &SubjectOutputs::logits)
      .def_readonly("score", &SubjectOutputs::score);

  py::class_<Checkpoint>(m, "Model")
      .def("forward", [](const Checkpoint& c, const Subject& s) { return forward_subject(c.model, c.hpn, s); },
           py::arg("subject"))
      .def("evaluate", [](const Checkpoint& c, const Dataset& ds) { return evaluate(c.model, c.hpn, pointers(ds)); },
           py::arg("dataset"))
      .def("save", [](const Checkpoint& c, const std::filesystem::path& dir) { save_checkpoint(dir, c.dims, c.model, c.hpn); },
           py::arg("directory"));
  m.def("load_model", &load_checkpoint, py::arg("directory"));

  m.def(
      "train",
      [](const TrainConfig& cfg, const Dataset& ds, const PriorModel* prior) {
        std::optional<PriorModel> fitted;
        if (cfg.prior_mode == PriorMode::kEstimated && prior == nullptr) {
          const std::vector<int> seeds = cfg.seed_rois ? *cfg.seed_rois : default_seed_rois(ds);
          fitted = fit_prior(ds, cfg.prior_m, ds.latent_dim, seeds);
          prior = &*fitted;
        }
        py::gil_scoped_release release;
        const TrainState st = train_fold(cfg, model_dims(ds, cfg), pointers(ds), prior);
        return Checkpoint{st.dims, st.best_model, st.best_hpn};
      },
      py::arg("config"), py::arg("dataset"), py::arg("prior") = nullptr);

  m.def(
      "cross_validate",
      [](const TrainConfig& cfg, const Dataset& ds, const PriorModel* prior, int jobs) {
        std::vector<double> scores(ds.subjects.size());
        {
          py::gil_scoped_release release;
          for (const auto& f : cross_validate(cfg, ds, prior, jobs)) {
            for (std::size_t t = 0; t < f.fold.test.size(); ++t) scores[f.fold.test[t]] = f.test_scores[t];
          }
        }
        return scores;
      },
      py::arg("config"), py::arg("dataset"), py::arg("prior") = nullptr, py::arg("jobs") = 1);

  m.def("roc_auc", &roc_auc, py::arg("scores"), py::arg("labels"));
  m.def("compute_metrics", &compute_metrics, py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);

  py::class_<WelchResult>(m, "WelchResult")
      .def_readonly("t", &WelchResult::t)
      .def_readonly("dof", &WelchResult::dof)
      .def_readonly("p", &WelchResult::p)
      .def_readonly("degenerate", &WelchResult::degenerate);
  m.def("welch_t_test", &welch_t_test, py::arg("a"), py::arg("b"));

  m.def(
      "edge_ttest",
      [](const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
        std::vector<UnitedConnectivity> ua, ub;
        for (const auto& x : a) ua.push_back({x});
        for (const auto& x : b) ub.push_back({x});
        const EdgeStats st = edge_ttest(ua, ub);
        return py::make_tuple(st.p_values, st.t_values, st.significant_005);
      },
      py::arg("group_a"), py::arg("group_b"));
  m.def("edge_recovery_auroc", &edge_recovery_auroc, py::arg("p_values"), py::arg("truth"));
}
