#include "uniconn/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "uniconn/matrix_io.hpp"

namespace uniconn {

namespace fs = std::filesystem;
using json = nlohmann::json;

int SynthConfig::n_rois() const { return std::accumulate(block_sizes.begin(), block_sizes.end(), 0); }

std::string to_string(Direction d) { return d == Direction::kIncreased ? "increased" : "decreased"; }

Direction direction_from_string(const std::string& s) {
  if (s == "increased") return Direction::kIncreased;
  if (s == "decreased") return Direction::kDecreased;
  throw FormatError("unknown edge direction '" + s + "'");
}

Matrix minmax_normalize(const Matrix& m) {
  if (m.size() == 0) return m;
  const double lo = m.minCoeff();
  const double hi = m.maxCoeff();
  if (!(hi > lo)) return Matrix::Zero(m.rows(), m.cols());
  return ((m.array() - lo) / (hi - lo)).matrix();
}

void validate_subject(const Subject& s, int n_rois, int fts_dim, int latent_dim, const std::string& where) {
  auto expect = [&](const char* what, Eigen::Index r, Eigen::Index c, Eigen::Index er, Eigen::Index ec) {
    if (r != er || c != ec) {
      throw ShapeError(where + ": " + what + " is " + std::to_string(r) + "x" + std::to_string(c) + ", expected " +
                       std::to_string(er) + "x" + std::to_string(ec));
    }
  };
  expect("sc", s.sc.rows(), s.sc.cols(), n_rois, n_rois);
  expect("fts", s.fts.rows(), s.fts.cols(), n_rois, fts_dim);
  expect("fv", s.fv.size(), 1, latent_dim, 1);
  if (!s.sc.allFinite()) throw NonFiniteError(where + ": sc contains NaN/inf");
  if (!s.fts.allFinite()) throw NonFiniteError(where + ": fts contains NaN/inf");
  if (!s.fv.allFinite()) throw NonFiniteError(where + ": fv contains NaN/inf");
  for (int i = 0; i < n_rois; ++i) {
    if (s.sc(i, i) != 0.0) throw InvalidArgument(where + ": sc diagonal must be zero at " + std::to_string(i));
    for (int j = i + 1; j < n_rois; ++j) {
      if (s.sc(i, j) != s.sc(j, i)) throw AsymmetryError(where + ": sc", i, j);
      if (s.sc(i, j) != 0.0 && s.sc(i, j) != 1.0) {
        throw InvalidArgument(where + ": sc entry not binary at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
  }
  if (s.fts.size() > 0 && (s.fts.minCoeff() < 0.0 || s.fts.maxCoeff() > 1.0)) {
    throw InvalidArgument(where + ": fts outside [0, 1]");
  }
  if (s.label != 0 && s.label != 1) throw InvalidArgument(where + ": label must be 0 or 1");
}

void validate_dataset(const Dataset& ds) {
  if (ds.n_rois <= 0 || ds.fts_dim <= 0 || ds.latent_dim <= 0) throw InvalidArgument("dataset dims must be positive");
  if (static_cast<int>(ds.roi_names.size()) != ds.n_rois) throw ShapeError("roi_names length != n_rois");
  if (static_cast<int>(ds.partition.size()) != ds.n_rois) throw ShapeError("partition length != n_rois");
  std::set<int> regions(ds.partition.begin(), ds.partition.end());
  if (!regions.empty() && (*regions.begin() != 0 || *regions.rbegin() != static_cast<int>(regions.size()) - 1)) {
    throw InvalidArgument("partition region ids must be contiguous from 0");
  }
  for (const auto& e : ds.planted_edges) {
    if (!(0 <= e.i && e.i < e.j && e.j < ds.n_rois)) {
      throw InvalidArgument("planted edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) + ") invalid");
    }
  }
  for (const auto& s : ds.subjects) validate_subject(s, ds.n_rois, ds.fts_dim, ds.latent_dim, "subject " + s.id);
}

namespace {

const json& required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw FormatError(std::string("missing key '") + key + "'", where);
  return j.at(key);
}

Matrix read_checked(const fs::path& path) {
  Matrix m = read_matrix_csv(path);
  if (!m.allFinite()) throw NonFiniteError(path.string() + ": contains NaN/inf");
  return m;
}

}  // namespace

Dataset load_dataset(const fs::path& manifest_path) {
  const std::string where = manifest_path.string();
  json j;
  try {
    j = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what(), where);
  }
  const fs::path base = manifest_path.parent_path();
  Dataset ds;
  try {
    ds.n_rois = required(j, "n_rois", where).get<int>();
    ds.fts_dim = required(j, "fts_dim", where).get<int>();
    ds.latent_dim = required(j, "latent_dim", where).get<int>();
    if (j.contains("roi_names")) {
      ds.roi_names = j.at("roi_names").get<std::vector<std::string>>();
    } else if (ds.n_rois == 90) {
      ds.roi_names = aal90_roi_names();
    } else {
      for (int i = 0; i < ds.n_rois; ++i) ds.roi_names.push_back("ROI" + std::to_string(i + 1));
    }
    if (j.contains("partition")) {
      ds.partition = j.at("partition").get<std::vector<int>>();
    } else if (ds.n_rois == 90) {
      ds.partition = aal90_lobe_partition();
    } else {
      ds.partition.assign(static_cast<std::size_t>(ds.n_rois), 0);
    }
    if (j.contains("planted_edges")) {
      for (const auto& e : j.at("planted_edges")) {
        ds.planted_edges.push_back(PlantedEdge{e.at("i").get<int>(), e.at("j").get<int>(),
                                               direction_from_string(e.at("direction").get<std::string>())});
      }
    }
    for (const auto& js : required(j, "subjects", where)) {
      Subject s;
      s.id = js.at("id").get<std::string>();
      s.label = js.at("label").get<int>();
      s.sc = read_checked(base / js.at("sc_csv").get<std::string>());
      Matrix raw_fts = read_checked(base / js.at("fts_csv").get<std::string>());
      Matrix fv = read_checked(base / js.at("fv_csv").get<std::string>());
      if (fv.rows() != 1 && fv.cols() != 1) {
        throw ShapeError("subject " + s.id + ": fv must be a single row, got " + shape_str(fv));
      }
      s.fv = Eigen::Map<const Vector>(fv.data(), fv.size());
      if (raw_fts.rows() != ds.n_rois || raw_fts.cols() != ds.fts_dim) {
        throw ShapeError("subject " + s.id + ": fts is " + shape_str(raw_fts) + ", expected " +
                         std::to_string(ds.n_rois) + "x" + std::to_string(ds.fts_dim));
      }
      s.fts = minmax_normalize(raw_fts);
      validate_subject(s, ds.n_rois, ds.fts_dim, ds.latent_dim, "subject " + s.id);
      ds.subjects.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what(), where);
  }
  validate_dataset(ds);
  return ds;
}

fs::path save_dataset(const Dataset& ds, const fs::path& dir) {
  validate_dataset(ds);
  std::error_code ec;
  fs::create_directories(dir / "subjects", ec);
  if (ec) throw IoError("cannot create directory: " + (dir / "subjects").string(), dir.string());

  json j;
  j["n_rois"] = ds.n_rois;
  j["fts_dim"] = ds.fts_dim;
  j["latent_dim"] = ds.latent_dim;
  j["roi_names"] = ds.roi_names;
  j["partition"] = ds.partition;
  j["subjects"] = json::array();
  for (const auto& s : ds.subjects) {
    const std::string stem = "subjects/" + s.id;
    write_matrix_csv(dir / (stem + "_sc.csv"), s.sc);
    write_matrix_csv(dir / (stem + "_fts.csv"), s.fts);
    write_matrix_csv(dir / (stem + "_fv.csv"), s.fv.transpose());
    j["subjects"].push_back(
        {{"id", s.id}, {"label", s.label}, {"sc_csv", stem + "_sc.csv"}, {"fts_csv", stem + "_fts.csv"},
         {"fv_csv", stem + "_fv.csv"}});
  }
  if (!ds.planted_edges.empty()) {
    j["planted_edges"] = json::array();
    for (const auto& e : ds.planted_edges) {
      j["planted_edges"].push_back({{"i", e.i}, {"j", e.j}, {"direction", to_string(e.direction)}});
    }
  }
  const fs::path manifest = dir / "manifest.json";
  write_text_atomic(manifest, j.dump(2) + "\n");
  return manifest;
}

void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.n_per_group < 1) throw ConfigError("n_per_group must be >= 1");
  if (cfg.block_sizes.empty()) throw ConfigError("block_sizes must be non-empty");
  for (int b : cfg.block_sizes) {
    if (b < 1) throw ConfigError("block sizes must be positive");
  }
  const int n = cfg.n_rois();
  if (n < 2) throw ConfigError("need at least 2 ROIs");
  if (cfg.n_altered < 0 || cfg.n_altered > n * (n - 1) / 2) throw ConfigError("n_altered exceeds N(N-1)/2");
  if (!(cfg.effect_size >= 0.0) || !std::isfinite(cfg.effect_size)) throw ConfigError("effect_size must be >= 0");
  if (!(cfg.noise_level >= 0.0)) throw ConfigError("noise_level must be >= 0");
  if (cfg.fts_dim < 2 || cfg.latent_dim < 1) throw ConfigError("fts_dim >= 2 and latent_dim >= 1 required");
}

Dataset synthesize_cohort(const SynthConfig& cfg) {
  validate_synth_config(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int n = cfg.n_rois();
  const int n_blocks = static_cast<int>(cfg.block_sizes.size());
  std::vector<int> block_of;
  for (int b = 0; b < n_blocks; ++b) block_of.insert(block_of.end(), cfg.block_sizes[b], b);

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  std::vector<PlantedEdge> planted;
  for (int e = 0; e < cfg.n_altered; ++e) {
    const auto dir = unif(rng) < 0.5 ? Direction::kIncreased : Direction::kDecreased;
    planted.push_back(PlantedEdge{pairs[e].first, pairs[e].second, dir});
  }
  std::sort(planted.begin(), planted.end(),
            [](const PlantedEdge& a, const PlantedEdge& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });

  Matrix base_p(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) base_p(i, j) = block_of[i] == block_of[j] ? 0.6 : 0.1;
  }
  const double sc_shift = 0.5 * cfg.effect_size;

  Dataset ds;
  ds.n_rois = n;
  ds.fts_dim = cfg.fts_dim;
  ds.latent_dim = cfg.latent_dim;
  for (int i = 0; i < n; ++i) ds.roi_names.push_back("ROI" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1));
  ds.partition = block_of;
  ds.planted_edges = planted;

  for (int idx = 0; idx < 2 * cfg.n_per_group; ++idx) {
    Subject s;
    s.label = idx < cfg.n_per_group ? 0 : 1;
    const bool patient = s.label == 1;
    char id[32];
    std::snprintf(id, sizeof(id), "sub-%03d", idx);
    s.id = id;

    Matrix p = base_p;
    if (patient) {
      for (const auto& e : planted) {
        const double shifted = p(e.i, e.j) + (e.direction == Direction::kIncreased ? sc_shift : -sc_shift);
        p(e.i, e.j) = p(e.j, e.i) = std::clamp(shifted, 0.0, 1.0);
      }
    }
    s.sc = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (unif(rng) < p(i, j)) s.sc(i, j) = s.sc(j, i) = 1.0;
      }
    }

    Matrix factors(n_blocks, cfg.fts_dim);
    for (Eigen::Index k = 0; k < factors.size(); ++k) factors(k) = normal(rng);
    Matrix x(n, cfg.fts_dim);
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < cfg.fts_dim; ++t) x(i, t) = factors(block_of[i], t) + cfg.noise_level * normal(rng);
    }
    // controls get the same signal power without the coupling
    for (const auto& e : planted) {
      const double sign = e.direction == Direction::kIncreased ? 1.0 : -1.0;
      for (int t = 0; t < cfg.fts_dim; ++t) {
        const double a = cfg.effect_size * normal(rng);
        const double b = patient ? sign * a : cfg.effect_size * normal(rng);
        x(e.i, t) += a;
        x(e.j, t) += b;
      }
    }
    s.fts = minmax_normalize(x);

    const double mean_shift = (patient ? 0.5 : -0.5) * cfg.effect_size;
    s.fv.resize(cfg.latent_dim);
    for (int k = 0; k < cfg.latent_dim; ++k) s.fv(k) = 1.0 / (1.0 + std::exp(-(normal(rng) + mean_shift)));
    ds.subjects.push_back(std::move(s));
  }
  return ds;
}

std::vector<Fold> kfold_split(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("kfold_split: k must be >= 2");
  std::vector<int> by_class[2];
  for (int i = 0; i < static_cast<int>(ds.subjects.size()); ++i) {
    const int label = ds.subjects[i].label;
    if (label != 0 && label != 1) throw InvalidArgument("kfold_split: labels must be 0/1");
    by_class[label].push_back(i);
  }
  for (const auto& members : by_class) {
    if (static_cast<int>(members.size()) < k) {
      throw InvalidArgument("kfold_split: too few subjects (" + std::to_string(members.size()) +
                            " in a class) for k=" + std::to_string(k));
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> test(static_cast<std::size_t>(k));
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t p = 0; p < members.size(); ++p) test[p % k].push_back(members[p]);
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  const int total = static_cast<int>(ds.subjects.size());
  for (int f = 0; f < k; ++f) {
    std::sort(test[f].begin(), test[f].end());
    folds[f].test = test[f];
    std::vector<char> in_test(static_cast<std::size_t>(total), 0);
    for (int i : test[f]) in_test[i] = 1;
    for (int i = 0; i < total; ++i) {
      if (!in_test[i]) folds[f].train.push_back(i);
    }
  }
  return folds;
}

Matrix functional_connectivity(const Subject& s) {
  Matrix centered = s.fts.colwise() - s.fts.rowwise().mean();
  Vector norms = centered.rowwise().norm();
  const Eigen::Index n = centered.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms(i) > 0.0) centered.row(i) /= norms(i);
  }
  Matrix r = centered * centered.transpose();
  r.diagonal().setOnes();
  return r;
}

const std::vector<std::string>& aal90_roi_names() {
  static const std::vector<std::string> names = [] {
    const char* stems[] = {"PreCG",   "SFGdor", "ORBsup",   "MFG",    "ORBmid", "IFGoperc", "IFGtriang", "ORBinf",
                           "ROL",     "SMA",    "OLF",      "SFGmed", "ORBsupmed", "REC",   "INS",       "ACG",
                           "DCG",     "PCG",    "HIP",      "PHG",    "AMYG",   "CAL",      "CUN",       "LING",
                           "SOG",     "MOG",    "IOG",      "FFG",    "PoCG",   "SPG",      "IPL",       "SMG",
                           "ANG",     "PCUN",   "PCL",      "CAU",    "PUT",    "PAL",      "THA",       "HES",
                           "STG",     "TPOsup", "MTG",      "TPOmid", "ITG"};
    std::vector<std::string> out;
    for (const char* s : stems) {
      out.push_back(std::string(s) + ".L");
      out.push_back(std::string(s) + ".R");
    }
    return out;
  }();
  return names;
}

const std::vector<int>& aal90_lobe_partition() {
  static const std::vector<int> lobes = [] {
    std::vector<int> out(90, 0);
    auto set = [&](int first, int last, int region) {  // 1-based inclusive atlas numbers
      for (int k = first; k <= last; ++k) out[k - 1] = region;
    };
    set(1, 28, 0);   // frontal
    set(29, 42, 4);  // insula, cingulate, hippocampal, amygdala
    set(43, 54, 3);  // occipital
    set(55, 56, 1);  // fusiform
    set(57, 70, 2);  // parietal
    set(71, 78, 4);  // basal ganglia, thalamus
    set(79, 90, 1);  // temporal
    return out;
  }();
  return lobes;
}

}  // namespace uniconn
