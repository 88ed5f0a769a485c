#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "CLI11.hpp"
#include "json.hpp"
#include "uniconn/analysis.hpp"
#include "uniconn/matrix_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace uniconn;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kMissingFile = 3, kInvalidConfig = 4 };

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir.string(), dir.string());
}

void require_exists(const fs::path& path) {
  if (!fs::exists(path)) throw MissingFileError(path.string());
}

/// Provenance record: everything needed to rerun, nothing time-dependent.
void write_run_json_to(const fs::path& path, const std::string& subcommand, const json& config, std::uint64_t seed,
                       const json& inputs) {
  json j;
  j["tool"] = "uniconn";
  j["version"] = UNICONN_VERSION;
  j["subcommand"] = subcommand;
  j["seed"] = seed;
  j["config_hash"] = hex64(fnv1a(config.dump()));
  j["config"] = config;
  j["inputs"] = inputs;
  j["versions"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", BOOST_LIB_VERSION}};
  write_text_atomic(path, j.dump(2) + "\n");
}

void write_run_json(const fs::path& out_dir, const std::string& subcommand, const json& config, std::uint64_t seed,
                    const json& inputs) {
  write_run_json_to(out_dir / "run.json", subcommand, config, seed, inputs);
}

SynthConfig synth_config_from_json(const json& j) {
  static const std::vector<std::string> known = {"n_per_group", "seed",        "n_altered", "effect_size",
                                                 "block_sizes", "noise_level", "fts_dim",   "latent_dim"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown synth key '" + key + "'");
  }
  SynthConfig c;
  try {
    if (j.contains("n_per_group")) c.n_per_group = j.at("n_per_group").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("n_altered")) c.n_altered = j.at("n_altered").get<int>();
    if (j.contains("effect_size")) c.effect_size = j.at("effect_size").get<double>();
    if (j.contains("block_sizes")) c.block_sizes = j.at("block_sizes").get<std::vector<int>>();
    if (j.contains("noise_level")) c.noise_level = j.at("noise_level").get<double>();
    if (j.contains("fts_dim")) c.fts_dim = j.at("fts_dim").get<int>();
    if (j.contains("latent_dim")) c.latent_dim = j.at("latent_dim").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  try {
    validate_synth_config(c);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json synth_config_to_json(const SynthConfig& c) {
  return {{"n_per_group", c.n_per_group}, {"seed", c.seed},       {"n_altered", c.n_altered},
          {"effect_size", c.effect_size}, {"block_sizes", c.block_sizes}, {"noise_level", c.noise_level},
          {"fts_dim", c.fts_dim},         {"latent_dim", c.latent_dim}};
}

TrainConfig load_train_config(const std::optional<fs::path>& path) {
  if (!path) return TrainConfig{};
  require_exists(*path);
  return train_config_from_json(read_text(*path));
}

/// ROI list given as 0-based indices or as ROI names.
std::vector<int> parse_roi_list(const std::string& text, const Dataset& ds) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok.empty()) continue;
    const auto name = std::find(ds.roi_names.begin(), ds.roi_names.end(), tok);
    int idx = -1;
    if (name != ds.roi_names.end()) {
      idx = static_cast<int>(name - ds.roi_names.begin());
    } else {
      try {
        std::size_t used = 0;
        idx = std::stoi(tok, &used);
        if (used != tok.size()) idx = -1;
      } catch (const std::exception&) {
        idx = -1;
      }
    }
    if (idx < 0 || idx >= ds.n_rois) throw ConfigError("unknown ROI '" + tok + "'");
    out.push_back(idx);
  }
  return out;
}

// Trained models of a run directory: one checkpoint, or one per fold with
// the subject ids it must be evaluated on.
struct RunModel {
  Checkpoint ckpt;
  std::vector<std::string> eval_ids;  // empty: every subject
};

std::vector<RunModel> load_run(const fs::path& run) {
  std::vector<RunModel> out;
  const fs::path folds = run / "folds.json";
  if (fs::exists(folds)) {
    const json j = parse_json_file(folds);
    for (const auto& f : j.at("folds")) {
      RunModel m;
      const fs::path ck = run / f.at("checkpoint").get<std::string>();
      require_exists(ck / "index.json");
      m.ckpt = load_checkpoint(ck);
      m.eval_ids = f.at("test_ids").get<std::vector<std::string>>();
      out.push_back(std::move(m));
    }
    return out;
  }
  const fs::path ck = run / "checkpoint";
  require_exists(ck / "index.json");
  out.push_back({load_checkpoint(ck), {}});
  return out;
}

void check_dims(const RunModel& m, const Dataset& ds) {
  if (m.ckpt.dims.n_rois != ds.n_rois || m.ckpt.dims.fts_dim != ds.fts_dim || m.ckpt.dims.latent_dim != ds.latent_dim) {
    throw ShapeError("checkpoint dims do not match the dataset");
  }
}

/// Out-of-fold scores and UC matrices for every subject covered by the run.
struct RunOutputs {
  std::vector<int> index;  // dataset index per output
  std::vector<SubjectOutputs> outputs;
};

RunOutputs run_outputs(const std::vector<RunModel>& models, const Dataset& ds) {
  std::map<std::string, int> by_id;
  for (std::size_t i = 0; i < ds.subjects.size(); ++i) by_id[ds.subjects[i].id] = static_cast<int>(i);
  RunOutputs r;
  for (const auto& m : models) {
    check_dims(m, ds);
    std::vector<int> idx;
    if (m.eval_ids.empty()) {
      for (std::size_t i = 0; i < ds.subjects.size(); ++i) idx.push_back(static_cast<int>(i));
    } else {
      for (const auto& id : m.eval_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw InvalidArgument("run references subject '" + id + "' absent from the dataset");
        idx.push_back(it->second);
      }
    }
    for (int i : idx) {
      r.index.push_back(i);
      r.outputs.push_back(forward_subject(m.ckpt.model, m.ckpt.hpn, ds.subjects[i]));
    }
  }
  return r;
}

json metrics_json(const Metrics& m) { return json::parse(m.to_json()); }

json fold_summary(const std::vector<FoldResult>& folds, const Dataset& ds) {
  std::vector<double> all_scores;
  std::vector<int> all_labels;
  double acc = 0, sen = 0, spe = 0, auc = 0;
  json per = json::array();
  for (const auto& f : folds) {
    std::vector<int> labels;
    for (int i : f.fold.test) labels.push_back(ds.subjects[i].label);
    const Metrics m = compute_metrics(f.test_scores, labels);
    per.push_back(metrics_json(m));
    acc += m.acc;
    sen += m.sen;
    spe += m.spe;
    auc += m.auc;
    all_scores.insert(all_scores.end(), f.test_scores.begin(), f.test_scores.end());
    all_labels.insert(all_labels.end(), labels.begin(), labels.end());
  }
  const double k = static_cast<double>(folds.size());
  json j;
  j["mean"] = {{"acc", acc / k}, {"sen", sen / k}, {"spe", spe / k}, {"auc", auc / k}};
  j["pooled"] = metrics_json(compute_metrics(all_scores, all_labels));
  j["folds"] = per;
  return j;
}

std::optional<PriorModel> maybe_load_prior(const std::optional<fs::path>& dir) {
  if (!dir) return std::nullopt;
  require_exists(*dir / "prior.json");
  return load_prior(*dir);
}

std::string losses_jsonl(const TrainState& st, int bpe) {
  std::string out;
  for (std::size_t i = 0; i < st.history.size(); ++i) {
    json j = json::parse(st.history[i].to_json());
    j["epoch"] = static_cast<int>(i) / bpe;
    j["step"] = i;
    j["lr_main"] = st.lr_trace[i].main;
    j["lr_disc"] = st.lr_trace[i].disc;
    j["lr_hpn"] = st.lr_trace[i].hpn;
    out += j.dump() + "\n";
  }
  return out;
}

// ---- sweep grid parsing ----

std::vector<double> parse_values(const std::string& spec) {
  const auto dots2 = spec.find("..");
  const auto ellipsis = spec.find(",...,");
  std::vector<double> out;
  auto num = [&](const std::string& s) { return parse_double(s, "--param"); };
  if (ellipsis != std::string::npos) {
    // a,b,...,c : arithmetic with step b - a
    std::vector<double> head;
    std::stringstream ss(spec.substr(0, ellipsis));
    for (std::string t; std::getline(ss, t, ',');) head.push_back(num(t));
    const double last = num(spec.substr(ellipsis + 5));
    if (head.size() < 2 || head[1] == head[0]) throw ConfigError("--param '" + spec + "': need two leading values");
    const double step = head[1] - head[0];
    for (int i = 0;; ++i) {
      const double v = head[0] + step * i;
      if ((step > 0 && v > last + 1e-12 * std::abs(step)) || (step < 0 && v < last - 1e-12 * std::abs(step))) break;
      out.push_back(v);
    }
    return out;
  }
  if (dots2 != std::string::npos) {
    // a..b : decades from a to b
    const double a = num(spec.substr(0, dots2));
    const double b = num(spec.substr(dots2 + 2));
    if (!(a > 0 && b > 0)) throw ConfigError("--param '" + spec + "': decade ranges need positive ends");
    const int ea = static_cast<int>(std::lround(std::log10(a)));
    const int eb = static_cast<int>(std::lround(std::log10(b)));
    const int dir = eb >= ea ? 1 : -1;
    for (int e = ea;; e += dir) {
      out.push_back(std::pow(10.0, e));
      if (e == eb) break;
    }
    return out;
  }
  if (std::count(spec.begin(), spec.end(), ':') == 2) {
    const auto c1 = spec.find(':');
    const auto c2 = spec.find(':', c1 + 1);
    const double a = num(spec.substr(0, c1));
    const double b = num(spec.substr(c1 + 1, c2 - c1 - 1));
    const double step = num(spec.substr(c2 + 1));
    if (!(step > 0)) throw ConfigError("--param '" + spec + "': step must be positive");
    for (int i = 0; a + step * i <= b + 1e-12 * step; ++i) out.push_back(a + step * i);
    return out;
  }
  std::stringstream ss(spec);
  for (std::string t; std::getline(ss, t, ',');) out.push_back(num(t));
  return out;
}

void apply_param(TrainConfig& cfg, const std::string& name, double v) {
  if (name == "k") {
    cfg.k = static_cast<int>(std::lround(v));
  } else if (name == "lambda") {
    cfg.lambda = v;
  } else if (name == "epochs") {
    cfg.epochs = static_cast<int>(std::lround(v));
  } else if (name == "seed") {
    cfg.seed = static_cast<std::uint64_t>(std::llround(v));
  } else if (name == "lr_main") {
    cfg.lr_main = v;
  } else if (name == "lr_hpn") {
    cfg.lr_hpn = v;
  } else {
    throw ConfigError("sweep: unsupported parameter '" + name + "'");
  }
}

// ---- subcommands ----

struct Args {
  std::string config, out, data, prior, run, seeds_roi, mode;
  int m = 10;
  int q = 0;
  int jobs = 1;
  int roi = -1;
  int top = 10;
  bool retrain = false;
  double threshold = 0.05;
  std::vector<std::string> params;
};

int cmd_synth(const Args& a) {
  SynthConfig cfg;
  json input = json::object();
  if (!a.config.empty()) {
    require_exists(a.config);
    cfg = synth_config_from_json(parse_json_file(a.config));
    input["config"] = a.config;
  }
  const Dataset ds = synthesize_cohort(cfg);
  const fs::path out(a.out);
  save_dataset(ds, out);
  write_run_json(out, "synth", synth_config_to_json(cfg), cfg.seed, input);
  return kOk;
}

int cmd_estimate_prior(const Args& a) {
  require_exists(a.data);
  const Dataset ds = load_dataset(a.data);
  const std::vector<int> seeds = a.seeds_roi.empty() ? default_seed_rois(ds) : parse_roi_list(a.seeds_roi, ds);
  const int q = a.q > 0 ? a.q : ds.latent_dim;
  const PriorModel p = fit_prior(ds, a.m, q, seeds);
  const fs::path out(a.out);
  save_prior(p, out);
  write_run_json(out, "estimate-prior", {{"m", a.m}, {"q", q}, {"seed_rois", seeds}}, 0, {{"data", a.data}});
  return kOk;
}

int cmd_train(const Args& a) {
  const std::optional<fs::path> cfg_path = a.config.empty() ? std::nullopt : std::optional<fs::path>(a.config);
  const TrainConfig cfg = load_train_config(cfg_path);
  require_exists(a.data);
  const Dataset ds = load_dataset(a.data);
  const auto prior = maybe_load_prior(a.prior.empty() ? std::nullopt : std::optional<fs::path>(a.prior));
  const fs::path out(a.out);
  const json cfg_json = json::parse(train_config_to_json(cfg));
  json inputs = {{"data", a.data}};
  if (!a.prior.empty()) inputs["prior"] = a.prior;
  if (!a.config.empty()) inputs["config"] = a.config;
  const ModelDims dims = model_dims(ds, cfg);
  const int bpe = (static_cast<int>(ds.subjects.size()) + cfg.batch_size - 1) / cfg.batch_size;

  if (cfg.folds >= 2) {
    const auto folds = cross_validate(cfg, ds, prior ? &*prior : nullptr, a.jobs);
    ensure_dir(out);
    json fj;
    fj["k"] = cfg.folds;
    fj["folds"] = json::array();
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const std::string name = "fold_" + std::to_string(f);
      save_checkpoint(out / name / "checkpoint", dims, folds[f].state.best_model, folds[f].state.best_hpn);
      const int fold_bpe =
          (static_cast<int>(folds[f].fold.train.size()) + cfg.batch_size - 1) / cfg.batch_size;
      write_text_atomic(out / name / "losses.jsonl", losses_jsonl(folds[f].state, fold_bpe));
      std::vector<std::string> train_ids, test_ids;
      for (int i : folds[f].fold.train) train_ids.push_back(ds.subjects[i].id);
      for (int i : folds[f].fold.test) test_ids.push_back(ds.subjects[i].id);
      fj["folds"].push_back({{"checkpoint", name + "/checkpoint"},
                             {"best_epoch", folds[f].state.best_epoch},
                             {"train_ids", train_ids},
                             {"test_ids", test_ids},
                             {"test_scores", folds[f].test_scores}});
    }
    write_text_atomic(out / "folds.json", fj.dump(2) + "\n");
    write_text_atomic(out / "cv_metrics.json", fold_summary(folds, ds).dump(2) + "\n");
  } else {
    std::vector<const Subject*> train;
    for (const auto& s : ds.subjects) train.push_back(&s);
    std::optional<PriorModel> fitted;
    const PriorModel* use = prior ? &*prior : nullptr;
    if (cfg.prior_mode == PriorMode::kEstimated && use == nullptr) {
      fitted = fit_prior(train, cfg.prior_m, dims.latent_dim, cfg.seed_rois ? *cfg.seed_rois : default_seed_rois(ds));
      use = &*fitted;
    }
    const TrainState st = train_fold(cfg, dims, train, use);
    ensure_dir(out);
    save_checkpoint(out / "checkpoint", dims, st.best_model, st.best_hpn);
    write_text_atomic(out / "losses.jsonl", losses_jsonl(st, bpe));
  }
  write_run_json(out, "train", cfg_json, cfg.seed, inputs);
  return kOk;
}

int cmd_evaluate(const Args& a) {
  require_exists(a.data);
  const auto models = load_run(a.run);
  const Dataset ds = load_dataset(a.data);
  const RunOutputs r = run_outputs(models, ds);
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < r.index.size(); ++i) {
    scores.push_back(r.outputs[i].score);
    labels.push_back(ds.subjects[r.index[i]].label);
  }
  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_text_atomic(out, compute_metrics(scores, labels).to_json() + "\n");
  fs::path record = out;
  record.replace_extension(".run.json");
  write_run_json_to(record, "evaluate", json::object(), 0, {{"data", a.data}, {"run", a.run}});
  return kOk;
}

int cmd_sweep(const Args& a) {
  TrainConfig base = load_train_config(a.config.empty() ? std::nullopt : std::optional<fs::path>(a.config));
  if (base.folds < 2) base.folds = 5;
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  for (const auto& p : a.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw ConfigError("--param expects name=values, got '" + p + "'");
    axes.emplace_back(p.substr(0, eq), parse_values(p.substr(eq + 1)));
    TrainConfig probe = base;
    for (double v : axes.back().second) apply_param(probe, axes.back().first, v);
  }
  if (axes.empty()) throw ConfigError("sweep needs at least one --param");
  std::vector<std::vector<double>> grid{{}};
  for (const auto& [_, values] : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& g : grid) {
      for (double v : values) {
        auto h = g;
        h.push_back(v);
        next.push_back(h);
      }
    }
    grid = std::move(next);
  }
  std::vector<TrainConfig> cfgs;
  for (const auto& point : grid) {
    TrainConfig c = base;
    for (std::size_t i = 0; i < axes.size(); ++i) apply_param(c, axes[i].first, point[i]);
    validate(c);
    cfgs.push_back(c);
  }
  require_exists(a.data);
  const Dataset ds = load_dataset(a.data);
  const auto prior = maybe_load_prior(a.prior.empty() ? std::nullopt : std::optional<fs::path>(a.prior));

  std::vector<json> results(cfgs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      try {
        results[i] = fold_summary(cross_validate(cfgs[i], ds, prior ? &*prior : nullptr, 1), ds);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::max(1, a.jobs); ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  const fs::path out(a.out);
  ensure_dir(out);
  std::string csv;
  for (const auto& [name, _] : axes) csv += name + ",";
  csv += "acc,sen,spe,auc\n";
  json grid_json = json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    json row;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      csv += format_double(grid[i][k]) + ",";
      row[axes[k].first] = grid[i][k];
    }
    const json& m = results[i]["mean"];
    csv += format_double(m["acc"].get<double>()) + "," + format_double(m["sen"].get<double>()) + "," +
           format_double(m["spe"].get<double>()) + "," + format_double(m["auc"].get<double>()) + "\n";
    row["metrics"] = results[i];
    grid_json.push_back(row);
  }
  write_text_atomic(out / "sweep.csv", csv);
  write_text_atomic(out / "sweep.json", grid_json.dump(2) + "\n");
  json cfg_json = json::parse(train_config_to_json(base));
  cfg_json["params"] = a.params;
  write_run_json(out, "sweep", cfg_json, base.seed, {{"data", a.data}});
  return kOk;
}

struct GroupUcs {
  std::vector<UnitedConnectivity> patients, controls;
};

GroupUcs group_ucs(const RunOutputs& r, const Dataset& ds) {
  GroupUcs g;
  for (std::size_t i = 0; i < r.index.size(); ++i) {
    auto& dst = ds.subjects[r.index[i]].label == 1 ? g.patients : g.controls;
    dst.push_back({r.outputs[i].m});
  }
  return g;
}

int cmd_analyze(const Args& a) {
  if (a.mode != "ttest" && a.mode != "importance" && a.mode != "altered") {
    throw ConfigError("analyze mode must be ttest|importance|altered");
  }
  require_exists(a.data);
  const Dataset ds = load_dataset(a.data);
  const fs::path out(a.out);
  json inputs = {{"data", a.data}, {"run", a.run}, {"mode", a.mode}};

  if (a.mode == "importance") {
    std::vector<double> imp;
    if (a.retrain) {
      TrainConfig cfg = load_train_config(a.config.empty() ? std::nullopt : std::optional<fs::path>(a.config));
      if (cfg.folds < 2) cfg.folds = 5;
      const auto prior = maybe_load_prior(a.prior.empty() ? std::nullopt : std::optional<fs::path>(a.prior));
      for (int r = 0; r < ds.n_rois; ++r) {
        if (a.roi >= 0 && r != a.roi) continue;
        imp.push_back(roi_importance_retrain(cfg, ds, r, prior ? &*prior : nullptr, a.jobs));
      }
    } else {
      const auto models = load_run(a.run);
      std::map<std::string, int> by_id;
      for (std::size_t i = 0; i < ds.subjects.size(); ++i) by_id[ds.subjects[i].id] = static_cast<int>(i);
      std::vector<FoldModel> folds;
      for (const auto& m : models) {
        check_dims(m, ds);
        FoldModel f{&m.ckpt.model, &m.ckpt.hpn, {}};
        if (m.eval_ids.empty()) {
          for (std::size_t i = 0; i < ds.subjects.size(); ++i) f.test.push_back(static_cast<int>(i));
        } else {
          for (const auto& id : m.eval_ids) f.test.push_back(by_id.at(id));
        }
        folds.push_back(std::move(f));
      }
      if (a.roi >= 0) {
        imp.push_back(roi_importance(folds, ds, a.roi));
      } else {
        imp = roi_importance_all(folds, ds);
      }
    }
    ensure_dir(out);
    std::string csv = "roi,name,importance\n";
    for (std::size_t i = 0; i < imp.size(); ++i) {
      const int r = a.roi >= 0 ? a.roi : static_cast<int>(i);
      csv += std::to_string(r) + "," + ds.roi_names[r] + "," + format_double(imp[i]) + "\n";
    }
    write_text_atomic(out / "importance.csv", csv);
    if (a.roi < 0) {
      json top = json::array();
      for (int r : top_k(imp, a.top)) top.push_back({{"roi", r}, {"name", ds.roi_names[r]}, {"importance", imp[r]}});
      write_text_atomic(out / "top_rois.json", top.dump(2) + "\n");
    }
    write_run_json(out, "analyze", {{"mode", a.mode}, {"retrain", a.retrain}, {"roi", a.roi}}, 0, inputs);
    return kOk;
  }

  const auto models = load_run(a.run);
  const RunOutputs r = run_outputs(models, ds);
  const GroupUcs g = group_ucs(r, ds);
  const EdgeStats stats = edge_ttest(g.patients, g.controls);
  ensure_dir(out);
  if (a.mode == "ttest") {
    write_matrix_csv(out / "p_values.csv", stats.p_values);
    write_matrix_csv(out / "t_values.csv", stats.t_values);
    export_edges(stats, 0.05, out / "edges_p005.csv");
    export_edges(stats, 0.001, out / "edges_p0001.csv");
    if (a.threshold != 0.05 && a.threshold != 0.001) export_edges(stats, a.threshold, out / "edges.csv");
    std::vector<double> freq(stats.roi_frequency.data(), stats.roi_frequency.data() + stats.roi_frequency.size());
    json j;
    j["n_patients"] = g.patients.size();
    j["n_controls"] = g.controls.size();
    j["n_significant_005"] = stats.significant_005.size();
    j["n_significant_0001"] = stats.significant_0001.size();
    j["n_degenerate"] = stats.degenerate.size();
    j["roi_frequency"] = freq;
    json top = json::array();
    for (int roi : top_k(freq, a.top)) top.push_back({{"roi", roi}, {"name", ds.roi_names[roi]}, {"count", freq[roi]}});
    j["top_rois"] = top;
    if (!ds.planted_edges.empty()) j["planted_recovery_auroc"] = edge_recovery_auroc(stats.p_values, ds.planted_edges);
    write_text_atomic(out / "ttest.json", j.dump(2) + "\n");
    for (const auto& [i, k] : stats.degenerate) {
      std::cerr << "warning: degenerate edge (" << i << ", " << k << "): zero variance in both groups\n";
    }
  } else {
    const AlteredResult alt = altered_connections(g.patients, g.controls, stats, ds.partition);
    write_matrix_csv(out / "altered.csv", alt.altered);
    const StrengthCell& c = alt.strength.cells.front();
    json j = {{"intra_increased", c.intra_increased},
              {"intra_decreased", c.intra_decreased},
              {"inter_increased", c.inter_increased},
              {"inter_decreased", c.inter_decreased}};
    write_text_atomic(out / "strength.json", j.dump(2) + "\n");
  }
  write_run_json(out, "analyze", {{"mode", a.mode}, {"threshold", a.threshold}}, 0, inputs);
  return kOk;
}

int cmd_export_uc(const Args& a) {
  require_exists(a.data);
  const auto models = load_run(a.run);
  const Dataset ds = load_dataset(a.data);
  const RunOutputs r = run_outputs(models, ds);
  const fs::path out(a.out);
  ensure_dir(out);
  for (std::size_t i = 0; i < r.index.size(); ++i) {
    write_matrix_csv(out / (ds.subjects[r.index[i]].id + "_uc.csv"), r.outputs[i].m);
  }
  write_run_json(out, "export-uc", json::object(), 0, {{"data", a.data}, {"run", a.run}});
  return kOk;
}

int report(const std::string& kind, const std::string& message, const std::string& path, int code) {
  json j;
  j["error"] = kind;
  j["message"] = message;
  if (!path.empty()) j["path"] = path;
  j["exit_code"] = code;
  std::cerr << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prior-guided adversarial representation learning with hypergraph fusion of brain graphs"};
  app.require_subcommand(1);
  Args a;

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic cohort");
  synth->add_option("--config", a.config, "Synthetic cohort JSON");
  synth->add_option("--out", a.out, "Output cohort directory")->required();

  auto* prior = app.add_subcommand("estimate-prior", "Fit the latent prior");
  prior->add_option("--data", a.data, "Dataset manifest")->required();
  prior->add_option("--m", a.m, "Prototype count")->check(CLI::PositiveNumber);
  prior->add_option("--q", a.q, "Latent dimension (default: dataset latent_dim)");
  prior->add_option("--seeds-roi", a.seeds_roi, "Seed ROIs: 0-based indices or ROI names, comma separated");
  prior->add_option("--out", a.out, "Output prior directory")->required();

  auto* train = app.add_subcommand("train", "Train on every subject or by cross-validation");
  train->add_option("--data", a.data, "Dataset manifest")->required();
  train->add_option("--prior", a.prior, "Prior directory");
  train->add_option("--config", a.config, "Training config JSON");
  train->add_option("--jobs", a.jobs, "Worker threads for folds")->check(CLI::PositiveNumber);
  train->add_option("--out", a.out, "Run directory")->required();

  auto* eval = app.add_subcommand("evaluate", "Metrics of a trained run");
  eval->add_option("--run", a.run, "Run directory")->required();
  eval->add_option("--data", a.data, "Dataset manifest")->required();
  eval->add_option("--out", a.out, "Metrics JSON path")->required();

  auto* sweep = app.add_subcommand("sweep", "Cross-validated grid over hyperparameters");
  sweep->add_option("--data", a.data, "Dataset manifest")->required();
  sweep->add_option("--prior", a.prior, "Prior directory");
  sweep->add_option("--config", a.config, "Base training config JSON");
  sweep->add_option("--param", a.params, "name=values; values as a,b,c or a,b,...,c or a:b:step or a..b (decades)")
      ->required();
  sweep->add_option("--jobs", a.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--out", a.out, "Output directory")->required();

  auto* analyze = app.add_subcommand("analyze", "Edge statistics, ROI importance, altered connections");
  analyze->add_option("mode", a.mode, "ttest | importance | altered")->required();
  analyze->add_option("--run", a.run, "Run directory");
  analyze->add_option("--data", a.data, "Dataset manifest")->required();
  analyze->add_option("--out", a.out, "Output directory")->required();
  analyze->add_option("--threshold", a.threshold, "Extra edge-list p threshold");
  analyze->add_option("--roi", a.roi, "Single ROI for importance");
  analyze->add_option("--top", a.top, "Top-k ROIs to list");
  analyze->add_flag("--retrain", a.retrain, "Retrain the cross-validation per shielded ROI");
  analyze->add_option("--config", a.config, "Training config for --retrain");
  analyze->add_option("--prior", a.prior, "Prior directory for --retrain");
  analyze->add_option("--jobs", a.jobs, "Worker threads for --retrain")->check(CLI::PositiveNumber);

  auto* export_uc = app.add_subcommand("export-uc", "Write per-subject united connectivity matrices");
  export_uc->add_option("--run", a.run, "Run directory")->required();
  export_uc->add_option("--data", a.data, "Dataset manifest")->required();
  export_uc->add_option("--out", a.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), "", kUsage);
  }

  try {
    if (synth->parsed()) return cmd_synth(a);
    if (prior->parsed()) return cmd_estimate_prior(a);
    if (train->parsed()) return cmd_train(a);
    if (eval->parsed()) return cmd_evaluate(a);
    if (sweep->parsed()) return cmd_sweep(a);
    if (export_uc->parsed()) return cmd_export_uc(a);
    if (analyze->parsed()) {
      if (a.mode != "importance" || !a.retrain) {
        if (a.run.empty()) throw ConfigError("analyze " + a.mode + " needs --run");
      }
      return cmd_analyze(a);
    }
  } catch (const MissingFileError& e) {
    return report(e.kind(), e.what(), e.path(), kMissingFile);
  } catch (const ConfigError& e) {
    return report(e.kind(), e.what(), "", kInvalidConfig);
  } catch (const IoError& e) {
    return report(e.kind(), e.what(), e.path(), kFailure);
  } catch (const Error& e) {
    return report(e.kind(), e.what(), "", kFailure);
  } catch (const std::exception& e) {
    return report("internal", e.what(), "", kFailure);
  }
  return kUsage;
}
