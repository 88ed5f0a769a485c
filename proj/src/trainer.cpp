#include "uniconn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "uniconn/matrix_io.hpp"

namespace uniconn {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string to_string(PriorMode m) {
  switch (m) {
    case PriorMode::kNone:
      return "none";
    case PriorMode::kNormal:
      return "normal";
    case PriorMode::kEstimated:
      break;
  }
  return "estimated";
}

PriorMode prior_mode_from_string(const std::string& s) {
  if (s == "none") return PriorMode::kNone;
  if (s == "normal") return PriorMode::kNormal;
  if (s == "estimated") return PriorMode::kEstimated;
  throw ConfigError("prior_mode must be one of none|normal|estimated, got '" + s + "'");
}

int TrainConfig::phase_breakpoint() const { return breakpoint >= 0 ? breakpoint : std::min(100, epochs / 2); }

void validate(const TrainConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (cfg.epochs < 1) fail("epochs must be >= 1");
  if (cfg.batch_size < 1) fail("batch_size must be >= 1");
  for (double r : {cfg.lr_main, cfg.lr_main_late, cfg.lr_disc, cfg.lr_hpn}) {
    if (!(r >= 0.0) || !std::isfinite(r)) fail("learning rates must be finite and >= 0");
  }
  if (!(cfg.poly_power >= 0.0)) fail("poly_power must be >= 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(cfg.clip > 0.0)) fail("clip must be > 0");
  if (cfg.breakpoint > cfg.epochs) fail("breakpoint exceeds epochs");
  if (cfg.k < 0) fail("k must be >= 0");
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) fail("lambda must be finite and >= 0");
  if (cfg.folds == 1 || cfg.folds < 0) fail("folds must be 0 or >= 2");
  if (cfg.prior_m < 1) fail("prior_m must be >= 1");
  if (cfg.gcn_hidden < 0 || cfg.c1_hidden < 1 || cfg.c2_hidden < 1 || cfg.disc_channels < 1) {
    fail("layer widths must be positive");
  }
}

namespace {

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known = {
      "epochs", "batch_size", "lr_main", "lr_main_late", "lr_disc", "lr_hpn", "poly_power", "momentum",
      "clip", "breakpoint", "k", "lambda", "prior_mode", "split_discriminator", "seed", "folds", "prior_m",
      "seed_rois", "gcn_hidden", "c1_hidden", "c2_hidden", "disc_channels", "c1_axis"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
  }
  TrainConfig c;
  read_key(j, "epochs", c.epochs);
  read_key(j, "batch_size", c.batch_size);
  read_key(j, "lr_main", c.lr_main);
  read_key(j, "lr_main_late", c.lr_main_late);
  read_key(j, "lr_disc", c.lr_disc);
  read_key(j, "lr_hpn", c.lr_hpn);
  read_key(j, "poly_power", c.poly_power);
  read_key(j, "momentum", c.momentum);
  read_key(j, "clip", c.clip);
  read_key(j, "breakpoint", c.breakpoint);
  read_key(j, "k", c.k);
  read_key(j, "lambda", c.lambda);
  read_key(j, "split_discriminator", c.split_discriminator);
  read_key(j, "seed", c.seed);
  read_key(j, "folds", c.folds);
  read_key(j, "prior_m", c.prior_m);
  read_key(j, "gcn_hidden", c.gcn_hidden);
  read_key(j, "c1_hidden", c.c1_hidden);
  read_key(j, "c2_hidden", c.c2_hidden);
  read_key(j, "disc_channels", c.disc_channels);
  if (j.contains("prior_mode")) {
    std::string s;
    read_key(j, "prior_mode", s);
    c.prior_mode = prior_mode_from_string(s);
  }
  if (j.contains("seed_rois") && !j.at("seed_rois").is_null()) {
    std::vector<int> rois;
    read_key(j, "seed_rois", rois);
    c.seed_rois = rois;
  }
  if (j.contains("c1_axis")) {
    std::string s;
    read_key(j, "c1_axis", s);
    if (s == "feature") {
      c.c1_axis = C1Axis::kFeature;
    } else if (s == "node") {
      c.c1_axis = C1Axis::kNode;
    } else {
      throw ConfigError("c1_axis must be feature|node, got '" + s + "'");
    }
  }
  validate(c);
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr_main"] = c.lr_main;
  j["lr_main_late"] = c.lr_main_late;
  j["lr_disc"] = c.lr_disc;
  j["lr_hpn"] = c.lr_hpn;
  j["poly_power"] = c.poly_power;
  j["momentum"] = c.momentum;
  j["clip"] = c.clip;
  j["breakpoint"] = c.breakpoint;
  j["k"] = c.k;
  j["lambda"] = c.lambda;
  j["prior_mode"] = to_string(c.prior_mode);
  j["split_discriminator"] = c.split_discriminator;
  j["seed"] = c.seed;
  j["folds"] = c.folds;
  j["prior_m"] = c.prior_m;
  j["seed_rois"] = c.seed_rois ? json(*c.seed_rois) : json(nullptr);
  j["gcn_hidden"] = c.gcn_hidden;
  j["c1_hidden"] = c.c1_hidden;
  j["c2_hidden"] = c.c2_hidden;
  j["disc_channels"] = c.disc_channels;
  j["c1_axis"] = c.c1_axis == C1Axis::kFeature ? "feature" : "node";
  return j.dump(2);
}

ModelDims model_dims(const Dataset& ds, const TrainConfig& cfg) {
  ModelDims d;
  d.n_rois = ds.n_rois;
  d.fts_dim = ds.fts_dim;
  d.latent_dim = ds.latent_dim;
  d.gcn_hidden = cfg.gcn_hidden;
  d.c1_hidden = cfg.c1_hidden;
  d.c2_hidden = cfg.c2_hidden;
  d.disc_channels = cfg.disc_channels;
  d.c1_axis = cfg.c1_axis;
  return d;
}

std::vector<int> default_seed_rois(const Dataset& ds) {
  if (ds.n_rois == 90) return {36, 37, 38, 39};
  return {};
}

LearningRates lr_schedule(const TrainConfig& cfg, int epoch, long iter, long max_iter) {
  if (iter < 0 || iter > max_iter) {
    throw InvalidArgument("lr_schedule: iter=" + std::to_string(iter) + " outside [0, " + std::to_string(max_iter) + "]");
  }
  const int bp = cfg.phase_breakpoint();
  LearningRates lr;
  lr.main = epoch < bp ? cfg.lr_main : cfg.lr_main_late;
  lr.disc = cfg.lr_disc;
  if (epoch >= bp) {
    const double progress = max_iter > 0 ? static_cast<double>(iter) / static_cast<double>(max_iter) : 0.0;
    lr.hpn = cfg.lr_hpn * std::pow(1.0 - progress, cfg.poly_power);
  }
  return lr;
}

namespace {

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  z.for_each([](std::string_view, Matrix& m) { m.setZero(); });
  return z;
}

HpnParams zeros_like(const HpnParams& p) {
  HpnParams z = p;
  z.for_each([](std::string_view, Matrix& m) { m.setZero(); });
  return z;
}

template <class Visit>
std::vector<Matrix*> collect(Visit&& visit) {
  std::vector<Matrix*> out;
  visit([&](std::string_view, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<Matrix*> generator_params(ModelParams& p) {
  return collect([&](auto&& f) { p.for_each_generator(f); });
}
std::vector<Matrix*> discriminator_params(ModelParams& p) {
  return collect([&](auto&& f) { p.for_each_discriminator(f); });
}
std::vector<Matrix*> hpn_params(HpnParams& p) {
  return collect([&](auto&& f) { p.for_each(f); });
}

void apply_update(ad::Tape& t, const std::vector<Matrix*>& params, const std::vector<Matrix*>& velocity, double lr,
                  double mu) {
  for (std::size_t i = 0; i < params.size(); ++i) momentum_step(*params[i], *velocity[i], t.grad_of(*params[i]), lr, mu);
}

void require_finite(const ad::Tape& t, ad::Var loss, const char* what) {
  const auto bad = t.first_non_finite();
  if (std::isfinite(loss.scalar()) && !bad) return;
  std::string msg = std::string(what) + " is not finite";
  if (bad) {
    msg += "; first non-finite tensor is node " + std::to_string(bad->first) + " (" + bad->second + ")";
  }
  throw NonFiniteError(msg);
}

Matrix fv_row(const Subject& s) { return s.fv.transpose(); }

}  // namespace

TrainState init_state(const TrainConfig& cfg, const ModelDims& dims) {
  validate(cfg);
  TrainState st;
  st.dims = dims;
  st.rng.seed(cfg.seed);
  st.model = init_model_params(dims, st.rng);
  st.hpn = init_hpn_params(dims, cfg.k, cfg.lambda, st.rng);
  st.model_velocity = zeros_like(st.model);
  st.hpn_velocity = zeros_like(st.hpn);
  st.best_model = st.model;
  st.best_hpn = st.hpn;
  return st;
}

void momentum_step(Matrix& theta, Matrix& velocity, const Matrix& grad, double lr, double mu) {
  velocity = mu * velocity - lr * grad;
  theta += velocity;
}

void clip_discriminator(ModelParams& p, double clip) {
  p.for_each_discriminator([&](std::string_view, Matrix& m) { m = m.cwiseMax(-clip).cwiseMin(clip); });
}

Matrix sample_prior(PriorMode mode, const PriorModel* prior, int n_rows, int q, std::mt19937_64& rng) {
  switch (mode) {
    case PriorMode::kEstimated: {
      if (prior == nullptr) throw InvalidArgument("estimated prior mode needs a fitted prior");
      if (prior->latent_dim() != q) {
        throw ShapeError("prior latent dim " + std::to_string(prior->latent_dim()) + " != model latent dim " +
                         std::to_string(q));
      }
      return sample_z(*prior, n_rows, rng);
    }
    case PriorMode::kNormal: {
      std::normal_distribution<double> normal(0.0, 1.0);
      Matrix z(n_rows, q);
      for (Eigen::Index j = 0; j < q; ++j) {
        for (Eigen::Index i = 0; i < n_rows; ++i) z(i, j) = normal(rng);
      }
      return z;
    }
    case PriorMode::kNone:
      break;
  }
  return Matrix::Zero(n_rows, q);
}

namespace {

void add_scores(ad::Tape& t, const ModelParams& p, ad::Var adj, ad::Var x, SubjectGraph& g, const GraphOptions& opt) {
  if (opt.z == nullptr) return;
  ad::Var z = t.constant(*opt.z);
  g.x_gen = gcn_forward(t, p.g2, adj, z);
  ad::Var real = discriminate(t, p.disc, x, z, opt.split).score;
  g.scores.d_z = real;
  g.scores.d_x = real;
  g.scores.d_gz = discriminate(t, p.disc, g.x_gen, z, opt.split).score;
  g.scores.d_g1 = discriminate(t, p.disc, x, g.z_hat, opt.split).score;
  g.scores.d_s = discriminate(t, p.disc, x, g.v_hat, opt.split).score;
  g.has_scores = true;
}

}  // namespace

SubjectGraph build_subject_graph(ad::Tape& t, const ModelParams& p, const HpnParams& hpn, const Subject& s,
                                 const GraphOptions& opt) {
  SubjectGraph g;
  ad::Var adj = t.constant(normalized_adjacency(s.sc));
  ad::Var x = t.constant(s.fts);
  g.z_hat = gcn_forward(t, p.g1, adj, x);
  g.v_hat = encode_fv(t, p.s, adj, t.constant(fv_row(s)));
  if (opt.adversarial_only) {
    add_scores(t, p, adj, x, g, opt);
    return g;
  }

  g.x_rec = gcn_forward(t, p.g2, adj, g.z_hat);
  g.a_rec = reconstruct_adjacency(g.z_hat);
  g.v_rec = decode_fv(t, p.s_dec, adj, g.v_hat);
  g.rec1 = bce(s.fts, g.x_rec) + bce(s.sc, g.a_rec);
  g.rec2 = bce(fv_row(s), g.v_rec);
  g.cls1 = cross_entropy(classify_c1(t, p.c1, g.z_hat, opt.c1_axis), s.label);
  g.cls2 = cross_entropy(classify_c1(t, p.c1, g.v_hat, opt.c1_axis), s.label);

  add_scores(t, p, adj, x, g, opt);

  ad::Var hz_in = opt.detach_hpn ? ad::detach(g.z_hat) : g.z_hat;
  ad::Var hv_in = opt.detach_hpn ? ad::detach(g.v_hat) : g.v_hat;
  static const std::optional<Hypergraph> none;
  g.hpn = hpn_forward(t, hpn, hz_in, hv_in, opt.hz ? *opt.hz : none, opt.hv ? *opt.hv : none);
  g.cls3 = cross_entropy(g.hpn.logits, s.label);
  g.sparse = sparse_loss(g.hpn.m);
  return g;
}

LossReport train_step(TrainState& state, const TrainConfig& cfg, const std::vector<const Subject*>& batch,
                      const PriorModel* prior, const LearningRates& lr) {
  if (batch.empty()) throw InvalidArgument("train_step: empty batch");
  const int n = state.dims.n_rois;
  const int q = state.dims.latent_dim;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const bool adversarial = cfg.prior_mode != PriorMode::kNone;

  std::vector<Matrix> zs;
  if (adversarial) {
    for (std::size_t i = 0; i < batch.size(); ++i) zs.push_back(sample_prior(cfg.prior_mode, prior, n, q, state.rng));
  }

  GraphOptions opt;
  opt.split = cfg.split_discriminator;
  opt.c1_axis = cfg.c1_axis;

  LossReport rep;

  if (adversarial) {
    ad::Tape t;
    const auto disc = discriminator_params(state.model);
    for (Matrix* m : disc) t.watch(*m);
    opt.adversarial_only = true;
    std::optional<AdvScores<ad::Var>> sum;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      opt.z = &zs[i];
      const SubjectGraph g = build_subject_graph(t, state.model, state.hpn, *batch[i], opt);
      if (!sum) {
        sum = g.scores;
      } else {
        sum->d_z = sum->d_z + g.scores.d_z;
        sum->d_x = sum->d_x + g.scores.d_x;
        sum->d_gz = sum->d_gz + g.scores.d_gz;
        sum->d_g1 = sum->d_g1 + g.scores.d_g1;
        sum->d_s = sum->d_s + g.scores.d_s;
      }
    }
    const AdvScores<ad::Var> mean{inv * sum->d_z, inv * sum->d_x, inv * sum->d_gz, inv * sum->d_g1, inv * sum->d_s};
    ad::Var loss_d = adv_losses(mean).d;
    require_finite(t, loss_d, "discriminator loss");
    t.backward(loss_d);
    apply_update(t, disc, discriminator_params(state.model_velocity), lr.disc, cfg.momentum);
    clip_discriminator(state.model, cfg.clip);
    rep.d_loss = loss_d.scalar();
  }

  opt.adversarial_only = false;
  ad::Tape t;
  const auto gen = generator_params(state.model);
  const auto hpn = hpn_params(state.hpn);
  for (Matrix* m : gen) t.watch(*m);
  const bool train_hpn = lr.hpn > 0.0;
  if (train_hpn) {
    for (Matrix* m : hpn) t.watch(*m);
  }
  std::vector<ad::Var> gen_terms;
  std::vector<ad::Var> hpn_terms;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    opt.z = adversarial ? &zs[i] : nullptr;
    const SubjectGraph g = build_subject_graph(t, state.model, state.hpn, *batch[i], opt);
    ad::Var term = g.rec1 + g.rec2 + g.cls1 + g.cls2;
    if (g.has_scores) {
      const double gl = -(g.scores.d_gz.scalar() + g.scores.d_g1.scalar() + g.scores.d_s.scalar());
      rep.g_loss += inv * gl;
      term = term - (g.scores.d_gz + g.scores.d_g1 + g.scores.d_s);
    }
    gen_terms.push_back(term);
    hpn_terms.push_back(g.cls3 + cfg.lambda * g.sparse);
    rep.rec1 += inv * g.rec1.scalar();
    rep.rec2 += inv * g.rec2.scalar();
    rep.cls1 += inv * g.cls1.scalar();
    rep.cls2 += inv * g.cls2.scalar();
    rep.cls3 += inv * g.cls3.scalar();
    rep.sparse += inv * g.sparse.scalar();
  }
  ad::Var loss = gen_terms.front();
  for (std::size_t i = 1; i < gen_terms.size(); ++i) loss = loss + gen_terms[i];
  if (train_hpn) {
    for (const ad::Var& h : hpn_terms) loss = loss + h;
  }
  loss = inv * loss;
  require_finite(t, loss, "generator loss");
  t.backward(loss);
  apply_update(t, gen, generator_params(state.model_velocity), lr.main, cfg.momentum);
  if (train_hpn) apply_update(t, hpn, hpn_params(state.hpn_velocity), lr.hpn, cfg.momentum);

  rep.finalize(cfg.lambda);
  if (!std::isfinite(rep.total)) throw NonFiniteError("loss report total is not finite");
  return rep;
}

TrainState train_fold(const TrainConfig& cfg, const ModelDims& dims, const std::vector<const Subject*>& train,
                      const PriorModel* prior, const EpochCallback& on_epoch) {
  validate(cfg);
  if (static_cast<int>(train.size()) < cfg.batch_size) {
    throw InvalidArgument("train_fold: " + std::to_string(train.size()) + " subjects is fewer than batch_size " +
                          std::to_string(cfg.batch_size));
  }
  TrainState st = init_state(cfg, dims);
  const int n = static_cast<int>(train.size());
  const int bpe = (n + cfg.batch_size - 1) / cfg.batch_size;
  const int bp = cfg.phase_breakpoint();
  const long max_iter = static_cast<long>(cfg.epochs - bp) * bpe;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  st.history.reserve(static_cast<std::size_t>(cfg.epochs) * bpe);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    st.epoch = epoch;
    std::shuffle(order.begin(), order.end(), st.rng);
    LossReport mean;
    for (int b = 0; b < bpe; ++b) {
      std::vector<const Subject*> batch;
      for (int i = b * cfg.batch_size; i < std::min(n, (b + 1) * cfg.batch_size); ++i) batch.push_back(train[order[i]]);
      const long iter = epoch < bp ? 0 : static_cast<long>(epoch - bp) * bpe + b;
      const LearningRates lr = lr_schedule(cfg, epoch, iter, max_iter);
      LossReport r = train_step(st, cfg, batch, prior, lr);
      st.history.push_back(r);
      st.lr_trace.push_back(lr);
      mean += r;
    }
    mean *= 1.0 / static_cast<double>(bpe);
    st.epoch_totals.push_back(mean.total);
    if (st.best_epoch < 0 || mean.total < st.best_total) {
      st.best_total = mean.total;
      st.best_epoch = epoch;
      st.best_model = st.model;
      st.best_hpn = st.hpn;
    }
    if (on_epoch) on_epoch(st, mean);
  }
  st.epoch = cfg.epochs;
  return st;
}

SubjectOutputs forward_subject(const ModelParams& p, const HpnParams& hpn, const Subject& s) {
  ad::Tape t;
  ad::Var adj = t.constant(normalized_adjacency(s.sc));
  ad::Var z_hat = gcn_forward(t, p.g1, adj, t.constant(s.fts));
  ad::Var v_hat = encode_fv(t, p.s, adj, t.constant(fv_row(s)));
  const HpnForward h = hpn_forward(t, hpn, z_hat, v_hat);
  SubjectOutputs out;
  out.z_hat = z_hat.value();
  out.v_hat = v_hat.value();
  out.m = united_connectivity(h.f.value()).m;
  out.logits = h.logits.value();
  const double top = out.logits.maxCoeff();
  const double e0 = std::exp(out.logits(0, 0) - top);
  const double e1 = std::exp(out.logits(0, 1) - top);
  out.score = e1 / (e0 + e1);
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<FoldResult> cross_validate(const TrainConfig& cfg, const Dataset& ds, const PriorModel* prior, int jobs) {
  validate(cfg);
  if (cfg.folds < 2) throw ConfigError("cross_validate needs folds >= 2");
  const std::vector<Fold> folds = kfold_split(ds, cfg.folds, cfg.seed);
  const ModelDims dims = model_dims(ds, cfg);
  const std::vector<int> seeds = cfg.seed_rois ? *cfg.seed_rois : default_seed_rois(ds);
  std::vector<FoldResult> results(folds.size());

  auto run = [&](std::size_t f) {
    TrainConfig fc = cfg;
    fc.seed = derive_seed(cfg.seed, f);
    std::vector<const Subject*> train;
    for (int i : folds[f].train) train.push_back(&ds.subjects[i]);
    std::optional<PriorModel> fitted;
    const PriorModel* use = prior;
    if (fc.prior_mode == PriorMode::kEstimated && use == nullptr) {
      fitted = fit_prior(train, fc.prior_m, dims.latent_dim, seeds);
      use = &*fitted;
    }
    FoldResult r;
    r.fold = folds[f];
    r.state = train_fold(fc, dims, train, use);
    for (int i : folds[f].test) {
      r.test_scores.push_back(forward_subject(r.state.best_model, r.state.best_hpn, ds.subjects[i]).score);
    }
    results[f] = std::move(r);
  };

  const int workers = std::clamp(jobs, 1, static_cast<int>(folds.size()));
  if (workers == 1) {
    for (std::size_t f = 0; f < folds.size(); ++f) run(f);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t f = next++; f < folds.size(); f = next++) {
        try {
          run(f);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return results;
}

void save_checkpoint(const fs::path& dir, const ModelDims& dims, const ModelParams& model, const HpnParams& hpn) {
  std::error_code ec;
  fs::create_directories(dir / "weights", ec);
  if (ec) throw IoError("cannot create directory: " + dir.string(), dir.string());
  json j;
  j["format"] = "uniconn-checkpoint";
  j["version"] = 1;
  j["dims"] = {{"n_rois", dims.n_rois},         {"fts_dim", dims.fts_dim},
               {"latent_dim", dims.latent_dim}, {"gcn_hidden", dims.gcn_hidden},
               {"c1_hidden", dims.c1_hidden},   {"c2_hidden", dims.c2_hidden},
               {"disc_channels", dims.disc_channels},
               {"c1_axis", dims.c1_axis == C1Axis::kFeature ? "feature" : "node"}};
  j["k"] = hpn.k;
  j["lambda"] = hpn.lambda;
  json mats = json::array();
  auto emit = [&](std::string_view name, const Matrix& m) {
    const std::string file = "weights/" + std::string(name) + ".csv";
    write_matrix_csv(dir / file, m);
    mats.push_back({{"name", name}, {"file", file}, {"rows", m.rows()}, {"cols", m.cols()}});
  };
  model.for_each(emit);
  hpn.for_each(emit);
  j["matrices"] = mats;
  write_text_atomic(dir / "index.json", j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path index = dir / "index.json";
  json j;
  try {
    j = json::parse(read_text(index));
  } catch (const json::exception& e) {
    throw FormatError(std::string("index.json: ") + e.what(), index.string());
  }
  Checkpoint c;
  std::unordered_map<std::string, std::string> files;
  try {
    const json& d = j.at("dims");
    c.dims.n_rois = d.at("n_rois").get<int>();
    c.dims.fts_dim = d.at("fts_dim").get<int>();
    c.dims.latent_dim = d.at("latent_dim").get<int>();
    c.dims.gcn_hidden = d.at("gcn_hidden").get<int>();
    c.dims.c1_hidden = d.at("c1_hidden").get<int>();
    c.dims.c2_hidden = d.at("c2_hidden").get<int>();
    c.dims.disc_channels = d.at("disc_channels").get<int>();
    c.dims.c1_axis = d.at("c1_axis").get<std::string>() == "node" ? C1Axis::kNode : C1Axis::kFeature;
    for (const auto& m : j.at("matrices")) files[m.at("name").get<std::string>()] = m.at("file").get<std::string>();
    std::mt19937_64 rng(0);
    c.model = init_model_params(c.dims, rng);
    c.hpn = init_hpn_params(c.dims, j.at("k").get<int>(), j.at("lambda").get<double>(), rng);
  } catch (const json::exception& e) {
    throw FormatError(std::string("index.json: ") + e.what(), index.string());
  }
  auto fill = [&](std::string_view name, Matrix& m) {
    const auto it = files.find(std::string(name));
    if (it == files.end()) throw FormatError("checkpoint lacks matrix '" + std::string(name) + "'", index.string());
    Matrix loaded = read_matrix_csv(dir / it->second);
    if (loaded.rows() != m.rows() || loaded.cols() != m.cols()) {
      throw ShapeError("checkpoint matrix '" + std::string(name) + "' is " + shape_str(loaded) + ", expected " +
                       shape_str(m));
    }
    m = std::move(loaded);
  };
  c.model.for_each(fill);
  c.hpn.for_each(fill);
  return c;
}

}  // namespace uniconn
