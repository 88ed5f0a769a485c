#include "uniconn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"
#include "uniconn/matrix_io.hpp"

namespace uniconn {

namespace fs = std::filesystem;

std::string Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["acc"] = acc;
  j["sen"] = sen;
  j["spe"] = spe;
  j["auc"] = auc;
  j["tp"] = tp;
  j["tn"] = tn;
  j["fp"] = fp;
  j["fn"] = fn;
  return j.dump(2);
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  const auto neg = static_cast<long>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw InvalidArgument("roc_auc: AUC is undefined for single-class input");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double area = 0.0;
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    long dtp = 0, dfp = 0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      if (labels[order[i]] == 1) {
        ++dtp;
      } else {
        ++dfp;
      }
    }
    area += static_cast<double>(dfp) * (static_cast<double>(tp) + 0.5 * static_cast<double>(dtp));
    tp += dtp;
    fp += dfp;
  }
  return area / (static_cast<double>(pos) * static_cast<double>(neg));
}

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  Metrics m;
  m.auc = roc_auc(scores, labels);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? m.tp : m.fn)++;
    } else {
      (predicted ? m.fp : m.tn)++;
    }
  }
  m.acc = static_cast<double>(m.tp + m.tn) / static_cast<double>(scores.size());
  m.sen = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  m.spe = static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp);
  return m;
}

std::vector<double> predict_scores(const ModelParams& model, const HpnParams& hpn,
                                   const std::vector<const Subject*>& subjects) {
  std::vector<double> out;
  out.reserve(subjects.size());
  for (const Subject* s : subjects) out.push_back(forward_subject(model, hpn, *s).score);
  return out;
}

Metrics evaluate(const ModelParams& model, const HpnParams& hpn, const std::vector<const Subject*>& subjects) {
  if (subjects.empty()) throw InvalidArgument("evaluate: no subjects");
  std::vector<int> labels;
  for (const Subject* s : subjects) labels.push_back(s->label);
  return compute_metrics(predict_scores(model, hpn, subjects), labels);
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("welch_t_test: each group needs at least 2 values");
  auto moments = [](const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  WelchResult r;
  const double sa = va / static_cast<double>(a.size());
  const double sb = vb / static_cast<double>(b.size());
  if (sa + sb == 0.0) {
    r.degenerate = true;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.dof = (sa + sb) * (sa + sb) /
          (sa * sa / static_cast<double>(a.size() - 1) + sb * sb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(r.dof);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(dist, -std::abs(r.t)));
  return r;
}

EdgeStats edge_ttest(const std::vector<UnitedConnectivity>& group_a, const std::vector<UnitedConnectivity>& group_b) {
  if (group_a.size() < 2 || group_b.size() < 2) throw InvalidArgument("edge_ttest: each group needs at least 2 subjects");
  const Eigen::Index n = group_a.front().m.rows();
  for (const auto* g : {&group_a, &group_b}) {
    for (const auto& uc : *g) {
      if (uc.m.rows() != n || uc.m.cols() != n) throw ShapeError("edge_ttest: inconsistent UC shape " + shape_str(uc.m));
    }
  }
  EdgeStats st;
  st.p_values = Matrix::Ones(n, n);
  st.t_values = Matrix::Zero(n, n);
  st.mean_diff = Matrix::Zero(n, n);
  st.altered = Matrix::Zero(n, n);
  st.roi_frequency = Vector::Zero(n);
  std::vector<double> a(group_a.size()), b(group_b.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      for (std::size_t s = 0; s < a.size(); ++s) a[s] = group_a[s].m(i, j);
      for (std::size_t s = 0; s < b.size(); ++s) b[s] = group_b[s].m(i, j);
      const WelchResult w = welch_t_test(a, b);
      const double diff = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size()) -
                          std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
      st.p_values(i, j) = st.p_values(j, i) = w.p;
      st.t_values(i, j) = st.t_values(j, i) = w.t;
      st.mean_diff(i, j) = st.mean_diff(j, i) = diff;
      const auto edge = std::pair{static_cast<int>(i), static_cast<int>(j)};
      if (w.degenerate) st.degenerate.push_back(edge);
      if (w.p < 0.05) {
        st.significant_005.push_back(edge);
        st.altered(i, j) = st.altered(j, i) = diff;
        st.roi_frequency(i) += 1.0;
        st.roi_frequency(j) += 1.0;
      }
      if (w.p < 0.001) st.significant_0001.push_back(edge);
    }
  }
  return st;
}

double StrengthCell::max_abs() const {
  return std::max({std::abs(intra_increased), std::abs(intra_decreased), std::abs(inter_increased),
                   std::abs(inter_decreased)});
}

StrengthCell strength_cell(const Matrix& altered, const std::vector<int>& partition) {
  if (static_cast<Eigen::Index>(partition.size()) != altered.rows()) {
    throw ShapeError("strength_cell: partition covers " + std::to_string(partition.size()) + " ROIs, matrix is " +
                     shape_str(altered));
  }
  StrengthCell c;
  for (Eigen::Index i = 0; i < altered.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < altered.cols(); ++j) {
      const double v = altered(i, j);
      const bool intra = partition[i] == partition[j];
      if (v > 0) {
        (intra ? c.intra_increased : c.inter_increased) += v;
      } else if (v < 0) {
        (intra ? c.intra_decreased : c.inter_decreased) += -v;
      }
    }
  }
  return c;
}

NetworkStrength normalize_strengths(NetworkStrength s, bool global) {
  auto scale = [](StrengthCell& c, double top) {
    if (top <= 0.0) return;
    c.intra_increased /= top;
    c.intra_decreased /= top;
    c.inter_increased /= top;
    c.inter_decreased /= top;
  };
  if (global) {
    double top = 0.0;
    for (const auto& c : s.cells) top = std::max(top, c.max_abs());
    for (auto& c : s.cells) scale(c, top);
  } else {
    for (auto& c : s.cells) scale(c, c.max_abs());
  }
  return s;
}

AlteredResult altered_connections(const std::vector<UnitedConnectivity>& patients,
                                  const std::vector<UnitedConnectivity>& controls, const EdgeStats& stats,
                                  const std::vector<int>& partition) {
  if (patients.empty() || controls.empty()) throw InvalidArgument("altered_connections: empty group");
  const Eigen::Index n = stats.p_values.rows();
  Matrix mp = Matrix::Zero(n, n), mc = Matrix::Zero(n, n);
  for (const auto& u : patients) mp += u.m;
  for (const auto& u : controls) mc += u.m;
  const Matrix diff = mp / static_cast<double>(patients.size()) - mc / static_cast<double>(controls.size());
  AlteredResult r;
  r.altered = Matrix::Zero(n, n);
  for (const auto& [i, j] : stats.significant_005) r.altered(i, j) = r.altered(j, i) = diff(i, j);
  r.strength.stages = {"stage"};
  r.strength.cells = {strength_cell(r.altered, partition)};
  r.strength = normalize_strengths(std::move(r.strength));
  return r;
}

std::vector<EdgeRecord> edges_below(const EdgeStats& stats, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("export_edges: threshold must lie in (0, 1)");
  std::vector<EdgeRecord> rows;
  const Eigen::Index n = stats.p_values.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (stats.p_values(i, j) < threshold) {
        rows.push_back({static_cast<int>(i), static_cast<int>(j), stats.p_values(i, j), stats.mean_diff(i, j)});
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const EdgeRecord& a, const EdgeRecord& b) { return a.p < b.p; });
  return rows;
}

void export_edges(const EdgeStats& stats, double threshold, const fs::path& path) {
  std::string out = "roi_i,roi_j,p,delta\n";
  for (const auto& r : edges_below(stats, threshold)) {
    out += std::to_string(r.roi_i) + "," + std::to_string(r.roi_j) + "," + format_double(r.p) + "," +
           format_double(r.delta) + "\n";
  }
  write_text_atomic(path, out);
}

std::vector<EdgeRecord> read_edges(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != "roi_i,roi_j,p,delta") throw FormatError("edge list: bad header", path.string());
  std::vector<EdgeRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 4) throw FormatError("edge list: expected 4 fields in '" + line + "'", path.string());
    const std::string where = path.string();
    rows.push_back({static_cast<int>(parse_double(f[0], where)), static_cast<int>(parse_double(f[1], where)),
                    parse_double(f[2], where), parse_double(f[3], where)});
  }
  return rows;
}

double edge_recovery_auroc(const Matrix& p_values, const std::vector<PlantedEdge>& truth) {
  const Eigen::Index n = p_values.rows();
  Matrix is_true = Matrix::Zero(n, n);
  for (const auto& e : truth) is_true(e.i, e.j) = 1.0;
  std::vector<double> scores;
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      scores.push_back(-p_values(i, j));
      labels.push_back(is_true(i, j) > 0 ? 1 : 0);
    }
  }
  return roc_auc(scores, labels);
}

Subject shield_roi(const Subject& s, int roi) {
  if (roi < 0 || roi >= s.sc.rows()) throw InvalidArgument("shield_roi: ROI " + std::to_string(roi) + " out of range");
  Subject out = s;
  out.sc.row(roi).setZero();
  out.sc.col(roi).setZero();
  out.fts.row(roi).setZero();
  return out;
}

std::vector<FoldModel> fold_models(const std::vector<FoldResult>& folds) {
  std::vector<FoldModel> out;
  for (const auto& f : folds) out.push_back({&f.state.best_model, &f.state.best_hpn, f.fold.test});
  return out;
}

double roi_importance(const std::vector<FoldModel>& folds, const Dataset& ds, int roi) {
  if (roi < 0 || roi >= ds.n_rois) throw InvalidArgument("roi_importance: ROI " + std::to_string(roi) + " out of range");
  if (folds.empty()) throw InvalidArgument("roi_importance: no fold models");
  double acc_sum = 0.0;
  for (const auto& f : folds) {
    int correct = 0;
    for (int i : f.test) {
      const Subject shielded = shield_roi(ds.subjects[i], roi);
      const int predicted = forward_subject(*f.model, *f.hpn, shielded).score >= 0.5 ? 1 : 0;
      correct += predicted == shielded.label ? 1 : 0;
    }
    acc_sum += f.test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(f.test.size());
  }
  return 1.0 - acc_sum / static_cast<double>(folds.size());
}

std::vector<double> roi_importance_all(const std::vector<FoldModel>& folds, const Dataset& ds) {
  std::vector<double> out;
  for (int r = 0; r < ds.n_rois; ++r) out.push_back(roi_importance(folds, ds, r));
  return out;
}

double roi_importance_retrain(const TrainConfig& cfg, const Dataset& ds, int roi, const PriorModel* prior, int jobs) {
  if (roi < 0 || roi >= ds.n_rois) throw InvalidArgument("roi_importance: ROI " + std::to_string(roi) + " out of range");
  Dataset shielded = ds;
  for (auto& s : shielded.subjects) s = shield_roi(s, roi);
  const auto folds = cross_validate(cfg, shielded, prior, jobs);
  double acc_sum = 0.0;
  for (const auto& f : folds) {
    int correct = 0;
    for (std::size_t t = 0; t < f.fold.test.size(); ++t) {
      const int predicted = f.test_scores[t] >= 0.5 ? 1 : 0;
      correct += predicted == shielded.subjects[f.fold.test[t]].label ? 1 : 0;
    }
    acc_sum += static_cast<double>(correct) / static_cast<double>(f.fold.test.size());
  }
  return 1.0 - acc_sum / static_cast<double>(folds.size());
}

std::vector<int> top_k(const std::vector<double>& values, int k) {
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return values[a] > values[b]; });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(k, 0))));
  return idx;
}

}  // namespace uniconn
