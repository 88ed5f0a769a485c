#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "uniconn/data_io.hpp"
#include "uniconn/hpn.hpp"
#include "uniconn/model.hpp"
#include "uniconn/tensor.hpp"

namespace uniconn::fixtures {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  }
  return m;
}

inline Matrix random_adjacency(int n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution edge(p);
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) a(i, j) = a(j, i) = edge(rng) ? 1.0 : 0.0;
  }
  return a;
}

/// Targets kept inside (0.05, 0.95) so BCE stays smooth.
inline Subject random_subject(int n, int d, int q, int label, std::mt19937_64& rng) {
  Subject s;
  s.id = "rand";
  s.sc = random_adjacency(n, 0.3, rng);
  s.fts = random_matrix(n, d, rng, 0.05, 0.95);
  s.fv = random_matrix(q, 1, rng, 0.05, 0.95);
  s.label = label;
  return s;
}

inline Matrix permutation_matrix(const std::vector<int>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) p(i, perm[i]) = 1.0;
  return p;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("uniconn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

struct NamedParam {
  std::string name;
  Matrix* m = nullptr;
};

template <class Visitable>
void append_params(std::vector<NamedParam>& out, Visitable&& visit) {
  visit([&](std::string_view name, Matrix& m) { out.push_back({std::string(name), &m}); });
}

struct GradCheckReport {
  double max_rel = 0.0;
  std::string worst;
  int entries = 0;
};

/// Compares reverse-mode gradients of `loss` with central differences on up
/// to `max_entries` sampled entries of every parameter. The error of a matrix
/// is ||analytic - numeric|| / max(||analytic||, ||numeric||, floor) over its
/// sampled entries. Parameters are restored exactly.
inline GradCheckReport grad_check(const std::vector<NamedParam>& params,
                                  const std::function<ad::Var(ad::Tape&)>& loss, std::mt19937_64& rng,
                                  int max_entries = 6, double h = 1e-5, double floor = 1e-8) {
  std::vector<Matrix> analytic;
  {
    ad::Tape t;
    for (const auto& p : params) t.watch(*p.m);
    ad::Var l = loss(t);
    t.backward(l);
    for (const auto& p : params) analytic.push_back(t.grad_of(*p.m));
  }
  auto eval = [&] {
    ad::Tape t;
    return loss(t).scalar();
  };
  GradCheckReport rep;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& m = *params[k].m;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    if (static_cast<int>(idx.size()) > max_entries) idx.resize(static_cast<std::size_t>(max_entries));
    Vector a(static_cast<Eigen::Index>(idx.size())), num(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t e = 0; e < idx.size(); ++e) {
      double& x = m.data()[idx[e]];
      const double saved = x;
      x = saved + h;
      const double up = eval();
      x = saved - h;
      const double down = eval();
      x = saved;
      num(static_cast<Eigen::Index>(e)) = (up - down) / (2.0 * h);
      a(static_cast<Eigen::Index>(e)) = analytic[k].data()[idx[e]];
    }
    const double denom = std::max({a.norm(), num.norm(), floor});
    const double rel = (a - num).norm() / denom;
    rep.entries += static_cast<int>(idx.size());
    if (rep.worst.empty() || rel > rep.max_rel) {
      rep.max_rel = rel;
      rep.worst = params[k].name;
    }
  }
  return rep;
}

}  // namespace uniconn::fixtures
