#include "uniconn/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "json.hpp"
#include "uniconn/matrix_io.hpp"

namespace uniconn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void require_symmetric(const Matrix& k, const char* where) {
  if (k.rows() != k.cols()) throw ShapeError(std::string(where) + ": kernel must be square, got " + shape_str(k));
  const double tol = 1e-12 * std::max(1.0, k.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < k.cols(); ++j) {
      if (std::abs(k(i, j) - k(j, i)) > tol) {
        throw AsymmetryError(where, static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
}

}  // namespace

std::vector<int> dpp_select(const Matrix& kernel, const std::vector<int>& seed_rois, int m) {
  require_symmetric(kernel, "dpp_select");
  const int n = static_cast<int>(kernel.rows());
  if (m > n) throw InvalidArgument("dpp_select: m=" + std::to_string(m) + " exceeds N=" + std::to_string(n));
  if (m < static_cast<int>(seed_rois.size())) throw InvalidArgument("dpp_select: m smaller than seed set");
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  for (int s : seed_rois) {
    if (s < 0 || s >= n) throw InvalidArgument("dpp_select: seed ROI " + std::to_string(s) + " out of range");
    if (chosen[s]) throw InvalidArgument("dpp_select: duplicate seed ROI " + std::to_string(s));
    chosen[s] = 1;
  }
  std::fill(chosen.begin(), chosen.end(), 0);

  // Incremental Cholesky: after t picks, residual[i] = K_ii - |c_i|^2 is the
  // log-det gain exp() of adding i, and c_i holds its projection.
  Vector residual = kernel.diagonal();
  Matrix proj = Matrix::Zero(std::max(m, 1), n);
  std::vector<int> picked;
  for (int t = 0; t < m; ++t) {
    int j = -1;
    if (t < static_cast<int>(seed_rois.size())) {
      j = seed_rois[t];
    } else {
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (!chosen[i] && residual(i) > best) {
          best = residual(i);
          j = i;
        }
      }
    }
    if (!(residual(j) > 0.0)) {
      throw DomainError("dpp_select: kernel not positive definite on the selected subset");
    }
    const double dj = std::sqrt(residual(j));
    chosen[j] = 1;
    picked.push_back(j);
    for (int i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      const double e = (kernel(j, i) - proj.col(j).head(t).dot(proj.col(i).head(t))) / dj;
      proj(t, i) = e;
      residual(i) -= e * e;
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

double subset_logdet(const Matrix& kernel, const std::vector<int>& subset) {
  const auto k = static_cast<Eigen::Index>(subset.size());
  Matrix sub(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = kernel(subset[a], subset[b]);
  }
  Eigen::LLT<Matrix> llt(sub);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix prototype_kernel(const std::vector<const Subject*>& subjects) {
  if (subjects.empty()) throw InvalidArgument("prototype_kernel: no subjects");
  const Eigen::Index n = subjects.front()->sc.rows();
  Matrix k = Matrix::Zero(n, n);
  for (const Subject* s : subjects) k += s->sc;
  k /= static_cast<double>(subjects.size());
  k.diagonal().array() += 1.0 + kDppRidge;
  return k;
}

Vector scott_bandwidth(const Matrix& centers) {
  const Eigen::Index n = centers.rows();
  const Eigen::Index q = centers.cols();
  const double factor = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(q) + 4.0));
  Vector b(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    double sigma = 0.0;
    if (n > 1) {
      const double mu = centers.col(j).mean();
      sigma = std::sqrt((centers.col(j).array() - mu).square().sum() / static_cast<double>(n - 1));
    }
    if (!(sigma > 0.0)) sigma = 1.0;
    b(j) = sigma * factor;
  }
  return b;
}

PriorModel fit_prior(const std::vector<const Subject*>& train, int m, int q, const std::vector<int>& seed_rois) {
  if (train.empty()) throw InvalidArgument("fit_prior: empty training set");
  if (q < 1) throw InvalidArgument("fit_prior: q must be >= 1");
  const Eigen::Index d = train.front()->fts.cols();
  const int pooled = static_cast<int>(train.size()) * m;
  if (q > std::min<Eigen::Index>(pooled - 1, d)) {
    throw RankError("fit_prior: q=" + std::to_string(q) + " exceeds min(S*m - 1, d) = " +
                    std::to_string(std::min<Eigen::Index>(pooled - 1, d)));
  }

  PriorModel p;
  p.seed_rois = seed_rois;
  p.prototypes = dpp_select(prototype_kernel(train), seed_rois, m);

  Matrix rows(pooled, d);
  int r = 0;
  for (const Subject* s : train) {
    for (int roi : p.prototypes) rows.row(r++) = s->fts.row(roi);
  }
  p.pca_mean = rows.colwise().mean().transpose();
  const Matrix centered = rows.rowwise() - p.pca_mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(std::max(pooled - 1, 1));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw RankError("fit_prior: eigendecomposition failed");
  // Eigenvalues ascend; take the last q columns in descending order.
  p.pca_basis.resize(d, q);
  for (int c = 0; c < q; ++c) {
    Vector v = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    p.pca_basis.col(c) = v;
  }
  p.kde_centers = centered * p.pca_basis;
  p.bandwidth = scott_bandwidth(p.kde_centers);
  return p;
}

PriorModel fit_prior(const Dataset& train, int m, int q, const std::vector<int>& seed_rois) {
  std::vector<const Subject*> ptrs;
  for (const auto& s : train.subjects) ptrs.push_back(&s);
  return fit_prior(ptrs, m, q, seed_rois);
}

double log_density(const PriorModel& p, const Vector& z) {
  const Eigen::Index q = p.kde_centers.cols();
  if (z.size() != q) throw ShapeError("density: z has " + std::to_string(z.size()) + " dims, expected " + std::to_string(q));
  const double log_norm = -p.bandwidth.array().log().sum() - 0.5 * static_cast<double>(q) * std::log(2.0 * std::numbers::pi);
  Vector terms(p.kde_centers.rows());
  for (Eigen::Index i = 0; i < p.kde_centers.rows(); ++i) {
    const auto u = (z.transpose() - p.kde_centers.row(i)).array() / p.bandwidth.transpose().array();
    terms(i) = -0.5 * u.square().sum() + log_norm;
  }
  const double top = terms.maxCoeff();
  return top + std::log((terms.array() - top).exp().sum()) - std::log(static_cast<double>(terms.size()));
}

double density(const PriorModel& p, const Vector& z) { return std::exp(log_density(p, z)); }

Matrix sample_z(const PriorModel& p, int n_rows, std::mt19937_64& rng) {
  const Eigen::Index q = p.kde_centers.cols();
  std::uniform_int_distribution<int> pick(0, p.n_centers() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(n_rows, q);
  for (int r = 0; r < n_rows; ++r) {
    const int c = pick(rng);
    for (Eigen::Index j = 0; j < q; ++j) z(r, j) = p.kde_centers(c, j) + p.bandwidth(j) * normal(rng);
  }
  return z;
}

void save_prior(const PriorModel& p, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir.string(), dir.string());
  write_matrix_csv(dir / "pca_basis.csv", p.pca_basis);
  write_matrix_csv(dir / "kde_centers.csv", p.kde_centers);
  json j;
  j["format"] = "uniconn-prior";
  j["version"] = 1;
  j["prototypes"] = p.prototypes;
  j["seed_rois"] = p.seed_rois;
  j["pca_mean"] = std::vector<double>(p.pca_mean.data(), p.pca_mean.data() + p.pca_mean.size());
  j["bandwidth"] = std::vector<double>(p.bandwidth.data(), p.bandwidth.data() + p.bandwidth.size());
  j["pca_basis_csv"] = "pca_basis.csv";
  j["kde_centers_csv"] = "kde_centers.csv";
  write_text_atomic(dir / "prior.json", j.dump(2) + "\n");
}

PriorModel load_prior(const fs::path& dir) {
  const fs::path index = dir / "prior.json";
  json j;
  try {
    j = json::parse(read_text(index));
  } catch (const json::exception& e) {
    throw FormatError(std::string("prior.json: ") + e.what(), index.string());
  }
  PriorModel p;
  try {
    p.prototypes = j.at("prototypes").get<std::vector<int>>();
    p.seed_rois = j.at("seed_rois").get<std::vector<int>>();
    const auto mean = j.at("pca_mean").get<std::vector<double>>();
    const auto bw = j.at("bandwidth").get<std::vector<double>>();
    p.pca_mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    p.bandwidth = Eigen::Map<const Vector>(bw.data(), static_cast<Eigen::Index>(bw.size()));
    p.pca_basis = read_matrix_csv(dir / j.at("pca_basis_csv").get<std::string>());
    p.kde_centers = read_matrix_csv(dir / j.at("kde_centers_csv").get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("prior.json: ") + e.what(), index.string());
  }
  if (p.kde_centers.cols() != p.bandwidth.size() || p.pca_basis.cols() != p.bandwidth.size() ||
      p.pca_basis.rows() != p.pca_mean.size()) {
    throw ShapeError("prior: inconsistent component shapes in " + dir.string());
  }
  if ((p.bandwidth.array() <= 0.0).any()) throw FormatError("prior: bandwidth must be positive", index.string());
  return p;
}

}  // namespace uniconn
