#include "covsketch/structures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "covsketch/errors.hpp"
#include "covsketch/matrix_io.hpp"

namespace covsketch {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kMaxRetries = 100;
constexpr double kPsdTol = 1e-9;

Matrix gaussian_matrix(int rows, int cols, Engine& engine) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  // Column-major fill order is part of the reproducibility contract.
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) out(i, j) = normal(engine);
  return out;
}

// First `count` entries of a uniformly random permutation of 0..n-1.
std::vector<int> random_subset(int n, int count, Engine& engine) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[std::size_t(i)], idx[std::size_t(pick(engine))]);
  }
  idx.resize(std::size_t(count));
  return idx;
}

bool is_psd(const Matrix& m, double rel_tol) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double scale = std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
  return ev.minCoeff() >= -rel_tol * scale;
}

}  // namespace

std::string structure_name(StructureClass c) {
  switch (c) {
    case StructureClass::kLowrankPsd: return "lowrank_psd";
    case StructureClass::kToeplitzLowrank: return "toeplitz_lowrank";
    case StructureClass::kSparsePsd: return "sparse_psd";
    case StructureClass::kSparseSymmetric: return "sparse_symmetric";
    case StructureClass::kSparseRankone: return "sparse_rankone";
  }
  return "unknown";
}

StructureClass parse_structure(std::string_view name) {
  if (name == "lowrank_psd" || name == "lowrank") return StructureClass::kLowrankPsd;
  if (name == "toeplitz_lowrank" || name == "toeplitz") return StructureClass::kToeplitzLowrank;
  if (name == "sparse_psd" || name == "sparse") return StructureClass::kSparsePsd;
  if (name == "sparse_symmetric") return StructureClass::kSparseSymmetric;
  if (name == "sparse_rankone" || name == "sparse-rank1") return StructureClass::kSparseRankone;
  throw ConfigError("unknown structure class '" + std::string(name) + "'");
}

Matrix ToeplitzSpec::build(int n) const {
  Vector c = Vector::Zero(n);
  for (std::size_t j = 0; j < frequencies.size(); ++j)
    for (int k = 0; k < n; ++k) c(k) += amplitudes[j] * std::cos(2.0 * kPi * frequencies[j] * k);
  return toeplitz_from_coefficients(c);
}

std::map<std::string, std::string> StructuredTruth::metadata() const {
  std::map<std::string, std::string> meta;
  meta["class"] = structure_name(cls);
  meta["n"] = std::to_string(matrix.rows());
  meta["seed"] = std::to_string(seed);
  if (rank > 0) meta["r"] = std::to_string(rank);
  if (sparsity > 0) meta["k"] = std::to_string(sparsity);
  if (power_law) {
    std::ostringstream os;
    os.precision(17);
    os << *power_law;
    meta["power_law"] = os.str();
  }
  if (!spectrum.frequencies.empty()) {
    std::ostringstream f, a;
    f.precision(17);
    a.precision(17);
    for (std::size_t j = 0; j < spectrum.frequencies.size(); ++j) {
      f << (j ? " " : "") << spectrum.frequencies[j];
      a << (j ? " " : "") << spectrum.amplitudes[j];
    }
    meta["frequencies"] = f.str();
    meta["amplitudes"] = a.str();
  }
  return meta;
}

StructuredTruth gen_lowrank_psd(int n, int r, Seed seed) {
  if (n < 1 || r < 1 || r > n) throw ParameterError("gen_lowrank_psd: need 1 <= r <= n");
  Engine engine = make_engine(derive_seed(seed, Stream::kTruth));
  const Matrix l = gaussian_matrix(n, r, engine);
  StructuredTruth t;
  t.matrix = symmetrize(l * l.transpose());
  t.cls = StructureClass::kLowrankPsd;
  t.rank = r;
  t.seed = seed;
  return t;
}

StructuredTruth gen_toeplitz_lowrank(int n, int r, Seed seed) {
  if (r < 2 || r % 2 != 0) throw ParameterError("gen_toeplitz_lowrank: r must be even and >= 2");
  if (r > n) throw ParameterError("gen_toeplitz_lowrank: r must not exceed n");
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    std::uniform_real_distribution<double> freq(0.001, 0.499);
    std::normal_distribution<double> normal(0.0, 1.0);
    Engine engine = make_engine(derive_seed(seed, {std::uint64_t(Stream::kTruth), std::uint64_t(attempt)}));
    ToeplitzSpec spec;
    for (int j = 0; j < r / 2; ++j) {
      spec.frequencies.push_back(freq(engine));
      spec.amplitudes.push_back(std::abs(normal(engine)));
    }
    Matrix m = spec.build(n);
    if (!is_psd(m, kPsdTol) || numerical_rank(m) != r) continue;
    StructuredTruth t;
    t.matrix = std::move(m);
    t.cls = StructureClass::kToeplitzLowrank;
    t.rank = r;
    t.spectrum = std::move(spec);
    t.seed = seed;
    return t;
  }
  throw NumericError("gen_toeplitz_lowrank: no valid draw after retries");
}

StructuredTruth gen_sparse_psd(int n, int k, Seed seed) {
  const int side = static_cast<int>(std::lround(std::sqrt(double(std::max(k, 0)))));
  if (k < 1 || side * side != k) throw ParameterError("gen_sparse_psd: k must be a perfect square");
  if (side > n) throw ParameterError("gen_sparse_psd: sqrt(k) must not exceed n");
  Engine engine = make_engine(derive_seed(seed, Stream::kTruth));
  const Matrix l = gaussian_matrix(side, side, engine);
  const Matrix block = symmetrize(l * l.transpose());
  const auto idx = random_subset(n, side, engine);
  StructuredTruth t;
  t.matrix = Matrix::Zero(n, n);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) t.matrix(idx[std::size_t(i)], idx[std::size_t(j)]) = block(i, j);
  t.cls = StructureClass::kSparsePsd;
  t.sparsity = k;
  t.seed = seed;
  return t;
}

StructuredTruth gen_sparse_symmetric(int n, int k, Seed seed) {
  if (n < 1 || k < 1 || std::int64_t(k) > std::int64_t(n) * n)
    throw ParameterError("gen_sparse_symmetric: need 1 <= k <= n^2");
  Engine engine = make_engine(derive_seed(seed, Stream::kTruth));
  std::normal_distribution<double> normal(0.0, 1.0);
  // Upper-triangle positions in random order; off-diagonal ones cost two nonzeros.
  const int upper = n * (n + 1) / 2;
  const auto order = random_subset(upper, upper, engine);
  StructuredTruth t;
  t.matrix = Matrix::Zero(n, n);
  int budget = k;
  for (int pos : order) {
    if (budget == 0) break;
    // Decode pos into (i, j), i <= j, row-major over the upper triangle.
    int i = 0, rem = pos;
    while (rem >= n - i) rem -= n - i++;
    const int j = i + rem;
    const int cost = i == j ? 1 : 2;
    if (cost > budget) continue;
    const double v = normal(engine);
    t.matrix(i, j) = v;
    t.matrix(j, i) = v;
    budget -= cost;
  }
  t.cls = StructureClass::kSparseSymmetric;
  t.sparsity = k;
  t.seed = seed;
  return t;
}

StructuredTruth gen_sparse_rankone(int n, int k, std::optional<double> power_law, Seed seed) {
  if (k < 1 || k > n) throw ParameterError("gen_sparse_rankone: need 1 <= k <= n");
  if (power_law && !(*power_law > 1.0)) throw ParameterError("gen_sparse_rankone: power-law exponent must exceed 1");
  Engine engine = make_engine(derive_seed(seed, Stream::kTruth));
  const auto support = random_subset(n, k, engine);
  Vector x = Vector::Zero(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 0; l < k; ++l) {
    double v;
    if (power_law) {
      const double sign = (engine() >> 63) ? 1.0 : -1.0;
      v = sign / std::pow(double(l + 1), *power_law);
    } else {
      do v = normal(engine);
      while (v == 0.0);
    }
    x(support[std::size_t(l)]) = v;
  }
  StructuredTruth t;
  t.matrix = x * x.transpose();
  t.cls = StructureClass::kSparseRankone;
  t.rank = 1;
  t.sparsity = k;
  t.power_law = power_law;
  t.signal = std::move(x);
  t.seed = seed;
  return t;
}

StructuredTruth generate(StructureClass cls, int n, int param, Seed seed, std::optional<double> power_law) {
  switch (cls) {
    case StructureClass::kLowrankPsd: return gen_lowrank_psd(n, param, seed);
    case StructureClass::kToeplitzLowrank: return gen_toeplitz_lowrank(n, param, seed);
    case StructureClass::kSparsePsd: return gen_sparse_psd(n, param, seed);
    case StructureClass::kSparseSymmetric: return gen_sparse_symmetric(n, param, seed);
    case StructureClass::kSparseRankone: return gen_sparse_rankone(n, param, power_law, seed);
  }
  throw ConfigError("generate: unknown class");
}

int numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  const Eigen::BDCSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0;
  return static_cast<int>((s.array() > rel_tol * s(0)).count());
}

Eigen::Index count_nonzeros(const Matrix& m) { return (m.array() != 0.0).count(); }

Matrix toeplitz_project(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("toeplitz_project: matrix must be square");
  const Eigen::Index n = m.rows();
  Matrix out(n, n);
  for (Eigen::Index d = -(n - 1); d <= n - 1; ++d) {
    const Eigen::Index len = n - std::abs(d);
    const Eigen::Index r0 = d < 0 ? -d : 0, c0 = d > 0 ? d : 0;
    double sum = 0.0;
    for (Eigen::Index t = 0; t < len; ++t) sum += m(r0 + t, c0 + t);
    const double mean = sum / double(len);
    for (Eigen::Index t = 0; t < len; ++t) out(r0 + t, c0 + t) = mean;
  }
  return out;
}

bool is_toeplitz(const Matrix& m, double abs_tol) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index i = 1; i < m.rows(); ++i)
    for (Eigen::Index j = 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(i - 1, j - 1)) > abs_tol) return false;
  return true;
}

Vector toeplitz_coefficients(const Matrix& t) { return t.col(0); }

Matrix toeplitz_from_coefficients(const Vector& c) {
  const Eigen::Index n = c.size();
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = c(std::abs(i - j));
  return out;
}

Matrix best_rank_r(const Matrix& m, int r) {
  if (r < 1 || r > std::min(m.rows(), m.cols())) throw ParameterError("best_rank_r: need 1 <= r <= n");
  const Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
         svd.matrixV().leftCols(r).transpose();
}

Matrix best_k_term(const Matrix& m, int k) {
  if (k < 1 || k > m.size()) throw ParameterError("best_k_term: need 1 <= k <= n^2");
  const Eigen::Index rows = m.rows(), cols = m.cols();
  std::vector<Eigen::Index> order(std::size_t(m.size()));
  std::iota(order.begin(), order.end(), 0);
  auto value = [&](Eigen::Index rm) { return std::abs(m(rm / cols, rm % cols)); };
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return value(a) > value(b); });
  Matrix out = Matrix::Zero(rows, cols);
  for (int t = 0; t < k; ++t) {
    const Eigen::Index rm = order[std::size_t(t)];
    out(rm / cols, rm % cols) = m(rm / cols, rm % cols);
  }
  return out;
}

CirculantBound circulant_norm_bound(const Matrix& t) {
  if (t.rows() != t.cols() || t.rows() < 1) throw StructureError("circulant_norm_bound: matrix must be square");
  const double scale = std::max(1.0, t.cwiseAbs().maxCoeff());
  if (!is_toeplitz(t, 1e-10 * scale) || !is_symmetric(t, 1e-10))
    throw StructureError("circulant_norm_bound: input is not symmetric Toeplitz");
  const Eigen::Index n = t.rows();
  const Eigen::Index size = 2 * n - 1;
  CirculantBound out;
  out.eigenvalues.resize(std::size_t(size));
  for (Eigen::Index i = 0; i < size; ++i) {
    double lambda = t(0, 0);
    for (Eigen::Index l = 1; l < n; ++l)
      lambda += 2.0 * t(l, 0) * std::cos(2.0 * kPi * double(i * l % size) / double(size));
    out.eigenvalues[std::size_t(i)] = lambda;
    out.bound = std::max(out.bound, std::abs(lambda));
  }
  return out;
}

double nmse(const Matrix& est, const Matrix& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols()) throw ShapeError("nmse: shape mismatch");
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw UndefinedMetricError("nmse: truth is zero");
  return (est - truth).squaredNorm() / denom;
}

void write_truth(const std::string& matrix_path, const std::string& meta_path, const StructuredTruth& t) {
  save_matrix_csv(matrix_path, t.matrix);
  std::ofstream meta(meta_path);
  if (!meta) throw IoError("cannot open '" + meta_path + "' for writing");
  for (const auto& [key, value] : t.metadata()) meta << key << '=' << value << '\n';
}

}  // namespace covsketch
