#include "covsketch/sensing.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>

#include "covsketch/errors.hpp"
#include "covsketch/kernels.hpp"

namespace covsketch {

// ---------------------------------------------------------------- Distribution

Distribution Distribution::parse(std::string_view name) {
  if (name == "gaussian") return gaussian();
  if (name == "rademacher" || name == "bernoulli") return rademacher();
  if (name == "uniform_scaled" || name == "uniform") return uniform_scaled();
  throw ConfigError("unknown distribution '" + std::string(name) + "'");
}

Distribution Distribution::from_code(std::uint32_t code) {
  switch (code) {
    case 0: return gaussian();
    case 1: return rademacher();
    case 2: return uniform_scaled();
    default: throw ConfigError("unknown distribution code " + std::to_string(code));
  }
}

double Distribution::mu4() const {
  switch (kind) {
    case DistributionKind::kGaussian: return 3.0;
    case DistributionKind::kRademacher: return 1.0;
    case DistributionKind::kUniformScaled: return 1.8;
  }
  throw ConfigError("invalid distribution kind");
}

std::string Distribution::name() const {
  switch (kind) {
    case DistributionKind::kGaussian: return "gaussian";
    case DistributionKind::kRademacher: return "rademacher";
    case DistributionKind::kUniformScaled: return "uniform_scaled";
  }
  throw ConfigError("invalid distribution kind");
}

double Distribution::sample(Engine& engine) const {
  switch (kind) {
    case DistributionKind::kGaussian: {
      std::normal_distribution<double> normal(0.0, 1.0);
      return normal(engine);
    }
    case DistributionKind::kRademacher:
      return (engine() >> 63) ? 1.0 : -1.0;
    case DistributionKind::kUniformScaled: {
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      return std::sqrt(3.0) * unif(engine);
    }
  }
  throw ConfigError("invalid distribution kind");
}

// ---------------------------------------------------------------- Ensemble

SensingEnsemble::SensingEnsemble(Distribution dist, Seed seed, RowMatrix vectors)
    : dist_(dist), seed_(seed), vectors_(std::move(vectors)) {
  if (vectors_.rows() < 1 || vectors_.cols() < 1)
    throw ParameterError("sensing ensemble needs n >= 1 and m >= 1");
  (void)dist_.mu4();  // rejects invalid kinds
}

SensingEnsemble SensingEnsemble::draw(int n, int m, Distribution dist, Seed seed) {
  if (n < 1 || m < 1) throw ParameterError("draw_ensemble: need n >= 1 and m >= 1");
  (void)dist.mu4();
  RowMatrix rows(m, n);
#pragma omp parallel for schedule(static) if (std::int64_t(m) * n > 100000)
  for (int i = 0; i < m; ++i) {
    Engine engine = make_engine(derive_seed(seed, Stream::kEnsemble, std::uint64_t(i)));
    for (int j = 0; j < n; ++j) rows(i, j) = dist.sample(engine);
  }
  return SensingEnsemble(dist, seed, std::move(rows));
}

SensingEnsemble SensingEnsemble::head(int count) const {
  if (count < 1 || count > m()) throw ParameterError("head: count out of range");
  return SensingEnsemble(dist_, seed_, vectors_.topRows(count));
}

// ---------------------------------------------------------------- Measurements

std::string noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kL1Bounded: return "l1_bounded";
    case NoiseKind::kL2Bounded: return "l2_bounded";
  }
  return "none";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "none") return NoiseKind::kNone;
  if (name == "l1_bounded" || name == "l1") return NoiseKind::kL1Bounded;
  if (name == "l2_bounded" || name == "l2") return NoiseKind::kL2Bounded;
  throw ConfigError("unknown noise kind '" + std::string(name) + "'");
}

void MeasurementSet::validate() const {
  if (noise_kind == NoiseKind::kNone && noise_level != 0.0)
    throw ParameterError("noise_kind=none requires noise_level=0");
  if (noise_level < 0.0) throw ParameterError("noise_level must be >= 0");
}

namespace {

void check_square(const SensingEnsemble& ens, const Matrix& m) {
  if (m.rows() != ens.n() || m.cols() != ens.n())
    throw ShapeError("matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     ", ensemble dimension is " + std::to_string(ens.n()));
}

std::mutex g_warn_mutex;
WarningHandler g_warn_handler;

}  // namespace

Vector apply(const SensingEnsemble& ens, const Matrix& m) {
  check_square(ens, m);
  return kernels::quad_forms(ens.vectors(), m);
}

Matrix adjoint(const SensingEnsemble& ens, const Vector& v) {
  if (v.size() != ens.m())
    throw ShapeError("adjoint: vector length " + std::to_string(v.size()) + " != m = " +
                     std::to_string(ens.m()));
  return kernels::weighted_outer_sum(ens.vectors(), v);
}

void set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(g_warn_mutex);
  g_warn_handler = std::move(handler);
}

void warn(const std::string& message) {
  std::lock_guard lock(g_warn_mutex);
  if (g_warn_handler)
    g_warn_handler(message);
  else
    std::cerr << "warning: " << message << '\n';
}

Vector debiased_apply(const SensingEnsemble& ens, const Matrix& m) {
  if (ens.m() < 2) throw InsufficientMeasurementsError("debiased_apply needs m >= 2");
  if (ens.m() % 2 != 0) warn("debiased_apply: odd m, dropping the last sensing vector");
  const Vector raw = apply(ens, m);
  const int pairs = ens.m() / 2;
  Vector out(pairs);
  for (int i = 0; i < pairs; ++i) out(i) = raw(2 * i) - raw(2 * i + 1);
  return out;
}

Matrix expected_gram(const Matrix& m, double mu4, int n, GramVariant variant) {
  if (n < 1) throw ParameterError("expected_gram: n must be >= 1");
  if (m.rows() != n || m.cols() != n) throw ShapeError("expected_gram: matrix is not n x n");
  const Matrix eye = Matrix::Identity(n, n);
  const Matrix diag = m.diagonal().asDiagonal();
  switch (variant) {
    case GramVariant::kRaw:
      return 2.0 * m + (1.0 + (mu4 - 3.0) / n) * m.trace() * eye;
    case GramVariant::kRawGeneral:
      return 2.0 * m + m.trace() * eye + (mu4 - 3.0) * diag;
    case GramVariant::kDebiased:
      return 4.0 * m + 2.0 * (mu4 - 3.0) * diag;
  }
  throw ParameterError("expected_gram: unknown variant");
}

// ---------------------------------------------------------------- Isotropy

double default_xi(double mu4) { return 2.0 * std::sqrt(1.5 * (3.0 - mu4)); }

IsotropyCoeffs isotropic_combo_coeffs(double mu4, int n, std::optional<double> xi_opt) {
  if (n < 1) throw ParameterError("isotropic_combo_coeffs: n must be >= 1");
  if (!(mu4 < 3.0))
    throw ParameterError("isotropic_combo_coeffs requires mu4 < 3 (use the pair construction)");
  const double gap = 3.0 - mu4;
  const double xi = xi_opt.value_or(default_xi(mu4));
  if (!(xi > 0.0) || !(xi * xi > 1.5 * gap))
    throw ParameterError("xi out of range: need xi^2 > 1.5 (3 - mu4)");
  // With a = 1 and a + b + c = xi/sqrt(n), b and c are the roots of
  // b^2 + (1-s) b + (1-s)^2/2 + 1/2 - xi^2 / (2 (3-mu4)) = 0, s = xi/sqrt(n).
  const double one_minus_s = 1.0 - xi / std::sqrt(double(n));
  const double disc = -one_minus_s * one_minus_s - 2.0 + 2.0 * xi * xi / gap;
  if (!(disc > 0.0)) throw ParameterError("xi out of range: discriminant is not positive");
  const double b = (-one_minus_s + std::sqrt(disc)) / 2.0;
  const double c = (-one_minus_s - std::sqrt(disc)) / 2.0;
  const double alpha = std::sqrt(gap / (2.0 * xi * xi));
  return {alpha, b * alpha, c * alpha, xi};
}

IsotropicCombination IsotropicCombination::for_distribution(const Distribution& dist, int n,
                                                            std::optional<double> xi) {
  const double mu4 = dist.mu4();
  if (mu4 > 3.0) throw UnsupportedRegimeError("isotropic combination requires mu4 <= 3");
  if (mu4 == 3.0) return {Kind::kPair, {}};
  return {Kind::kTriple, isotropic_combo_coeffs(mu4, n, xi)};
}

std::vector<double> IsotropicCombination::weights() const {
  if (kind == Kind::kPair) return {0.5, -0.5};
  // B_i = alpha A_{3i} + beta A_{3i-1} + gamma A_{3i-2}, listed in row order.
  return {coeffs.gamma, coeffs.beta, coeffs.alpha};
}

Vector isotropic_apply(const SensingEnsemble& ens, const Matrix& m, const IsotropicCombination& comb) {
  const int g = comb.group_size();
  if (ens.m() < g) throw InsufficientMeasurementsError("isotropic_apply: m smaller than group size");
  if (ens.m() % g != 0) warn("isotropic_apply: m not divisible by group size, dropping the tail");
  const Vector raw = apply(ens, m);
  const auto w = comb.weights();
  const int groups = ens.m() / g;
  Vector out = Vector::Zero(groups);
  for (int i = 0; i < groups; ++i)
    for (int j = 0; j < g; ++j) out(i) += w[j] * raw(g * i + j);
  return out;
}

Matrix isotropic_matrix(const SensingEnsemble& ens, int group, const IsotropicCombination& comb) {
  const int g = comb.group_size();
  if (group < 0 || g * (group + 1) > ens.m()) throw ParameterError("isotropic_matrix: group out of range");
  const auto w = comb.weights();
  Matrix out = Matrix::Zero(ens.n(), ens.n());
  for (int j = 0; j < g; ++j) {
    const Vector a = ens.row(g * group + j).transpose();
    out.noalias() += w[j] * a * a.transpose();
  }
  return out;
}

Matrix gram_matrix(const SensingEnsemble& ens) { return kernels::squared_gram(ens.vectors()); }

MeasurementSet add_uniform_noise(const Vector& clean, double sigma, Seed seed) {
  if (sigma < 0.0) throw ParameterError("noise level must be >= 0");
  if (sigma == 0.0) return {clean, NoiseKind::kNone, 0.0};
  Engine engine = make_engine(derive_seed(seed, Stream::kNoise));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vector y = clean;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += sigma * unif(engine);
  return {y, NoiseKind::kL1Bounded, sigma * double(y.size())};
}

// ---------------------------------------------------------------- Streaming

int SketchSchedule::index_for(std::uint64_t t) const {
  return static_cast<int>(derive_seed(seed, Stream::kSchedule, t) % counts.size());
}

std::vector<int> SketchSchedule::unassigned() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i] == 0) out.push_back(int(i));
  return out;
}

StreamSketcher::StreamSketcher(const SensingEnsemble& ens, Seed schedule_seed)
    : ens_(ens), mean_(Vector::Zero(ens.m())) {
  schedule_.seed = schedule_seed;
  schedule_.counts.assign(std::size_t(ens.m()), 0);
}

void StreamSketcher::push(const Eigen::Ref<const Vector>& x) {
  if (x.size() != ens_.n()) throw ShapeError("stream sample has wrong dimension");
  const int i = schedule_.index_for(t_);
  const double q = ens_.row(i).dot(x);
  const auto count = ++schedule_.counts[std::size_t(i)];
  mean_(i) += (q * q - mean_(i)) / double(count);
  ++t_;
}

MeasurementSet StreamSketcher::measurements() const {
  if (t_ == 0) throw EmptyInputError("sketch_stream: empty stream");
  Vector y = mean_;
  for (int i = 0; i < ens_.m(); ++i)
    if (schedule_.counts[std::size_t(i)] == 0) y(i) = std::numeric_limits<double>::quiet_NaN();
  return {y, NoiseKind::kNone, 0.0};
}

SketchResult sketch_stream(const RowMatrix& stream, const SensingEnsemble& ens, Seed schedule_seed) {
  if (stream.rows() == 0) throw EmptyInputError("sketch_stream: empty stream");
  StreamSketcher sketcher(ens, schedule_seed);
  for (Eigen::Index t = 0; t < stream.rows(); ++t) sketcher.push(stream.row(t).transpose());
  auto result = SketchResult{sketcher.measurements(), sketcher.schedule()};
  const auto missing = result.schedule.unassigned();
  if (!missing.empty())
    warn("sketch_stream: " + std::to_string(missing.size()) + " sketch indices received no samples");
  return result;
}

// ---------------------------------------------------------------- Serialization

namespace {

constexpr char kMagic[5] = {'C', 'V', 'S', 'K', '1'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("ensemble container truncated");
  return value;
}

}  // namespace

void write_ensemble(std::ostream& out, const SensingEnsemble& ens) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, std::uint64_t(ens.n()));
  put<std::uint64_t>(out, std::uint64_t(ens.m()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ens.dist().kind));
  put<double>(out, ens.dist().mu4());
  put<std::uint64_t>(out, ens.seed());
  out.write(reinterpret_cast<const char*>(ens.vectors().data()),
            std::streamsize(sizeof(double) * ens.vectors().size()));
  if (!out) throw IoError("failed writing ensemble container");
}

SensingEnsemble read_ensemble(std::istream& in) {
  char magic[5];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError("not a CVSK1 container");
  const auto n = get<std::uint64_t>(in);
  const auto m = get<std::uint64_t>(in);
  const auto dist = Distribution::from_code(get<std::uint32_t>(in));
  const auto mu4 = get<double>(in);
  const auto seed = get<std::uint64_t>(in);
  if (mu4 != dist.mu4()) throw IoError("CVSK1 header: mu4 does not match distribution");
  if (n == 0 || m == 0 || n > (1u << 24) || m > (1u << 28)) throw IoError("CVSK1 header: bad dimensions");
  RowMatrix rows(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(rows.data()), std::streamsize(sizeof(double) * rows.size()));
  if (!in) throw IoError("ensemble container truncated");
  return SensingEnsemble(dist, seed, std::move(rows));
}

void save_ensemble(const std::string& path, const SensingEnsemble& ens) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_ensemble(out, ens);
}

SensingEnsemble load_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_ensemble(in);
}

}  // namespace covsketch
