#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covsketch/linalg.hpp"
#include "covsketch/rng.hpp"

namespace covsketch {

enum class DistributionKind : std::uint32_t {
  kGaussian = 0,
  kRademacher = 1,
  kUniformScaled = 2,  // sqrt(3) * U[-1, 1]
};

// Zero-mean, unit-variance entry distribution for the sensing vectors.
struct Distribution {
  DistributionKind kind = DistributionKind::kGaussian;

  static Distribution gaussian() { return {DistributionKind::kGaussian}; }
  static Distribution rademacher() { return {DistributionKind::kRademacher}; }
  static Distribution uniform_scaled() { return {DistributionKind::kUniformScaled}; }

  // Throws ConfigError for unknown names.
  static Distribution parse(std::string_view name);
  static Distribution from_code(std::uint32_t code);

  // E[z^4]: 3, 1 and 1.8 respectively.
  double mu4() const;
  std::string name() const;
  double sample(Engine& engine) const;

  friend bool operator==(const Distribution&, const Distribution&) = default;
};

// The m sensing vectors a_i (rows of `vectors()`). Immutable once built and
// safe to share across threads. Row i is drawn from its own derived stream,
// so ensembles that share (n, dist, seed) agree on their common prefix.
class SensingEnsemble {
 public:
  SensingEnsemble(Distribution dist, Seed seed, RowMatrix vectors);

  static SensingEnsemble draw(int n, int m, Distribution dist, Seed seed);

  int n() const { return static_cast<int>(vectors_.cols()); }
  int m() const { return static_cast<int>(vectors_.rows()); }
  const Distribution& dist() const { return dist_; }
  Seed seed() const { return seed_; }
  const RowMatrix& vectors() const { return vectors_; }
  auto row(int i) const { return vectors_.row(i); }

  // The first `count` vectors as a new ensemble.
  SensingEnsemble head(int count) const;

 private:
  Distribution dist_;
  Seed seed_;
  RowMatrix vectors_;
};

inline SensingEnsemble draw_ensemble(int n, int m, Distribution dist, Seed seed) {
  return SensingEnsemble::draw(n, m, dist, seed);
}

enum class NoiseKind { kNone, kL1Bounded, kL2Bounded };

std::string noise_kind_name(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);

struct MeasurementSet {
  Vector y;
  NoiseKind noise_kind = NoiseKind::kNone;
  double noise_level = 0.0;

  // Throws ParameterError when noise_kind is none but noise_level != 0.
  void validate() const;
};

// y_i = a_i^T M a_i.
Vector apply(const SensingEnsemble& ens, const Matrix& m);

// sum_i v_i a_i a_i^T.
Matrix adjoint(const SensingEnsemble& ens, const Vector& v);

// Pairwise differences <A_{2i-1} - A_{2i}, M>. Odd m drops the last vector
// and reports through the warning handler.
Vector debiased_apply(const SensingEnsemble& ens, const Matrix& m);

// Receives non-fatal diagnostics such as the odd-m truncation above.
using WarningHandler = std::function<void(const std::string&)>;
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

enum class GramVariant {
  // 2M + (1 + (mu4 - 3)/n) tr(M) I. Exact when mu4 = 3 or diag(M) is constant.
  kRaw,
  // 2M + tr(M) I + (mu4 - 3) diag(M). Exact for every symmetric M.
  kRawGeneral,
  // E[B* B(M)] for B_i = A_{2i-1} - A_{2i}: 4M + 2(mu4 - 3) diag(M).
  kDebiased,
};

Matrix expected_gram(const Matrix& m, double mu4, int n, GramVariant variant = GramVariant::kRaw);

struct IsotropyCoeffs {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double xi = 0.0;
};

// Twice the smallest admissible xi: 2 * sqrt(1.5 * (3 - mu4)).
double default_xi(double mu4);

// Weights making alpha A_1 + beta A_2 + gamma A_3 isotropic on matrices with
// constant diagonal. Requires mu4 < 3 and xi^2 > 1.5 (3 - mu4).
IsotropyCoeffs isotropic_combo_coeffs(double mu4, int n, std::optional<double> xi = std::nullopt);

// Which isotropic construction applies to a given distribution: the pair
// difference B_i = (A_{2i-1} - A_{2i}) / 2 when mu4 = 3, the three-term
// combination when mu4 < 3. mu4 > 3 is not supported.
struct IsotropicCombination {
  enum class Kind { kPair, kTriple };
  Kind kind = Kind::kPair;
  IsotropyCoeffs coeffs{};

  static IsotropicCombination for_distribution(const Distribution& dist, int n,
                                               std::optional<double> xi = std::nullopt);
  int group_size() const { return kind == Kind::kPair ? 2 : 3; }
  // Weights applied to the raw measurements of one group, in row order.
  std::vector<double> weights() const;
};

// <B_i, M> for each complete group. Requires m >= group size.
Vector isotropic_apply(const SensingEnsemble& ens, const Matrix& m, const IsotropicCombination& comb);

// The matrix B_g for group g (dense, for Monte Carlo checks).
Matrix isotropic_matrix(const SensingEnsemble& ens, int group, const IsotropicCombination& comb);

// (A A*)_{ij} = (a_i^T a_j)^2.
Matrix gram_matrix(const SensingEnsemble& ens);

// Additive noise sigma * U[-1, 1] per measurement, with the l1 bound
// epsilon = sigma * m recorded in the result.
MeasurementSet add_uniform_noise(const Vector& clean, double sigma, Seed seed);

struct SketchSchedule {
  Seed seed = 0;
  std::vector<std::int64_t> counts;  // assignments per sketch index

  // Index assigned to stream time t; depends only on (seed, t).
  int index_for(std::uint64_t t) const;
  // Indices that received no samples (their aggregate is NaN).
  std::vector<int> unassigned() const;
};

// Single-pass quadratic sketching of a data stream: each x_t updates only
// the running mean of its randomly assigned index. Memory is O(m n).
class StreamSketcher {
 public:
  StreamSketcher(const SensingEnsemble& ens, Seed schedule_seed);

  void push(const Eigen::Ref<const Vector>& x);
  std::uint64_t processed() const { return t_; }

  // Throws EmptyInputError if nothing was pushed.
  MeasurementSet measurements() const;
  const SketchSchedule& schedule() const { return schedule_; }

 private:
  const SensingEnsemble& ens_;
  SketchSchedule schedule_;
  Vector mean_;
  std::uint64_t t_ = 0;
};

struct SketchResult {
  MeasurementSet measurements;
  SketchSchedule schedule;
};

// Stream rows are the samples x_t.
SketchResult sketch_stream(const RowMatrix& stream, const SensingEnsemble& ens, Seed schedule_seed);

// Binary container: "CVSK1", u64 n, u64 m, u32 dist code, f64 mu4, u64 seed,
// then m*n row-major f64. Host byte order (little-endian on supported targets).
void write_ensemble(std::ostream& out, const SensingEnsemble& ens);
SensingEnsemble read_ensemble(std::istream& in);
void save_ensemble(const std::string& path, const SensingEnsemble& ens);
SensingEnsemble load_ensemble(const std::string& path);

}  // namespace covsketch
