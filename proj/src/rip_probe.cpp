#include "covsketch/rip_probe.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <optional>
#include <ostream>
#include <random>

#include <Eigen/Eigenvalues>

#include "covsketch/errors.hpp"
#include "covsketch/matrix_io.hpp"
#include "covsketch/structures.hpp"

namespace covsketch {
namespace {

// Monte Carlo sums are split into a fixed number of chunks, each with its own
// stream, and reduced in chunk order. The result is independent of threads.
constexpr int kChunks = 64;

double quantile_sorted(const std::vector<double>& s, double p) {
  if (s.size() == 1) return s.front();
  const double pos = p * double(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - double(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

void fill_quantiles(RipEstimate& est) {
  std::vector<double> s = est.ratios;
  std::sort(s.begin(), s.end());
  const double ps[5] = {0.0, 0.05, 0.5, 0.95, 1.0};
  for (int i = 0; i < 5; ++i) est.quantiles[i] = quantile_sorted(s, ps[i]);
}

Matrix unit_frobenius(Matrix x) {
  const double f = x.norm();
  if (f == 0.0) return x;
  return x / f;
}

Matrix draw_nonzero(const ClassSampler& sampler, Seed seed) {
  for (std::uint64_t attempt = 0; attempt < 16; ++attempt) {
    Matrix x = sampler(attempt == 0 ? seed : derive_seed(seed, {attempt}));
    if (x.norm() > 0.0) return x;
  }
  throw DegenerateInputError("class sampler keeps returning the zero matrix");
}

Vector sample_vector(const Distribution& dist, int n, Engine& engine) {
  Vector a(n);
  for (int j = 0; j < n; ++j) a(j) = dist.sample(engine);
  return a;
}

// Symmetric rank-r matrix with random eigenvalue signs.
Matrix signed_lowrank(int n, int r, Seed seed) {
  const Matrix psd = gen_lowrank_psd(n, r, derive_seed(seed, Stream::kTruth)).matrix;
  Eigen::SelfAdjointEigenSolver<Matrix> es(psd);
  Engine engine = make_engine(derive_seed(seed, Stream::kProbe));
  std::bernoulli_distribution coin(0.5);
  Vector ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (coin(engine)) ev(i) = -ev(i);
  return symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

template <class RatioFn>
RipEstimate run_probe(const EnsembleFactory& ens_factory, const ClassSampler& sampler, int trials,
                      bool fresh, Seed base, const std::string& cls, RatioFn ratio) {
  if (trials < 10) throw ParameterError("RIP probes need at least 10 trials");
  RipEstimate est;
  est.cls = cls;
  est.trials = trials;
  est.ratios.assign(std::size_t(trials), 0.0);
  est.seeds.assign(std::size_t(trials), 0);
  std::optional<SensingEnsemble> shared;
  if (!fresh) shared.emplace(ens_factory(derive_seed(base, Stream::kEnsemble)));
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < trials; ++t) {
    const Seed trial_seed = derive_seed(base, Stream::kProbe, std::uint64_t(t));
    est.seeds[std::size_t(t)] = trial_seed;
    try {
      const Matrix x = draw_nonzero(sampler, trial_seed);
      if (fresh) {
        const SensingEnsemble ens = ens_factory(derive_seed(base, Stream::kEnsemble, std::uint64_t(t)));
        est.ratios[std::size_t(t)] = ratio(ens, x);
      } else {
        est.ratios[std::size_t(t)] = ratio(*shared, x);
      }
    } catch (...) {
#pragma omp critical(rip_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  const SensingEnsemble probe_ens = fresh ? ens_factory(derive_seed(base, Stream::kEnsemble, 0)) : *shared;
  est.n = probe_ens.n();
  est.m = probe_ens.m();
  fill_quantiles(est);
  return est;
}

void accumulate_chunks(long long count, Seed seed, int n,
                       const std::function<void(Engine&, Matrix&, Matrix*)>& one_draw, Matrix& sum,
                       Matrix* sumsq) {
  std::vector<Matrix> part(kChunks, Matrix::Zero(n, n));
  std::vector<Matrix> part_sq(sumsq ? kChunks : 0, Matrix::Zero(n, n));
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < kChunks; ++c) {
    const long long lo = count * c / kChunks;
    const long long hi = count * (c + 1) / kChunks;
    Engine engine = make_engine(derive_seed(seed, Stream::kProbe, std::uint64_t(c)));
    Matrix tmp(n, n);
    for (long long k = lo; k < hi; ++k) {
      one_draw(engine, tmp, nullptr);
      part[std::size_t(c)] += tmp;
      if (sumsq) part_sq[std::size_t(c)] += tmp.cwiseAbs2();
    }
  }
  sum = Matrix::Zero(n, n);
  for (const auto& p : part) sum += p;
  if (sumsq) {
    *sumsq = Matrix::Zero(n, n);
    for (const auto& p : part_sq) *sumsq += p;
  }
}

}  // namespace

ClassSampler rank_sampler(int n, int r) {
  if (r < 1 || r > n) throw ParameterError("rank sampler: need 1 <= r <= n");
  return [n, r](Seed s) { return unit_frobenius(signed_lowrank(n, r, s)); };
}

ClassSampler sparse_sampler(int n, int k) {
  if (k < 1 || k > n * n) throw ParameterError("sparse sampler: need 1 <= k <= n^2");
  return [n, k](Seed s) { return unit_frobenius(gen_sparse_symmetric(n, k, s).matrix); };
}

ClassSampler lowrank_plus_sparse_sampler(int n, int k, int r, int l) {
  if (k < 1 || k > n || r < 1 || r > k) throw ParameterError("lowrank+sparse sampler: need 1 <= r <= k <= n");
  if (l < 0 || l > n * n) throw ParameterError("lowrank+sparse sampler: need 0 <= l <= n^2");
  return [n, k, r, l](Seed s) {
    Matrix x = Matrix::Zero(n, n);
    x.topLeftCorner(k, k) = signed_lowrank(k, r, derive_seed(s, {1}));
    if (l > 0) x += gen_sparse_symmetric(n, l, derive_seed(s, {2})).matrix;
    return unit_frobenius(x);
  };
}

ClassSampler toeplitz_sampler(int n, int r) {
  return [n, r](Seed s) { return unit_frobenius(gen_toeplitz_lowrank(n, r, s).matrix); };
}

RipEstimate estimate_rip(const EnsembleFactory& ens_factory, const ClassSampler& sampler, int trials,
                         bool fresh_ensemble_per_trial, Seed base_seed, const std::string& cls) {
  return run_probe(ens_factory, sampler, trials, fresh_ensemble_per_trial, base_seed, cls,
                   [](const SensingEnsemble& ens, const Matrix& x) { return debiased_l1_ratio(ens, x); });
}

RipEstimate rip_l2l2_toeplitz(const EnsembleFactory& ens_factory, const ClassSampler& sampler, int trials,
                              bool fresh_ensemble_per_trial, Seed base_seed) {
  return run_probe(ens_factory, sampler, trials, fresh_ensemble_per_trial, base_seed, "toeplitz_l2",
                   [](const SensingEnsemble& ens, const Matrix& x) {
                     const auto comb = IsotropicCombination::for_distribution(ens.dist(), ens.n());
                     const Vector b = isotropic_apply(ens, x, comb);
                     return b.norm() / std::sqrt(double(b.size())) / x.norm();
                   });
}

Matrix isotropic_second_moment(const Distribution& dist, int n, long long sample_count, const Matrix& x,
                               Seed seed) {
  if (sample_count < 1) throw ParameterError("isotropy: need at least one sample");
  if (x.rows() != n || x.cols() != n) throw ShapeError("isotropy: test matrix must be n x n");
  const auto comb = IsotropicCombination::for_distribution(dist, n);
  const auto w = comb.weights();
  const int g = comb.group_size();
  Matrix sum;
  accumulate_chunks(
      sample_count, seed, n,
      [&](Engine& engine, Matrix& out, Matrix*) {
        out.setZero();
        double inner = 0.0;
        std::vector<Vector> a;
        a.reserve(std::size_t(g));
        for (int j = 0; j < g; ++j) {
          a.push_back(sample_vector(dist, n, engine));
          inner += w[std::size_t(j)] * a.back().dot(x * a.back());
        }
        for (int j = 0; j < g; ++j) out.noalias() += (inner * w[std::size_t(j)]) * a[std::size_t(j)] * a[std::size_t(j)].transpose();
      },
      sum, nullptr);
  return sum / double(sample_count);
}

double isotropy_deviation(const Distribution& dist, int n, long long sample_count, const Matrix& test_matrix,
                          Seed seed) {
  if (dist.mu4() > 3.0) throw UnsupportedRegimeError("isotropy: mu4 > 3 is not supported");
  const double fx = test_matrix.norm();
  if (fx == 0.0) throw UndefinedMetricError("isotropy: deviation undefined for X = 0");
  const Matrix mean = isotropic_second_moment(dist, n, sample_count, test_matrix, seed);
  return (mean - test_matrix).norm() / fx;
}

MomentEstimate monte_carlo_gram(const Distribution& dist, const Matrix& x, long long draws, bool debiased,
                                Seed seed) {
  if (draws < 2) throw ParameterError("monte_carlo_gram: need at least two draws");
  if (x.rows() != x.cols()) throw ShapeError("monte_carlo_gram: X must be square");
  const int n = static_cast<int>(x.rows());
  Matrix sum, sumsq;
  accumulate_chunks(
      draws, seed, n,
      [&](Engine& engine, Matrix& out, Matrix*) {
        const Vector a = sample_vector(dist, n, engine);
        if (!debiased) {
          out.noalias() = a.dot(x * a) * (a * a.transpose());
        } else {
          const Vector b = sample_vector(dist, n, engine);
          const Matrix bm = a * a.transpose() - b * b.transpose();
          out.noalias() = frob_inner(bm, x) * bm;
        }
      },
      sum, &sumsq);
  const double nd = double(draws);
  MomentEstimate est;
  est.mean = sum / nd;
  const Matrix var = ((sumsq / nd) - est.mean.cwiseAbs2()).cwiseMax(0.0) * (nd / (nd - 1.0));
  est.std_error = (var / nd).cwiseSqrt();
  return est;
}

ToeplitzNormStats toeplitz_norm_stats(const Distribution& dist, int n, int trials, Seed seed, int dense_limit) {
  if (n < 2) throw ParameterError("toeplitz_norm_stats: need n >= 2");
  if (trials < 50) throw ParameterError("toeplitz_norm_stats: need at least 50 trials");
  ToeplitzNormStats st;
  st.n = n;
  st.dense_checked = n <= dense_limit;
  st.samples.assign(std::size_t(trials), 0.0);
  if (st.dense_checked) st.dense_samples.assign(std::size_t(trials), 0.0);
  std::vector<char> dominated(std::size_t(trials), 1);
  const double scale = std::pow(std::log(double(n)), 1.5);

#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < trials; ++t) {
    Engine engine = make_engine(derive_seed(seed, Stream::kProbe, std::uint64_t(t)));
    const Vector z = sample_vector(dist, n, engine);
    // T(z z^T): lag-l coefficient is the mean of z_i z_{i+l}.
    Vector c(n);
    for (int l = 0; l < n; ++l) c(l) = z.head(n - l).dot(z.tail(n - l)) / double(n - l);
    const Matrix tm = toeplitz_from_coefficients(c);
    const double bound = circulant_norm_bound(tm).bound;
    st.samples[std::size_t(t)] = bound / scale;
    if (st.dense_checked) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(tm, Eigen::EigenvaluesOnly);
      const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
      dominated[std::size_t(t)] = bound >= norm * (1.0 - 1e-12);
      st.dense_samples[std::size_t(t)] = norm / scale;
    }
  }
  st.max_ratio = *std::max_element(st.samples.begin(), st.samples.end());
  st.bound_dominates = std::all_of(dominated.begin(), dominated.end(), [](char d) { return d != 0; });
  return st;
}

double raw_l1_ratio(const SensingEnsemble& ens, const Matrix& x) {
  const double f = x.norm();
  if (f == 0.0) throw UndefinedMetricError("ratio undefined for X = 0");
  return apply(ens, x).lpNorm<1>() / double(ens.m()) / f;
}

double debiased_l1_ratio(const SensingEnsemble& ens, const Matrix& x) {
  const double f = x.norm();
  if (f == 0.0) throw UndefinedMetricError("ratio undefined for X = 0");
  if (ens.m() < 2) throw InsufficientMeasurementsError("debiased operator needs m >= 2");
  const Vector b = debiased_apply(ens, x);
  return b.lpNorm<1>() / double(b.size()) / f;
}

double l1l1_failure_ratio(const SensingEnsemble& ens, int r) {
  if (r < 2 || r % 2 != 0 || r > ens.n()) throw ParameterError("l1/l1 demo: r must be even and <= n");
  const int n = ens.n();
  Matrix x1 = Matrix::Zero(n, n);
  Matrix x2 = Matrix::Zero(n, n);
  for (int i = 0; i < r; ++i) {
    x1(i, i) = 1.0;
    x2(i, i) = i < r / 2 ? 1.0 : -1.0;
  }
  return apply(ens, x1).lpNorm<1>() / apply(ens, x2).lpNorm<1>();
}

void write_rip_csv(std::ostream& out, const RipEstimate& est) {
  out << "class,n,m,trial,ratio,seed\n";
  for (std::size_t t = 0; t < est.ratios.size(); ++t)
    out << est.cls << ',' << est.n << ',' << est.m << ',' << t << ',' << format_double(est.ratios[t]) << ','
        << est.seeds[t] << '\n';
}

void write_rip_summary(std::ostream& out, const RipEstimate& est) {
  out << "class=" << est.cls << '\n'
      << "n=" << est.n << '\n'
      << "m=" << est.m << '\n'
      << "trials=" << est.trials << '\n'
      << "min=" << format_double(est.quantiles[0]) << '\n'
      << "q05=" << format_double(est.quantiles[1]) << '\n'
      << "median=" << format_double(est.quantiles[2]) << '\n'
      << "q95=" << format_double(est.quantiles[3]) << '\n'
      << "max=" << format_double(est.quantiles[4]) << '\n'
      << "spread=" << format_double(est.spread()) << '\n';
}

}  // namespace covsketch
