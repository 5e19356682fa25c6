#pragma once

// Empirical probes of the restricted-isometry and isotropy properties of
// quadratic sensing. Everything reported here is a Monte Carlo quantile,
// never a certified bound: certifying RIP constants is intractable.

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "covsketch/linalg.hpp"
#include "covsketch/rng.hpp"
#include "covsketch/sensing.hpp"

namespace covsketch {

struct RipEstimate {
  std::string cls;
  int n = 0;
  int m = 0;
  int trials = 0;
  std::vector<double> ratios;
  std::vector<Seed> seeds;  // per-trial seed
  std::array<double, 5> quantiles{};  // min, 5%, 50%, 95%, max

  double spread() const { return quantiles[4] / quantiles[0]; }
  double width_90() const { return quantiles[3] - quantiles[1]; }
};

using EnsembleFactory = std::function<SensingEnsemble(Seed)>;
// Returns a matrix of the probed class; a zero draw is resampled.
using ClassSampler = std::function<Matrix(Seed)>;

// Unit-Frobenius samplers built on the structure generators.
ClassSampler rank_sampler(int n, int r);
ClassSampler sparse_sampler(int n, int k);
// X1 + X2 with X1 rank r supported on a k x k principal block and X2 l-sparse.
ClassSampler lowrank_plus_sparse_sampler(int n, int k, int r, int l);
ClassSampler toeplitz_sampler(int n, int r);

// Ratios (1/m') ||B(X)||_1 / ||X||_F of the debiased operator, m' = floor(m/2).
// With fresh_ensemble_per_trial each trial draws a new ensemble (concentration
// over the operator); otherwise one ensemble probes many X (uniformity over X).
RipEstimate estimate_rip(const EnsembleFactory& ens_factory, const ClassSampler& sampler, int trials,
                         bool fresh_ensemble_per_trial, Seed base_seed, const std::string& cls = "rank_r");

// Ratios (1/sqrt(m')) ||B_iso(X)||_2 / ||X||_F of the isotropic combination.
RipEstimate rip_l2l2_toeplitz(const EnsembleFactory& ens_factory, const ClassSampler& sampler, int trials,
                              bool fresh_ensemble_per_trial, Seed base_seed);

// ||(1/N) sum_i B_i <B_i, X> - X||_F / ||X||_F over N isotropic groups.
// The expectation equals X for constant-diagonal (e.g. Toeplitz) X; for
// mu4 != 3 other X keep a (mu4 - 3) diag(X) bias.
double isotropy_deviation(const Distribution& dist, int n, long long sample_count, const Matrix& test_matrix,
                          Seed seed);

// Monte Carlo mean of B_i <B_i, X> (the isotropic operator's E[B*B]).
Matrix isotropic_second_moment(const Distribution& dist, int n, long long sample_count, const Matrix& x,
                               Seed seed);

struct MomentEstimate {
  Matrix mean;
  Matrix std_error;
};

// Entrywise mean and standard error of A<A, X> (raw) or B<B, X> with
// B = A_1 - A_2 (debiased) over `draws` independent draws.
MomentEstimate monte_carlo_gram(const Distribution& dist, const Matrix& x, long long draws, bool debiased,
                                Seed seed);

struct ToeplitzNormStats {
  int n = 0;
  std::vector<double> samples;        // circulant bound of ||T(z z^T)||, over log^{3/2} n
  std::vector<double> dense_samples;  // dense spectral norm over log^{3/2} n, when checked
  double max_ratio = 0.0;
  bool dense_checked = false;
  bool bound_dominates = true;  // circulant bound >= dense norm on every trial
};

// ||T(z z^T)|| statistics from the circulant bound, cross-checked against a
// dense eigendecomposition when n <= dense_limit.
ToeplitzNormStats toeplitz_norm_stats(const Distribution& dist, int n, int trials, Seed seed,
                                      int dense_limit = 128);

// (1/m) ||A(X)||_1 / ||X||_F for the raw, biased operator.
double raw_l1_ratio(const SensingEnsemble& ens, const Matrix& x);
double debiased_l1_ratio(const SensingEnsemble& ens, const Matrix& x);

// ||A(X1)||_1 / ||A(X2)||_1 for X1 = diag(I_{r/2}, I_{r/2}, 0) and
// X2 = diag(I_{r/2}, -I_{r/2}, 0): equal nuclear norms, Theta(r) vs
// Theta(sqrt r) measurement mass.
double l1l1_failure_ratio(const SensingEnsemble& ens, int r);

// CSV rows: class,n,m,trial,ratio,seed.
void write_rip_csv(std::ostream& out, const RipEstimate& est);
void write_rip_summary(std::ostream& out, const RipEstimate& est);

}  // namespace covsketch
