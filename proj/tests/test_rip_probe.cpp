#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>
#include <omp.h>

#include "covsketch/errors.hpp"
#include "covsketch/rip_probe.hpp"
#include "covsketch/structures.hpp"
#include "test_util.hpp"

namespace cs = covsketch;
using cs::Matrix;

namespace {

cs::EnsembleFactory gaussian_factory(int n, int m) {
  return [=](cs::Seed s) { return cs::draw_ensemble(n, m, cs::Distribution::gaussian(), s); };
}

}  // namespace

TEST(EstimateRip, QuantilesAreOrderedAndSeedsRecorded) {
  const auto est = cs::estimate_rip(gaussian_factory(10, 200), cs::rank_sampler(10, 2), 30, true, 7);
  ASSERT_EQ(est.ratios.size(), 30u);
  ASSERT_EQ(est.seeds.size(), 30u);
  EXPECT_TRUE(std::is_sorted(est.quantiles.begin(), est.quantiles.end()));
  EXPECT_EQ(est.quantiles[0], *std::min_element(est.ratios.begin(), est.ratios.end()));
  EXPECT_EQ(est.quantiles[4], *std::max_element(est.ratios.begin(), est.ratios.end()));
  for (double r : est.ratios) EXPECT_GT(r, 0.0);
  EXPECT_EQ(est.cls, "rank_r");
  EXPECT_EQ(est.m, 200);
}

TEST(EstimateRip, RejectsTooFewTrials) {
  EXPECT_THROW(cs::estimate_rip(gaussian_factory(5, 20), cs::rank_sampler(5, 1), 9, true, 1), cs::ParameterError);
}

TEST(EstimateRip, DeterministicAcrossThreadCounts) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto a = cs::estimate_rip(gaussian_factory(8, 100), cs::sparse_sampler(8, 6), 20, false, 3, "sparse");
  omp_set_num_threads(3);
  const auto b = cs::estimate_rip(gaussian_factory(8, 100), cs::sparse_sampler(8, 6), 20, false, 3, "sparse");
  omp_set_num_threads(saved);
  EXPECT_EQ(a.ratios, b.ratios);
}

TEST(L1Ratio, ScaleInvariant) {
  const auto ens = cs::draw_ensemble(8, 60, cs::Distribution::gaussian(), 2);
  const Matrix x = testutil::random_symmetric(8, 9);
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    EXPECT_NEAR(cs::debiased_l1_ratio(ens, c * x), cs::debiased_l1_ratio(ens, x),
                1e-12 * cs::debiased_l1_ratio(ens, x));
    EXPECT_NEAR(cs::raw_l1_ratio(ens, -c * x), cs::raw_l1_ratio(ens, x), 1e-12 * cs::raw_l1_ratio(ens, x));
  }
  EXPECT_THROW(cs::debiased_l1_ratio(ens, Matrix::Zero(8, 8)), cs::UndefinedMetricError);
}

TEST(L1Ratio, ConcentratesAsMeasurementsGrow) {
  const auto small = cs::estimate_rip(gaussian_factory(20, 500), cs::rank_sampler(20, 2), 60, true, 11);
  const auto large = cs::estimate_rip(gaussian_factory(20, 2000), cs::rank_sampler(20, 2), 60, true, 11);
  EXPECT_LT(small.spread(), 3.0);
  EXPECT_LT(large.width_90(), 0.8 * small.width_90());
}

TEST(L1Ratio, DebiasingIsNecessary) {
  // For X = I the raw ratio is E||a||^2 / sqrt(n) = sqrt(n); the debiased
  // one stays O(1).
  for (int n : {25, 100}) {
    const auto ens = cs::draw_ensemble(n, 400, cs::Distribution::gaussian(), 5);
    const Matrix x = Matrix::Identity(n, n);
    EXPECT_NEAR(cs::raw_l1_ratio(ens, x), std::sqrt(double(n)), 0.05 * std::sqrt(double(n)));
    EXPECT_LT(cs::debiased_l1_ratio(ens, x), 2.0);
  }
  const auto ens = cs::draw_ensemble(100, 400, cs::Distribution::gaussian(), 5);
  const Matrix x = Matrix::Identity(100, 100);
  EXPECT_GT(cs::raw_l1_ratio(ens, x), 2.0 * cs::debiased_l1_ratio(ens, x));
}

TEST(L1Ratio, L1L1FailureRatio) {
  const auto ens = cs::draw_ensemble(40, 1280, cs::Distribution::gaussian(), 17);
  EXPECT_GT(cs::l1l1_failure_ratio(ens, 8), 2.0);
  EXPECT_THROW(cs::l1l1_failure_ratio(ens, 3), cs::ParameterError);
}

TEST(Samplers, UnitFrobeniusAndClassMembership) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix a = cs::rank_sampler(12, 3)(s);
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
    EXPECT_EQ(cs::numerical_rank(a), 3);
    const Matrix b = cs::sparse_sampler(12, 9)(s);
    EXPECT_NEAR(b.norm(), 1.0, 1e-12);
    EXPECT_LE(cs::count_nonzeros(b), 9);
    const Matrix t = cs::toeplitz_sampler(12, 2)(s);
    EXPECT_NEAR(t.norm(), 1.0, 1e-12);
    EXPECT_TRUE(cs::is_toeplitz(t, 1e-12));
    const Matrix l = cs::lowrank_plus_sparse_sampler(12, 4, 2, 5)(s);
    EXPECT_NEAR(l.norm(), 1.0, 1e-12);
  }
}

TEST(ToeplitzL2, NearIsometryAtScaledMeasurementCount) {
  const int n = 32, r = 2;
  const double logn = std::log(double(n));
  const int m = static_cast<int>(std::ceil(50.0 * r * logn * logn));
  const auto est = cs::rip_l2l2_toeplitz(gaussian_factory(n, m), cs::toeplitz_sampler(n, r), 20, true, 4);
  EXPECT_GT(est.quantiles[2], 0.8);
  EXPECT_LT(est.quantiles[2], 1.2);
}

TEST(Isotropy, DeviationSmallAndShrinksWithSamples) {
  const Matrix x = testutil::random_toeplitz(10, 3);
  for (auto dist : {cs::Distribution::gaussian(), cs::Distribution::rademacher()}) {
    const double d1 = cs::isotropy_deviation(dist, 10, 20000, x, 5);
    const double d4 = cs::isotropy_deviation(dist, 10, 80000, x, 6);
    EXPECT_LT(d4, 0.05) << dist.name();
    EXPECT_GT(d4 / d1, 0.35) << dist.name();
    EXPECT_LT(d4 / d1, 0.75) << dist.name();
  }
}

TEST(Isotropy, NonConstantDiagonalKeepsBiasWhenMu4IsNotThree) {
  // The (mu4 - 3) diag(X) term is only absorbed by the identity part when
  // diag(X) is constant.
  Matrix x = Matrix::Zero(6, 6);
  x(0, 0) = 1.0;
  EXPECT_LT(cs::isotropy_deviation(cs::Distribution::gaussian(), 6, 40000, x, 2), 0.05);
  EXPECT_GT(cs::isotropy_deviation(cs::Distribution::rademacher(), 6, 40000, x, 2), 0.2);
}

TEST(Isotropy, Rejections) {
  EXPECT_THROW(cs::isotropy_deviation(cs::Distribution::gaussian(), 4, 100, Matrix::Zero(4, 4), 1),
               cs::UndefinedMetricError);
  EXPECT_THROW(cs::isotropy_deviation(cs::Distribution::gaussian(), 4, 100, Matrix::Identity(3, 3), 1),
               cs::ShapeError);
}

TEST(MonteCarloGram, DebiasedRademacherMatchesClosedForm) {
  // For mu4 = 1: E[B<B, X>] = 4X - 4 diag(X).
  Matrix x = testutil::random_symmetric(4, 8);
  const auto est = cs::monte_carlo_gram(cs::Distribution::rademacher(), x, 200000, true, 3);
  Matrix expect = 4.0 * x;
  expect.diagonal() -= 4.0 * x.diagonal();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_LE(std::abs(est.mean(i, j) - expect(i, j)), 5.0 * est.std_error(i, j) + 1e-12);
}

TEST(MonteCarloGram, ThreadIndependent) {
  const Matrix x = testutil::random_symmetric(3, 1);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto a = cs::monte_carlo_gram(cs::Distribution::gaussian(), x, 5000, false, 9);
  omp_set_num_threads(4);
  const auto b = cs::monte_carlo_gram(cs::Distribution::gaussian(), x, 5000, false, 9);
  omp_set_num_threads(saved);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(ToeplitzNorm, BoundDominatesDenseNorm) {
  const auto st = cs::toeplitz_norm_stats(cs::Distribution::gaussian(), 32, 60, 4);
  ASSERT_EQ(st.samples.size(), 60u);
  EXPECT_TRUE(st.dense_checked);
  EXPECT_TRUE(st.bound_dominates);
  for (std::size_t i = 0; i < st.samples.size(); ++i) {
    EXPECT_GT(st.samples[i], 0.0);
    EXPECT_GE(st.samples[i], st.dense_samples[i] - 1e-12);
  }
  EXPECT_EQ(st.max_ratio, *std::max_element(st.samples.begin(), st.samples.end()));
  EXPECT_FALSE(cs::toeplitz_norm_stats(cs::Distribution::gaussian(), 32, 50, 4, 16).dense_checked);
  EXPECT_THROW(cs::toeplitz_norm_stats(cs::Distribution::gaussian(), 32, 49, 4), cs::ParameterError);
}

TEST(RipCsv, Layout) {
  const auto est = cs::estimate_rip(gaussian_factory(5, 40), cs::rank_sampler(5, 1), 10, true, 2);
  std::ostringstream out;
  cs::write_rip_csv(out, est);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "class,n,m,trial,ratio,seed");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 10);
}
