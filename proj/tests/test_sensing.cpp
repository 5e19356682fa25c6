#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "covsketch/errors.hpp"
#include "covsketch/sensing.hpp"
#include "test_util.hpp"

namespace cs = covsketch;
using cs::Matrix;
using cs::RowMatrix;
using cs::Vector;

namespace {

cs::SensingEnsemble from_rows(const RowMatrix& rows, cs::Distribution d = cs::Distribution::gaussian()) {
  return cs::SensingEnsemble(d, 0, rows);
}

// E[a_i a_j a_k a_l] for i.i.d. zero-mean unit-variance entries.
double fourth_moment(int i, int j, int k, int l, double mu4) {
  double v = 0.0;
  if (i == j && k == l) v += 1.0;
  if (i == k && j == l) v += 1.0;
  if (i == l && j == k) v += 1.0;
  if (i == j && j == k && k == l) v += mu4 - 3.0;
  return v;
}

// E[A <A, X>] entrywise from the fourth-moment tensor.
Matrix moment_oracle(const Matrix& x, double mu4) {
  const int n = static_cast<int>(x.rows());
  Matrix out = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) out(i, j) += x(k, l) * fourth_moment(i, j, k, l, mu4);
  return out;
}

std::vector<Vector> sign_vectors(int n) {
  std::vector<Vector> out;
  for (int mask = 0; mask < (1 << n); ++mask) {
    Vector s(n);
    for (int j = 0; j < n; ++j) s(j) = (mask >> j) & 1 ? 1.0 : -1.0;
    out.push_back(s);
  }
  return out;
}

Matrix constant_diag_matrix(int n, std::uint64_t seed) { return testutil::random_toeplitz(n, seed); }

}  // namespace

// ---------------------------------------------------------------- Distribution

TEST(Distribution, FourthMoments) {
  EXPECT_DOUBLE_EQ(cs::Distribution::gaussian().mu4(), 3.0);
  EXPECT_DOUBLE_EQ(cs::Distribution::rademacher().mu4(), 1.0);
  EXPECT_DOUBLE_EQ(cs::Distribution::uniform_scaled().mu4(), 1.8);
}

TEST(Distribution, ParseNames) {
  EXPECT_EQ(cs::Distribution::parse("gaussian"), cs::Distribution::gaussian());
  EXPECT_EQ(cs::Distribution::parse("bernoulli"), cs::Distribution::rademacher());
  EXPECT_EQ(cs::Distribution::parse("uniform_scaled"), cs::Distribution::uniform_scaled());
  EXPECT_THROW(cs::Distribution::parse("cauchy"), cs::ConfigError);
  EXPECT_THROW(cs::Distribution::from_code(9), cs::ConfigError);
}

class DistMoments : public ::testing::TestWithParam<cs::Distribution> {};

TEST_P(DistMoments, MeanZeroVarianceOneFourthMomentMatches) {
  const auto d = GetParam();
  auto e = cs::make_engine(77);
  const int N = 1000000;
  double s1 = 0, s2 = 0, s4 = 0, s8 = 0;
  for (int i = 0; i < N; ++i) {
    const double z = d.sample(e);
    const double z2 = z * z;
    s1 += z;
    s2 += z2;
    s4 += z2 * z2;
    s8 += z2 * z2 * z2 * z2;
  }
  const double mean = s1 / N, var = s2 / N, m4 = s4 / N;
  // Standard errors from the population moments: Var z = 1, Var z^2 = mu4 - 1, Var z^4 = mu8 - mu4^2.
  EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(double(N)));
  EXPECT_LT(std::abs(var - 1.0), 4.0 * std::sqrt((d.mu4() - 1.0) / N) + 1e-12);
  const double var4 = s8 / N - m4 * m4;
  EXPECT_LT(std::abs(m4 - d.mu4()), 4.0 * std::sqrt(var4 / N) + 1e-12);
}

INSTANTIATE_TEST_SUITE_P(All, DistMoments,
                         ::testing::Values(cs::Distribution::gaussian(), cs::Distribution::rademacher(),
                                           cs::Distribution::uniform_scaled()));

// ---------------------------------------------------------------- Ensemble

TEST(Ensemble, RademacherEntriesAreSigns) {
  const auto ens = cs::draw_ensemble(3, 2, cs::Distribution::rademacher(), 7);
  EXPECT_EQ(ens.m(), 2);
  EXPECT_EQ(ens.n(), 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(std::abs(ens.vectors()(i, j)), 1.0);
}

TEST(Ensemble, GaussianSampleMeanWithinClt) {
  const auto ens = cs::draw_ensemble(100, 1000, cs::Distribution::gaussian(), 1);
  EXPECT_LT(std::abs(ens.vectors().mean()), 4.0 / std::sqrt(1e5));
}

TEST(Ensemble, DeterministicAndPrefixStable) {
  const auto a = cs::draw_ensemble(6, 10, cs::Distribution::uniform_scaled(), 3);
  const auto b = cs::draw_ensemble(6, 10, cs::Distribution::uniform_scaled(), 3);
  const auto c = cs::draw_ensemble(6, 4, cs::Distribution::uniform_scaled(), 3);
  EXPECT_EQ(a.vectors(), b.vectors());
  EXPECT_EQ(a.vectors().topRows(4), c.vectors());
  EXPECT_EQ(a.head(4).vectors(), c.vectors());
  EXPECT_NE(a.vectors(), cs::draw_ensemble(6, 10, cs::Distribution::uniform_scaled(), 4).vectors());
}

TEST(Ensemble, RejectsEmptyShapes) {
  EXPECT_THROW(cs::draw_ensemble(0, 3, cs::Distribution::gaussian(), 1), cs::ParameterError);
  EXPECT_THROW(cs::draw_ensemble(3, 0, cs::Distribution::gaussian(), 1), cs::ParameterError);
}

// ---------------------------------------------------------------- apply / adjoint

TEST(Apply, HandComputedExamples) {
  const auto ens = cs::draw_ensemble(4, 5, cs::Distribution::gaussian(), 2);
  EXPECT_EQ(cs::apply(ens, Matrix::Zero(4, 4)), Vector::Zero(5));

  RowMatrix e1 = RowMatrix::Zero(1, 3);
  e1(0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(cs::apply(from_rows(e1), Matrix::Identity(3, 3))(0), 1.0);

  RowMatrix a(1, 2);
  a << 1, 2;
  Matrix m(2, 2);
  m << 1, 2, 2, 5;
  EXPECT_DOUBLE_EQ(cs::apply(from_rows(a), m)(0), 29.0);
}

TEST(Apply, RejectsWrongShape) {
  const auto ens = cs::draw_ensemble(4, 5, cs::Distribution::gaussian(), 2);
  EXPECT_THROW(cs::apply(ens, Matrix::Zero(3, 3)), cs::ShapeError);
  EXPECT_THROW(cs::adjoint(ens, Vector::Zero(4)), cs::ShapeError);
}

TEST(Adjoint, HandComputedExamples) {
  const auto ens = cs::draw_ensemble(3, 4, cs::Distribution::gaussian(), 2);
  EXPECT_EQ(cs::adjoint(ens, Vector::Zero(4)), Matrix::Zero(3, 3));
  RowMatrix a(1, 2);
  a << 1, 1;
  EXPECT_EQ(cs::adjoint(from_rows(a), Vector::Ones(1)), Matrix::Ones(2, 2));
}

TEST(Adjoint, IdentityHoldsOnRandomPairs) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto ens = cs::draw_ensemble(7, 31, cs::Distribution::gaussian(), s);
    const Matrix m = testutil::random_symmetric(7, 100 + s);
    const Vector v = testutil::random_vector(31, 200 + s);
    const double lhs = cs::apply(ens, m).dot(v);
    const double rhs = cs::frob_inner(m, cs::adjoint(ens, v));
    EXPECT_LT(std::abs(lhs - rhs), 1e-10 * m.norm() * v.norm());
  }
}

TEST(Apply, Linearity) {
  const auto ens = cs::draw_ensemble(6, 40, cs::Distribution::rademacher(), 9);
  const Matrix m1 = testutil::random_symmetric(6, 1);
  const Matrix m2 = testutil::random_symmetric(6, 2);
  const double c = -2.5;
  const Vector lhs = cs::apply(ens, m1 + c * m2);
  const Vector rhs = cs::apply(ens, m1) + c * cs::apply(ens, m2);
  EXPECT_LT((lhs - rhs).lpNorm<Eigen::Infinity>(), 1e-12 * (1 + rhs.lpNorm<Eigen::Infinity>()));
}

// ---------------------------------------------------------------- debiased

TEST(Debiased, ZeroInputAndIdenticalPairsCancel) {
  const auto ens = cs::draw_ensemble(4, 6, cs::Distribution::gaussian(), 1);
  EXPECT_EQ(cs::debiased_apply(ens, Matrix::Zero(4, 4)), Vector::Zero(3));
  RowMatrix rows = ens.vectors();
  for (int i = 0; i < 3; ++i) rows.row(2 * i + 1) = rows.row(2 * i);
  const Vector d = cs::debiased_apply(from_rows(rows), testutil::random_symmetric(4, 3));
  EXPECT_EQ(d, Vector::Zero(3));
}

TEST(Debiased, MatchesPairDifferences) {
  const auto ens = cs::draw_ensemble(5, 8, cs::Distribution::gaussian(), 4);
  const Matrix m = testutil::random_symmetric(5, 5);
  const Vector y = cs::apply(ens, m);
  const Vector d = cs::debiased_apply(ens, m);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(d(i), y(2 * i) - y(2 * i + 1), 1e-12 * (1 + std::abs(d(i))));
}

TEST(Debiased, OddCountDropsLastVectorAndWarns) {
  std::vector<std::string> warnings;
  cs::set_warning_handler([&](const std::string& w) { warnings.push_back(w); });
  const auto ens = cs::draw_ensemble(3, 7, cs::Distribution::gaussian(), 1);
  const Vector d = cs::debiased_apply(ens, Matrix::Identity(3, 3));
  cs::set_warning_handler(nullptr);
  EXPECT_EQ(d.size(), 3);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_THROW(cs::debiased_apply(cs::draw_ensemble(3, 1, cs::Distribution::gaussian(), 1), Matrix::Identity(3, 3)),
               cs::InsufficientMeasurementsError);
}

TEST(Debiased, ZeroMeanOverManyDraws) {
  const auto ens = cs::draw_ensemble(6, 200000, cs::Distribution::gaussian(), 12);
  const Vector d = cs::debiased_apply(ens, Matrix::Identity(6, 6));
  const double mean = d.mean();
  const double sd = std::sqrt((d.array() - mean).square().sum() / double(d.size() - 1));
  EXPECT_LT(std::abs(mean), 4.0 * sd / std::sqrt(double(d.size())));
}

// ---------------------------------------------------------------- expected Gram

TEST(ExpectedGram, SpecExamples) {
  EXPECT_TRUE(cs::expected_gram(Matrix::Identity(2, 2), 3.0, 2).isApprox(4.0 * Matrix::Identity(2, 2)));
  EXPECT_EQ(cs::expected_gram(Matrix::Zero(3, 3), 3.0, 3), Matrix::Zero(3, 3));
  EXPECT_THROW(cs::expected_gram(Matrix::Zero(3, 3), 3.0, 4), cs::ShapeError);
}

TEST(ExpectedGram, GeneralVariantMatchesFourthMomentTensor) {
  for (double mu4 : {1.0, 1.8, 3.0}) {
    const Matrix x = testutil::random_symmetric(4, 31);
    const Matrix oracle = moment_oracle(x, mu4);
    EXPECT_LT((cs::expected_gram(x, mu4, 4, cs::GramVariant::kRawGeneral) - oracle).norm(), 1e-12 * oracle.norm());
  }
}

TEST(ExpectedGram, RawFormIsExactForGaussianOrConstantDiagonal) {
  const Matrix x = testutil::random_symmetric(5, 3);
  EXPECT_LT((cs::expected_gram(x, 3.0, 5) - moment_oracle(x, 3.0)).norm(), 1e-12);
  const Matrix t = constant_diag_matrix(5, 4);
  for (double mu4 : {1.0, 1.8})
    EXPECT_LT((cs::expected_gram(t, mu4, 5) - moment_oracle(t, mu4)).norm(), 1e-12 * (1 + t.norm()));
  // Off the Gaussian case with a varying diagonal the raw form is only an approximation.
  EXPECT_GT((cs::expected_gram(x, 1.0, 5) - moment_oracle(x, 1.0)).norm(), 1e-3);
}

TEST(ExpectedGram, DebiasedMatchesTensorOracle) {
  for (double mu4 : {1.0, 1.8, 3.0}) {
    const Matrix x = testutil::random_symmetric(4, 8);
    // E[(A1 - A2)<A1 - A2, X>] = 2 E[A<A,X>] - 2 tr(X) I.
    const Matrix oracle = 2.0 * moment_oracle(x, mu4) - 2.0 * x.trace() * Matrix::Identity(4, 4);
    EXPECT_LT((cs::expected_gram(x, mu4, 4, cs::GramVariant::kDebiased) - oracle).norm(), 1e-12 * oracle.norm());
  }
}

TEST(ExpectedGram, RademacherExactEnumeration) {
  const int n = 3;
  const Matrix x = testutil::random_symmetric(n, 5);
  const auto signs = sign_vectors(n);
  Matrix raw = Matrix::Zero(n, n);
  for (const auto& s : signs) raw += s.dot(x * s) * (s * s.transpose());
  raw /= double(signs.size());
  Matrix deb = Matrix::Zero(n, n);
  for (const auto& s : signs)
    for (const auto& t : signs) {
      const Matrix b = s * s.transpose() - t * t.transpose();
      deb += cs::frob_inner(b, x) * b;
    }
  deb /= double(signs.size() * signs.size());
  EXPECT_LT((cs::expected_gram(x, 1.0, n, cs::GramVariant::kRawGeneral) - raw).norm(), 1e-12);
  EXPECT_LT((cs::expected_gram(x, 1.0, n, cs::GramVariant::kDebiased) - deb).norm(), 1e-12);
}

TEST(ExpectedGram, GaussianMonteCarloWithinFourStandardErrors) {
  const int n = 3;
  const Matrix x = testutil::random_symmetric(n, 6);
  const auto ens = cs::draw_ensemble(n, 1000000, cs::Distribution::gaussian(), 99);
  const Vector q = cs::apply(ens, x);
  Matrix sum = Matrix::Zero(n, n), sumsq = Matrix::Zero(n, n);
  for (int i = 0; i < ens.m(); ++i) {
    const Vector a = ens.row(i).transpose();
    const Matrix s = q(i) * a * a.transpose();
    sum += s;
    sumsq += s.cwiseAbs2();
  }
  const double N = ens.m();
  const Matrix mean = sum / N;
  const Matrix se = ((sumsq / N - mean.cwiseAbs2()) / (N - 1)).cwiseSqrt();
  const Matrix expect = cs::expected_gram(x, 3.0, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) EXPECT_LE(std::abs(mean(i, j) - expect(i, j)), 4.0 * se(i, j)) << i << "," << j;
}

// ---------------------------------------------------------------- isotropy

TEST(Isotropy, PaperExampleAlpha) {
  const auto c = cs::isotropic_combo_coeffs(1.0, 10, 2.0);
  EXPECT_NEAR(c.alpha, 0.5, 1e-15);
}

TEST(Isotropy, NormalizationIdentity) {
  for (double mu4 : {1.0, 1.8})
    for (int n : {3, 10, 50}) {
      const auto c = cs::isotropic_combo_coeffs(mu4, n);
      const double b = c.beta / c.alpha, g = c.gamma / c.alpha;
      EXPECT_NEAR(1.0 + b * b + g * g, c.xi * c.xi / (3.0 - mu4), 1e-10);
    }
}

// For B = sum_j w_j A_j with independent A_j, E[B <B, X>] on a constant
// diagonal X equals 2 (sum w^2) X + [(sum w^2)(mu4 - 3) + n (sum w)^2] d I,
// so isotropy needs sum w^2 = 1/2 and (sum w)^2 = (3 - mu4) / (2n).
TEST(Isotropy, WeightsSatisfyMomentConditions) {
  for (double mu4 : {1.0, 1.8})
    for (int n : {2, 5, 10, 64})
      for (double scale : {1.0, 1.5, 3.0}) {
        const double xi = scale * cs::default_xi(mu4);
        const auto c = cs::isotropic_combo_coeffs(mu4, n, xi);
        const double s1 = c.alpha + c.beta + c.gamma;
        const double s2 = c.alpha * c.alpha + c.beta * c.beta + c.gamma * c.gamma;
        EXPECT_NEAR(s2, 0.5, 1e-12) << mu4 << " " << n << " " << xi;
        EXPECT_NEAR(s1 * s1, (3.0 - mu4) / (2.0 * n), 1e-12) << mu4 << " " << n << " " << xi;
      }
}

TEST(Isotropy, RejectsOutOfRangeArguments) {
  EXPECT_THROW(cs::isotropic_combo_coeffs(3.0, 5), cs::ParameterError);
  EXPECT_THROW(cs::isotropic_combo_coeffs(1.0, 5, 1.0), cs::ParameterError);
  EXPECT_THROW(cs::isotropic_combo_coeffs(1.0, 0), cs::ParameterError);
}

TEST(Isotropy, ConstructionFollowsDistribution) {
  const auto g = cs::IsotropicCombination::for_distribution(cs::Distribution::gaussian(), 8);
  EXPECT_EQ(g.kind, cs::IsotropicCombination::Kind::kPair);
  EXPECT_EQ(g.weights(), (std::vector<double>{0.5, -0.5}));
  const auto r = cs::IsotropicCombination::for_distribution(cs::Distribution::rademacher(), 8);
  EXPECT_EQ(r.kind, cs::IsotropicCombination::Kind::kTriple);
  EXPECT_EQ(r.group_size(), 3);
}

TEST(Isotropy, RademacherTripleExactEnumeration) {
  const int n = 3;
  const Matrix x = constant_diag_matrix(n, 12);
  const auto comb = cs::IsotropicCombination::for_distribution(cs::Distribution::rademacher(), n);
  const auto w = comb.weights();
  const auto signs = sign_vectors(n);
  Matrix acc = Matrix::Zero(n, n);
  for (const auto& s : signs)
    for (const auto& t : signs)
      for (const auto& u : signs) {
        const Matrix b = w[0] * s * s.transpose() + w[1] * t * t.transpose() + w[2] * u * u.transpose();
        acc += cs::frob_inner(b, x) * b;
      }
  acc /= double(signs.size() * signs.size() * signs.size());
  EXPECT_LT((acc - x).norm(), 1e-12 * x.norm());
}

TEST(Isotropy, PairPathIsHalfTheDebiasedOperator) {
  const auto ens = cs::draw_ensemble(6, 20, cs::Distribution::gaussian(), 3);
  const Matrix x = testutil::random_symmetric(6, 4);
  const auto comb = cs::IsotropicCombination::for_distribution(ens.dist(), 6);
  const Vector lhs = cs::isotropic_apply(ens, x, comb);
  const Vector rhs = 0.5 * cs::debiased_apply(ens, x);
  EXPECT_LT((lhs - rhs).norm(), 1e-12 * rhs.norm());
  EXPECT_EQ(cs::isotropic_apply(ens, Matrix::Zero(6, 6), comb), Vector::Zero(10));
}

TEST(Isotropy, GroupMatricesAgreeWithApply) {
  const auto ens = cs::draw_ensemble(5, 10, cs::Distribution::uniform_scaled(), 3);
  const auto comb = cs::IsotropicCombination::for_distribution(ens.dist(), 5);
  const Matrix x = testutil::random_symmetric(5, 7);
  const Vector b = cs::isotropic_apply(ens, x, comb);
  ASSERT_EQ(b.size(), 3);
  for (int g = 0; g < 3; ++g) EXPECT_NEAR(b(g), cs::frob_inner(cs::isotropic_matrix(ens, g, comb), x), 1e-12);
  EXPECT_THROW(cs::isotropic_matrix(ens, 3, comb), cs::ParameterError);
}

TEST(Isotropy, SecondMomentMonteCarloUniformScaled) {
  const int n = 10;
  const long long N = 100000;
  const Matrix x = constant_diag_matrix(n, 21);
  const auto ens = cs::draw_ensemble(n, int(3 * N), cs::Distribution::uniform_scaled(), 5);
  const auto comb = cs::IsotropicCombination::for_distribution(ens.dist(), n);
  const Vector b = cs::isotropic_apply(ens, x, comb);
  Matrix acc = Matrix::Zero(n, n);
  for (long long g = 0; g < N; ++g) acc += b(g) * cs::isotropic_matrix(ens, int(g), comb);
  acc /= double(N);
  EXPECT_LT(std::abs(cs::frob_inner(x, acc) - x.squaredNorm()), 0.05 * x.squaredNorm());
  EXPECT_LT((acc - x).norm(), 0.05 * x.norm());
}

// ---------------------------------------------------------------- Gram

TEST(Gram, OrthonormalAndDuplicatedVectors) {
  RowMatrix id = RowMatrix::Identity(4, 4);
  EXPECT_EQ(cs::gram_matrix(from_rows(id)), Matrix::Identity(4, 4));
  RowMatrix ones = RowMatrix::Ones(2, 5);
  EXPECT_EQ(cs::gram_matrix(from_rows(ones)), Matrix::Constant(2, 2, 25.0));
}

TEST(Gram, IsPositiveSemidefinite) {
  const auto ens = cs::draw_ensemble(6, 40, cs::Distribution::gaussian(), 5);
  const Matrix g = cs::gram_matrix(ens);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * g.trace());
}

// ---------------------------------------------------------------- noise

TEST(Noise, UniformNoiseIsBoundedAndRecorded) {
  const Vector clean = testutil::random_vector(50, 1);
  const auto meas = cs::add_uniform_noise(clean, 0.1, 9);
  EXPECT_EQ(meas.noise_kind, cs::NoiseKind::kL1Bounded);
  EXPECT_DOUBLE_EQ(meas.noise_level, 5.0);
  EXPECT_LE((meas.y - clean).lpNorm<Eigen::Infinity>(), 0.1);
  EXPECT_LE((meas.y - clean).lpNorm<1>(), meas.noise_level);
  const auto none = cs::add_uniform_noise(clean, 0.0, 9);
  EXPECT_EQ(none.noise_kind, cs::NoiseKind::kNone);
  EXPECT_EQ(none.y, clean);
  EXPECT_THROW(cs::add_uniform_noise(clean, -1.0, 9), cs::ParameterError);
}

TEST(Noise, MeasurementSetValidation) {
  cs::MeasurementSet bad{Vector::Zero(2), cs::NoiseKind::kNone, 0.5};
  EXPECT_THROW(bad.validate(), cs::ParameterError);
  cs::MeasurementSet ok{Vector::Zero(2), cs::NoiseKind::kL2Bounded, 0.5};
  EXPECT_NO_THROW(ok.validate());
  EXPECT_EQ(cs::parse_noise_kind(cs::noise_kind_name(cs::NoiseKind::kL1Bounded)), cs::NoiseKind::kL1Bounded);
}

// ---------------------------------------------------------------- streaming

TEST(Stream, ConstantStreamGivesExactSquares) {
  const auto ens = cs::draw_ensemble(3, 5, cs::Distribution::gaussian(), 2);
  RowMatrix stream = RowMatrix::Zero(200, 3);
  stream.col(0).setOnes();
  const auto res = cs::sketch_stream(stream, ens, 4);
  for (int i = 0; i < 5; ++i) {
    if (res.schedule.counts[std::size_t(i)] > 0) {
      EXPECT_DOUBLE_EQ(res.measurements.y(i), ens.vectors()(i, 0) * ens.vectors()(i, 0));
    } else {
      EXPECT_TRUE(std::isnan(res.measurements.y(i)));
    }
  }
}

TEST(Stream, MatchesNaivePerIndexMeans) {
  const auto ens = cs::draw_ensemble(4, 6, cs::Distribution::rademacher(), 2);
  RowMatrix stream(300, 4);
  for (int t = 0; t < 300; ++t) stream.row(t) = testutil::random_vector(4, 1000 + t).transpose();
  const auto res = cs::sketch_stream(stream, ens, 17);
  std::vector<double> sum(6, 0.0);
  std::vector<int> cnt(6, 0);
  for (int t = 0; t < 300; ++t) {
    const int i = res.schedule.index_for(std::uint64_t(t));
    const double p = ens.vectors().row(i).dot(stream.row(t));
    sum[std::size_t(i)] += p * p;
    cnt[std::size_t(i)] += 1;
  }
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(res.schedule.counts[std::size_t(i)], cnt[std::size_t(i)]);
    if (cnt[std::size_t(i)] > 0) EXPECT_NEAR(res.measurements.y(i), sum[std::size_t(i)] / cnt[std::size_t(i)], 1e-12);
  }
  const auto again = cs::sketch_stream(stream, ens, 17);
  EXPECT_TRUE(again.measurements.y.isApprox(res.measurements.y));
}

TEST(Stream, ConvergesToExpectedMeasurementsAtRootNRate) {
  const auto ens = cs::draw_ensemble(2, 4, cs::Distribution::gaussian(), 6);
  Matrix sigma = Matrix::Zero(2, 2);
  sigma(0, 0) = 2.0;
  sigma(1, 1) = 1.0;
  const Vector target = cs::apply(ens, sigma);
  // RMS error over independent replications; one realization is too noisy
  // to pin the rate.
  auto rms = [&](int len) {
    double acc = 0.0;
    for (std::uint64_t rep = 0; rep < 30; ++rep) {
      auto e = cs::make_engine(cs::derive_seed(31, {std::uint64_t(len), rep}));
      std::normal_distribution<double> nd;
      RowMatrix stream(len, 2);
      for (int t = 0; t < len; ++t) {
        stream(t, 0) = std::sqrt(2.0) * nd(e);
        stream(t, 1) = nd(e);
      }
      acc += (cs::sketch_stream(stream, ens, 8 + rep).measurements.y - target).squaredNorm();
    }
    return std::sqrt(acc / 30.0);
  };
  const double e3 = rms(2000), e4 = rms(20000);
  // Expected ratio sqrt(10) ~ 3.16.
  EXPECT_GT(e3 / e4, 2.2);
  EXPECT_LT(e3 / e4, 4.5);
}

TEST(Stream, EmptyStreamIsAnError) {
  const auto ens = cs::draw_ensemble(2, 3, cs::Distribution::gaussian(), 1);
  cs::StreamSketcher sk(ens, 1);
  EXPECT_THROW(sk.measurements(), cs::EmptyInputError);
  EXPECT_THROW(cs::sketch_stream(RowMatrix(0, 2), ens, 1), cs::EmptyInputError);
  EXPECT_THROW(sk.push(Vector::Zero(3)), cs::ShapeError);
}

// ---------------------------------------------------------------- serialization

TEST(Serialization, RoundTripIsBitExact) {
  const auto ens = cs::draw_ensemble(7, 13, cs::Distribution::uniform_scaled(), 42);
  std::stringstream buf;
  cs::write_ensemble(buf, ens);
  const auto back = cs::read_ensemble(buf);
  EXPECT_EQ(back.vectors(), ens.vectors());
  EXPECT_EQ(back.dist(), ens.dist());
  EXPECT_EQ(back.seed(), ens.seed());
  // Header: 5 magic + 8 + 8 + 4 + 8 + 8 bytes.
  EXPECT_EQ(buf.str().size(), 41u + 7u * 13u * 8u);
}

TEST(Serialization, RejectsCorruptContainers) {
  const auto ens = cs::draw_ensemble(2, 3, cs::Distribution::gaussian(), 1);
  std::stringstream buf;
  cs::write_ensemble(buf, ens);
  const std::string bytes = buf.str();

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream s1(bad_magic);
  EXPECT_THROW(cs::read_ensemble(s1), cs::IoError);

  std::istringstream s2(bytes.substr(0, bytes.size() - 4));
  EXPECT_THROW(cs::read_ensemble(s2), cs::IoError);

  std::string bad_mu4 = bytes;
  const double wrong = 1.0;
  std::memcpy(bad_mu4.data() + 25, &wrong, sizeof(double));
  std::istringstream s3(bad_mu4);
  EXPECT_THROW(cs::read_ensemble(s3), cs::IoError);

  EXPECT_THROW(cs::load_ensemble("/nonexistent/ens.bin"), cs::IoError);
}
