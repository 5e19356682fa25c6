#include "covsketch/projections.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "covsketch/errors.hpp"

namespace covsketch {
namespace {

template <typename Map>
Matrix spectral_map(const Matrix& m, Map map) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  const Vector mapped = eig.eigenvalues().unaryExpr(map);
  const auto& v = eig.eigenvectors();
  Matrix out = v * mapped.asDiagonal() * v.transpose();
  return symmetrize(out);
}

}  // namespace

Matrix project_psd(const Matrix& m) {
  return spectral_map(m, [](double l) { return std::max(l, 0.0); });
}

Matrix prox_trace_psd(const Matrix& m, double tau) {
  return spectral_map(m, [tau](double l) { return std::max(l - tau, 0.0); });
}

Matrix prox_nuclear(const Matrix& m, double tau) {
  return spectral_map(m, [tau](double l) { return std::copysign(std::max(std::abs(l) - tau, 0.0), l); });
}

Vector project_l1_ball(const Vector& v, double radius) {
  if (radius < 0.0) throw ParameterError("project_l1_ball: radius must be >= 0");
  if (v.lpNorm<1>() <= radius) return v;
  if (radius == 0.0) return Vector::Zero(v.size());
  std::vector<double> mags(v.data(), v.data() + v.size());
  for (double& x : mags) x = std::abs(x);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < mags.size(); ++j) {
    cumsum += mags[j];
    const double t = (cumsum - radius) / double(j + 1);
    if (mags[j] - t > 0.0) theta = t;
  }
  return v.unaryExpr([theta](double x) { return std::copysign(std::max(std::abs(x) - theta, 0.0), x); });
}

Vector project_l2_ball(const Vector& v, double radius) {
  if (radius < 0.0) throw ParameterError("project_l2_ball: radius must be >= 0");
  const double norm = v.norm();
  if (norm <= radius) return v;
  if (radius == 0.0) return Vector::Zero(v.size());
  return v * (radius / norm);
}

Matrix soft_threshold(const Matrix& m, double tau) {
  return m.unaryExpr([tau](double x) { return std::copysign(std::max(std::abs(x) - tau, 0.0), x); });
}

}  // namespace covsketch
