#include "covsketch/kernels.hpp"

#include <algorithm>

#include <omp.h>

namespace covsketch::kernels {
namespace {

// Fixed block size: the partition of work never depends on the thread count.
constexpr Eigen::Index kBlock = 32;
// Below this many flops the parallel region costs more than it saves.
constexpr double kParallelFlops = 2.0e5;

Eigen::Index block_count(Eigen::Index total) { return (total + kBlock - 1) / kBlock; }

}  // namespace

Vector quad_forms(const RowMatrix& a, const Matrix& m) {
  const Eigen::Index rows = a.rows();
  Vector out(rows);
  const Eigen::Index blocks = block_count(rows);
  const bool go_parallel = double(rows) * double(m.size()) > kParallelFlops;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index lo = b * kBlock;
    const Eigen::Index len = std::min(kBlock, rows - lo);
    const RowMatrix p = a.middleRows(lo, len) * m;
    out.segment(lo, len) = p.cwiseProduct(a.middleRows(lo, len)).rowwise().sum();
  }
  return out;
}

Vector quad_forms_serial(const RowMatrix& a, const Matrix& m) {
  const Eigen::Index rows = a.rows(), n = a.cols();
  Vector out(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      double row = 0.0;
      for (Eigen::Index q = 0; q < n; ++q) row += m(p, q) * a(i, q);
      acc += a(i, p) * row;
    }
    out(i) = acc;
  }
  return out;
}

Matrix weighted_outer_sum(const RowMatrix& a, const Vector& v) {
  const Eigen::Index n = a.cols();
  Matrix out(n, n);
  const Eigen::Index blocks = block_count(n);
  const bool go_parallel = double(a.rows()) * double(n) * double(n) > kParallelFlops;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index lo = b * kBlock;
    const Eigen::Index len = std::min(kBlock, n - lo);
    const Matrix weighted = v.asDiagonal() * a.middleCols(lo, len);
    out.middleCols(lo, len).noalias() = a.transpose() * weighted;
  }
  return 0.5 * (out + out.transpose());
}

Matrix weighted_outer_sum_serial(const RowMatrix& a, const Vector& v) {
  const Eigen::Index rows = a.rows(), n = a.cols();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = 0; q < n; ++q) out(p, q) += v(i) * a(i, p) * a(i, q);
  return out;
}

Matrix squared_gram(const RowMatrix& a) {
  const Eigen::Index rows = a.rows();
  Matrix out(rows, rows);
  const Eigen::Index blocks = block_count(rows);
  const bool go_parallel = double(rows) * double(rows) * double(a.cols()) > kParallelFlops;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index lo = b * kBlock;
    const Eigen::Index len = std::min(kBlock, rows - lo);
    out.middleRows(lo, len).noalias() = a.middleRows(lo, len) * a.transpose();
  }
  out = out.array().square().matrix();
  return 0.5 * (out + out.transpose());
}

Matrix squared_gram_serial(const RowMatrix& a) {
  const Eigen::Index rows = a.rows(), n = a.cols();
  Matrix out(rows, rows);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      double dot = 0.0;
      for (Eigen::Index p = 0; p < n; ++p) dot += a(i, p) * a(j, p);
      out(i, j) = out(j, i) = dot * dot;
    }
  return out;
}

int worker_count() { return omp_get_max_threads(); }

void set_worker_count(int threads) { omp_set_num_threads(std::max(1, threads)); }

}  // namespace covsketch::kernels
