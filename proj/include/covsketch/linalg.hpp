#pragma once

#include <Eigen/Dense>

namespace covsketch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// Sensing vectors are stored one per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double frob_inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool is_symmetric(const Matrix& m, double rel_tol = 1e-12);

// Largest |eigenvalue| of a symmetric matrix via dense decomposition.
double spectral_norm_sym(const Matrix& m);

}  // namespace covsketch
