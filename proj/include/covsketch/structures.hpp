#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covsketch/linalg.hpp"
#include "covsketch/rng.hpp"

namespace covsketch {

enum class StructureClass {
  kLowrankPsd,
  kToeplitzLowrank,
  kSparsePsd,
  kSparseSymmetric,
  kSparseRankone,
};

std::string structure_name(StructureClass c);
StructureClass parse_structure(std::string_view name);

// Line spectrum of a real PSD Toeplitz matrix: T_k = sum_j amp_j cos(2 pi f_j k).
struct ToeplitzSpec {
  std::vector<double> frequencies;  // in (0, 1/2)
  std::vector<double> amplitudes;   // > 0

  Matrix build(int n) const;
};

struct StructuredTruth {
  Matrix matrix;
  StructureClass cls = StructureClass::kLowrankPsd;
  int rank = 0;          // r for the low-rank classes, 1 for sparse_rankone
  int sparsity = 0;      // k for the sparse classes
  std::optional<double> power_law;
  ToeplitzSpec spectrum;  // toeplitz_lowrank only
  Vector signal;          // sparse_rankone only: x with matrix = x x^T
  Seed seed = 0;

  // Sidecar metadata as key=value lines.
  std::map<std::string, std::string> metadata() const;
};

StructuredTruth gen_lowrank_psd(int n, int r, Seed seed);
StructuredTruth gen_toeplitz_lowrank(int n, int r, Seed seed);
StructuredTruth gen_sparse_psd(int n, int k, Seed seed);
StructuredTruth gen_sparse_symmetric(int n, int k, Seed seed);
StructuredTruth gen_sparse_rankone(int n, int k, std::optional<double> power_law, Seed seed);

// Dispatch on class; `param` is r or k.
StructuredTruth generate(StructureClass cls, int n, int param, Seed seed,
                         std::optional<double> power_law = std::nullopt);

// Count of singular values above rel_tol * sigma_1.
int numerical_rank(const Matrix& m, double rel_tol = 1e-8);
Eigen::Index count_nonzeros(const Matrix& m);

// Orthogonal projection onto Toeplitz matrices: each diagonal replaced by its mean.
Matrix toeplitz_project(const Matrix& m);
bool is_toeplitz(const Matrix& m, double abs_tol = 1e-12);
// First column of a symmetric Toeplitz matrix.
Vector toeplitz_coefficients(const Matrix& t);
Matrix toeplitz_from_coefficients(const Vector& c);

Matrix best_rank_r(const Matrix& m, int r);
// Keep the k largest-magnitude entries; ties go to the earlier row-major index.
Matrix best_k_term(const Matrix& m, int k);

struct CirculantBound {
  double bound = 0.0;
  std::vector<double> eigenvalues;  // the 2n-1 circulant eigenvalues
};

// Spectral-norm upper bound for symmetric Toeplitz T from its (2n-1)
// circulant embedding. Throws StructureError for non-Toeplitz input.
CirculantBound circulant_norm_bound(const Matrix& t);

// ||est - truth||_F^2 / ||truth||_F^2.
double nmse(const Matrix& est, const Matrix& truth);

// CSV interop with the sidecar key=value block.
void write_truth(const std::string& matrix_path, const std::string& meta_path, const StructuredTruth& t);

}  // namespace covsketch
