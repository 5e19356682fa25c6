#pragma once

// Inner loops of the quadratic sensing operator. Each kernel has an
// OpenMP version and a plain serial reference kept for testing and
// benchmarking. Both compute every output element with the same
// summation order, so results do not depend on the worker count.

#include "covsketch/linalg.hpp"

namespace covsketch::kernels {

// out_i = a_i^T M a_i for every row a_i of A.
Vector quad_forms(const RowMatrix& a, const Matrix& m);
Vector quad_forms_serial(const RowMatrix& a, const Matrix& m);

// sum_i v_i a_i a_i^T.
Matrix weighted_outer_sum(const RowMatrix& a, const Vector& v);
Matrix weighted_outer_sum_serial(const RowMatrix& a, const Vector& v);

// G_ij = (a_i^T a_j)^2.
Matrix squared_gram(const RowMatrix& a);
Matrix squared_gram_serial(const RowMatrix& a);

// Number of OpenMP workers the parallel kernels will use.
int worker_count();
void set_worker_count(int threads);

}  // namespace covsketch::kernels
