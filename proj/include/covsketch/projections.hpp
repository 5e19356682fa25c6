#pragma once

#include "covsketch/linalg.hpp"

namespace covsketch {

// Negative eigenvalues clipped to zero.
Matrix project_psd(const Matrix& m);

// Euclidean projection onto {x : ||x||_1 <= radius} (sort-and-threshold).
Vector project_l1_ball(const Vector& v, double radius);

// Radial scaling onto {x : ||x||_2 <= radius}.
Vector project_l2_ball(const Vector& v, double radius);

// Entrywise sign(x) max(|x| - tau, 0).
Matrix soft_threshold(const Matrix& m, double tau);

// prox of tau * tr(.) + indicator(PSD): eigenvalues shifted by -tau, then clipped.
Matrix prox_trace_psd(const Matrix& m, double tau);

// prox of tau * ||.||_*: eigenvalues soft-thresholded (symmetric input).
Matrix prox_nuclear(const Matrix& m, double tau);

}  // namespace covsketch
