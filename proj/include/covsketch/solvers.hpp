#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "covsketch/linalg.hpp"
#include "covsketch/projections.hpp"
#include "covsketch/rng.hpp"
#include "covsketch/sensing.hpp"

namespace covsketch {

class ConfigMap;

struct SolverConfig {
  double penalty = 1.0;   // initial ADMM coupling weight, adapted by residual balancing
  int max_iter = 20000;
  double tol_primal = 1e-7;
  double tol_dual = 1e-7;
  double epsilon = 0.0;   // radius of the data-fit ball; 0 means exact consistency
  std::optional<double> lambda;  // l1 weight of the sparse rank-one program
  bool psd_constraint = true;
  Seed seed = 0;

  // Throws ParameterError on out-of-range fields.
  void validate() const;

  // Reads the `solver.*` keys (penalty, max_iter, tol_primal, tol_dual,
  // epsilon, lambda, psd, seed); missing keys keep their defaults.
  static SolverConfig from_config(const ConfigMap& cfg, const std::string& prefix = "solver.");
};

struct RecoveryResult {
  Matrix estimate;
  int iterations = 0;
  // Relative residuals of the normalized problem; see README for the scaling.
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = false;
  double objective = 0.0;
  // POCS only: NMSE after every iteration when a truth was supplied.
  std::vector<double> trajectory;

  std::map<std::string, std::string> diagnostics() const;
};

// min tr(M) s.t. M PSD, ||y - A(M)||_1 <= epsilon. With psd_constraint off
// the objective becomes the nuclear norm over symmetric M.
RecoveryResult recover_lowrank(const MeasurementSet& meas, const SensingEnsemble& ens, const SolverConfig& cfg);

// min tr(M) s.t. M PSD and Toeplitz, ||y - A(M)||_2 <= epsilon. The estimate
// is exactly Toeplitz.
RecoveryResult recover_toeplitz(const MeasurementSet& meas, const SensingEnsemble& ens, const SolverConfig& cfg);

// min ||M||_1 s.t. (M PSD), ||y - A(M)||_1 <= epsilon.
RecoveryResult recover_sparse(const MeasurementSet& meas, const SensingEnsemble& ens, const SolverConfig& cfg);

// min tr(M) + lambda ||M||_1 s.t. M PSD, ||y - A(M)||_1 <= epsilon.
// lambda defaults to 1/sqrt(n) when the config leaves it unset.
RecoveryResult recover_sparse_rankone(const MeasurementSet& meas, const SensingEnsemble& ens,
                                      const SolverConfig& cfg);

// Alternating projection between {M : A(M) = y} and the PSD cone. Throws
// RankDeficiencyError when A A* is not invertible.
RecoveryResult pocs(const MeasurementSet& meas, const SensingEnsemble& ens, const Matrix& init, int iters,
                    const Matrix* truth = nullptr, double tol = 1e-7);

struct ExtractedSignal {
  Vector x;                   // sqrt(lambda_1) v_1, largest-magnitude entry positive
  double lambda1 = 0.0;
  std::optional<double> sin_angle;          // vs the supplied truth
  std::optional<double> davis_kahan_bound;  // ||X - x x^T||_F / ||x||_2^2
  bool bound_holds() const { return !sin_angle || *sin_angle <= *davis_kahan_bound + 1e-12; }
};

// Top eigenpair extraction. Throws DegenerateInputError when lambda_1 <= 0.
ExtractedSignal extract_signal(const Matrix& x, const Vector* truth = nullptr);

double sin_angle(const Vector& a, const Vector& b);

}  // namespace covsketch
