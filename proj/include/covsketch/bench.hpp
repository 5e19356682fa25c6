#pragma once

// Phase-transition and NMSE-vs-m grids. Each cell (structure, n, r or k, m,
// sigma) runs a fixed number of independent trials; a trial succeeds when
// sqrt(NMSE) falls below the grid threshold.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "covsketch/rng.hpp"
#include "covsketch/sensing.hpp"
#include "covsketch/solvers.hpp"
#include "covsketch/structures.hpp"

namespace covsketch {

class ConfigMap;

enum class SolverKind { kLowrank, kToeplitz, kSparse, kSparseRankone, kPocs };
std::string solver_name(SolverKind s);
// Accepts lowrank, toeplitz, sparse, sparse-rank1 (or sparse_rankone) and pocs.
SolverKind parse_solver(const std::string& name);
// The program matching a structure class.
SolverKind default_solver(StructureClass cls);

struct ExperimentGrid {
  StructureClass structure = StructureClass::kLowrankPsd;
  SolverKind solver = SolverKind::kLowrank;
  int n = 20;
  std::vector<int> params{2};  // r or k
  std::vector<int> m_values{160};
  std::vector<double> sigmas{0.0};
  int trials = 20;
  double threshold = 1e-3;  // on sqrt(NMSE)
  Distribution dist;
  Seed seed = 1;
  std::optional<double> power_law;  // sparse_rankone truths
  // sparse_rankone weight: fixed value, or 1/k when unset and lambda_inv_k.
  bool lambda_inv_k = true;
  int pocs_iters = 2000;
  SolverConfig solver_cfg;

  void validate() const;
  // Keys under [grid] and [solver]; see configs/ for examples.
  static ExperimentGrid from_config(const ConfigMap& cfg);
};

struct TrialRecord {
  std::string structure;
  int n = 0;
  int r_or_k = 0;
  int m = 0;
  double sigma = 0.0;
  int trial_index = 0;
  Seed seed = 0;
  double nmse = 0.0;  // NaN when the solver threw
  bool success = false;
  int iterations = 0;
  double wall_ms = 0.0;
  std::string solver;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

// Seed of one trial; depends only on the cell coordinates and trial index.
Seed trial_seed(Seed base, int r_or_k, int m, double sigma, int trial);

// One instance: truth, ensemble, (noisy) measurements, solver, NMSE.
TrialRecord run_trial(const ExperimentGrid& grid, int r_or_k, int m, double sigma, int trial);

// All cells x trials in canonical order (param, m, sigma, trial). Solver
// failures are recorded, never propagated. threads <= 0 keeps the current
// worker count.
std::vector<TrialRecord> run_grid(const ExperimentGrid& grid, int threads = 0);

// Degrees of freedom of the structure class; a trial below this m cannot
// identify the truth.
long long info_limit(StructureClass cls, int n, int r_or_k);

struct CsvOptions {
  // Wall-clock times differ between runs; leave them out for byte-identical output.
  bool include_timing = false;
};

void emit_csv(std::ostream& out, const std::vector<TrialRecord>& records, const CsvOptions& opts = {});
void emit_csv(const std::string& path, const std::vector<TrialRecord>& records, const CsvOptions& opts = {});
// Accepts files written with or without the timing column.
std::vector<TrialRecord> parse_csv(std::istream& in);
std::vector<TrialRecord> parse_csv(const std::string& path);

struct CellSummary {
  std::string structure;
  std::string solver;
  int n = 0;
  int r_or_k = 0;
  int m = 0;
  double sigma = 0.0;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double median_nmse = 0.0;
  double median_frob_error = 0.0;  // median of sqrt(NMSE)
};

// One row per cell, in order of first appearance.
std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records);
void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells);

// COVSKETCH_THREADS if set and positive, else the OpenMP default.
int threads_from_env();

}  // namespace covsketch
