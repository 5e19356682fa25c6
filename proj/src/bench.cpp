#include "covsketch/bench.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <omp.h>

#include "covsketch/config.hpp"
#include "covsketch/errors.hpp"
#include "covsketch/kernels.hpp"
#include "covsketch/matrix_io.hpp"

namespace covsketch {

std::string solver_name(SolverKind s) {
  switch (s) {
    case SolverKind::kLowrank: return "lowrank";
    case SolverKind::kToeplitz: return "toeplitz";
    case SolverKind::kSparse: return "sparse";
    case SolverKind::kSparseRankone: return "sparse-rank1";
    case SolverKind::kPocs: return "pocs";
  }
  return "unknown";
}

SolverKind parse_solver(const std::string& name) {
  if (name == "lowrank") return SolverKind::kLowrank;
  if (name == "toeplitz") return SolverKind::kToeplitz;
  if (name == "sparse") return SolverKind::kSparse;
  if (name == "sparse-rank1" || name == "sparse_rankone") return SolverKind::kSparseRankone;
  if (name == "pocs") return SolverKind::kPocs;
  throw ConfigError("unknown solver '" + name + "'");
}

SolverKind default_solver(StructureClass cls) {
  switch (cls) {
    case StructureClass::kLowrankPsd: return SolverKind::kLowrank;
    case StructureClass::kToeplitzLowrank: return SolverKind::kToeplitz;
    case StructureClass::kSparsePsd:
    case StructureClass::kSparseSymmetric: return SolverKind::kSparse;
    case StructureClass::kSparseRankone: return SolverKind::kSparseRankone;
  }
  return SolverKind::kLowrank;
}

void ExperimentGrid::validate() const {
  if (n < 1) throw ConfigError("grid: n must be >= 1");
  if (params.empty() || m_values.empty() || sigmas.empty()) throw ConfigError("grid: empty parameter list");
  if (trials < 1) throw ConfigError("grid: trials must be >= 1");
  if (!(threshold > 0.0)) throw ConfigError("grid: threshold must be > 0");
  if (pocs_iters < 1) throw ConfigError("grid: pocs_iters must be >= 1");
  for (int m : m_values)
    if (m < 1) throw ConfigError("grid: m values must be >= 1");
  for (double s : sigmas)
    if (!(s >= 0.0)) throw ConfigError("grid: sigma values must be >= 0");
  for (int p : params)
    if (p < 1) throw ConfigError("grid: r/k values must be >= 1");
  solver_cfg.validate();
}

namespace {

std::vector<int> to_ints(const std::vector<long long>& v) { return {v.begin(), v.end()}; }

}  // namespace

ExperimentGrid ExperimentGrid::from_config(const ConfigMap& cfg) {
  ExperimentGrid g;
  g.structure = parse_structure(cfg.get_string("grid.structure"));
  g.solver = cfg.contains("grid.solver") ? parse_solver(cfg.get_string("grid.solver")) : default_solver(g.structure);
  g.n = static_cast<int>(cfg.get_int("grid.n"));
  if (cfg.contains("grid.r") && cfg.contains("grid.k")) throw ConfigError("grid: give either r or k, not both");
  if (cfg.contains("grid.r")) g.params = to_ints(cfg.get_ints("grid.r"));
  else g.params = to_ints(cfg.get_ints("grid.k"));
  g.m_values = to_ints(cfg.get_ints("grid.m"));
  g.sigmas = cfg.get_doubles("grid.sigma", std::vector<double>{0.0});
  g.trials = static_cast<int>(cfg.get_int("grid.trials", g.trials));
  g.threshold = cfg.get_double("grid.threshold", g.threshold);
  g.dist = Distribution::parse(cfg.get_string("grid.distribution", std::string("gaussian")));
  g.seed = static_cast<Seed>(cfg.get_int("grid.seed", 1));
  if (cfg.contains("grid.power_law")) g.power_law = cfg.get_double("grid.power_law");
  g.pocs_iters = static_cast<int>(cfg.get_int("grid.pocs_iters", g.pocs_iters));
  g.solver_cfg = SolverConfig::from_config(cfg, "solver.");
  g.lambda_inv_k = !g.solver_cfg.lambda.has_value();
  g.validate();
  return g;
}

Seed trial_seed(Seed base, int r_or_k, int m, double sigma, int trial) {
  return derive_seed(base, {std::uint64_t(r_or_k), std::uint64_t(m), std::bit_cast<std::uint64_t>(sigma),
                            std::uint64_t(trial)});
}

TrialRecord run_trial(const ExperimentGrid& grid, int r_or_k, int m, double sigma, int trial) {
  TrialRecord rec;
  rec.structure = structure_name(grid.structure);
  rec.solver = solver_name(grid.solver);
  rec.n = grid.n;
  rec.r_or_k = r_or_k;
  rec.m = m;
  rec.sigma = sigma;
  rec.trial_index = trial;
  rec.seed = trial_seed(grid.seed, r_or_k, m, sigma, trial);
  rec.nmse = std::numeric_limits<double>::quiet_NaN();

  const auto start = std::chrono::steady_clock::now();
  try {
    const StructuredTruth truth =
        generate(grid.structure, grid.n, r_or_k, derive_seed(rec.seed, Stream::kTruth), grid.power_law);
    const SensingEnsemble ens = SensingEnsemble::draw(grid.n, m, grid.dist, derive_seed(rec.seed, Stream::kEnsemble));
    const Vector clean = apply(ens, truth.matrix);
    const MeasurementSet meas = add_uniform_noise(clean, sigma, rec.seed);

    SolverConfig cfg = grid.solver_cfg;
    cfg.seed = derive_seed(rec.seed, Stream::kSolver);
    // sigma * U[-1, 1] noise: ||eta||_1 <= sigma m and ||eta||_2 <= sigma sqrt(m).
    cfg.epsilon = grid.solver == SolverKind::kToeplitz ? sigma * std::sqrt(double(m)) : meas.noise_level;
    if (grid.solver == SolverKind::kSparseRankone && !cfg.lambda && grid.lambda_inv_k) cfg.lambda = 1.0 / r_or_k;

    RecoveryResult res;
    switch (grid.solver) {
      case SolverKind::kLowrank: res = recover_lowrank(meas, ens, cfg); break;
      case SolverKind::kToeplitz: res = recover_toeplitz(meas, ens, cfg); break;
      case SolverKind::kSparse: res = recover_sparse(meas, ens, cfg); break;
      case SolverKind::kSparseRankone: res = recover_sparse_rankone(meas, ens, cfg); break;
      case SolverKind::kPocs:
        res = pocs(meas, ens, Matrix::Zero(grid.n, grid.n), grid.pocs_iters, nullptr, cfg.tol_primal);
        break;
    }
    rec.iterations = res.iterations;
    rec.nmse = nmse(res.estimate, truth.matrix);
    rec.success = std::sqrt(rec.nmse) < grid.threshold;
  } catch (const std::exception&) {
    rec.success = false;
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<TrialRecord> run_grid(const ExperimentGrid& grid, int threads) {
  grid.validate();
  struct Task {
    int param, m;
    double sigma;
    int trial;
  };
  std::vector<Task> tasks;
  for (int p : grid.params)
    for (int m : grid.m_values)
      for (double s : grid.sigmas)
        for (int t = 0; t < grid.trials; ++t) tasks.push_back({p, m, s, t});

  std::vector<TrialRecord> out(tasks.size());
  const int workers = threads > 0 ? threads : kernels::worker_count();
  // Trials are the unit of parallelism; kernels inside a trial stay serial.
  const int saved_max_active = omp_get_max_active_levels();
  omp_set_max_active_levels(1);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Task& t = tasks[i];
    out[i] = run_trial(grid, t.param, t.m, t.sigma, t.trial);
  }
  omp_set_max_active_levels(saved_max_active);
  return out;
}

long long info_limit(StructureClass cls, int n, int r_or_k) {
  const long long p = r_or_k;
  if (n < 1 || p < 1) throw ParameterError("info_limit: need n >= 1 and r/k >= 1");
  switch (cls) {
    case StructureClass::kLowrankPsd:
      if (p > n) throw ParameterError("info_limit: r must be <= n");
      return n * p - p * (p - 1) / 2;
    case StructureClass::kSparsePsd: {
      const auto s = static_cast<long long>(std::llround(std::sqrt(double(p))));
      if (s * s != p) throw ParameterError("info_limit: k must be a perfect square for sparse_psd");
      return s * (s + 1) / 2;
    }
    case StructureClass::kToeplitzLowrank: return 2 * p;
    case StructureClass::kSparseRankone: return p;
    case StructureClass::kSparseSymmetric: break;
  }
  throw ParameterError("info_limit: no degrees-of-freedom count for " + structure_name(cls));
}

// ---------------------------------------------------------------- CSV

namespace {

const char* kHeader = "structure,n,r_or_k,m,sigma,trial_index,seed,nmse,success,iterations";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_num(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw IoError("csv: bad number '" + s + "'");
  }
  if (pos != s.size()) throw IoError("csv: bad number '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw IoError("csv: bad integer '" + s + "'");
  }
  if (pos != s.size()) throw IoError("csv: bad integer '" + s + "'");
  return v;
}

std::string num(double v) { return std::isnan(v) ? std::string("nan") : format_double(v); }

}  // namespace

void emit_csv(std::ostream& out, const std::vector<TrialRecord>& records, const CsvOptions& opts) {
  out << kHeader << (opts.include_timing ? ",wall_ms" : "") << ",solver\n";
  for (const auto& r : records) {
    out << r.structure << ',' << r.n << ',' << r.r_or_k << ',' << r.m << ',' << num(r.sigma) << ','
        << r.trial_index << ',' << r.seed << ',' << num(r.nmse) << ',' << (r.success ? 1 : 0) << ','
        << r.iterations;
    if (opts.include_timing) out << ',' << num(r.wall_ms);
    out << ',' << r.solver << '\n';
  }
}

void emit_csv(const std::string& path, const std::vector<TrialRecord>& records, const CsvOptions& opts) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  emit_csv(f, records, opts);
  if (!f) throw IoError("write failed: " + path);
}

std::vector<TrialRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("csv: missing header");
  const auto header = split_csv(line);
  bool timing = false;
  if (header.size() == 12 && header[10] == "wall_ms") timing = true;
  else if (header.size() != 11) throw IoError("csv: unexpected header '" + line + "'");
  std::vector<TrialRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw IoError("csv: wrong field count in '" + line + "'");
    TrialRecord r;
    r.structure = f[0];
    r.n = static_cast<int>(parse_int(f[1]));
    r.r_or_k = static_cast<int>(parse_int(f[2]));
    r.m = static_cast<int>(parse_int(f[3]));
    r.sigma = parse_num(f[4]);
    r.trial_index = static_cast<int>(parse_int(f[5]));
    r.seed = std::stoull(f[6]);
    r.nmse = parse_num(f[7]);
    r.success = parse_int(f[8]) != 0;
    r.iterations = static_cast<int>(parse_int(f[9]));
    if (timing) r.wall_ms = parse_num(f[10]);
    r.solver = f[timing ? 11 : 10];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TrialRecord> parse_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return parse_csv(f);
}

// ---------------------------------------------------------------- Summary

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records) {
  std::vector<CellSummary> cells;
  std::vector<std::vector<double>> nmses;
  for (const auto& r : records) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const CellSummary& c) {
      return c.structure == r.structure && c.solver == r.solver && c.n == r.n && c.r_or_k == r.r_or_k &&
             c.m == r.m && c.sigma == r.sigma;
    });
    if (it == cells.end()) {
      CellSummary c;
      c.structure = r.structure;
      c.solver = r.solver;
      c.n = r.n;
      c.r_or_k = r.r_or_k;
      c.m = r.m;
      c.sigma = r.sigma;
      cells.push_back(c);
      nmses.emplace_back();
      it = cells.end() - 1;
    }
    const auto idx = std::size_t(it - cells.begin());
    it->trials += 1;
    it->successes += r.success ? 1 : 0;
    // A failed solve counts as NMSE = +inf for the median.
    nmses[idx].push_back(std::isnan(r.nmse) ? std::numeric_limits<double>::infinity() : r.nmse);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].success_rate = double(cells[i].successes) / double(cells[i].trials);
    cells[i].median_nmse = median(nmses[i]);
    cells[i].median_frob_error = std::sqrt(cells[i].median_nmse);
  }
  return cells;
}

void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells) {
  out << "structure,solver,n,r_or_k,m,sigma,trials,successes,success_rate,median_nmse,median_frob_error\n";
  for (const auto& c : cells)
    out << c.structure << ',' << c.solver << ',' << c.n << ',' << c.r_or_k << ',' << c.m << ',' << num(c.sigma)
        << ',' << c.trials << ',' << c.successes << ',' << num(c.success_rate) << ',' << num(c.median_nmse) << ','
        << num(c.median_frob_error) << '\n';
}

int threads_from_env() {
  if (const char* env = std::getenv("COVSKETCH_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return kernels::worker_count();
}

}  // namespace covsketch
