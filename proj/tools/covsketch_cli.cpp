// covsketch command-line driver.
//
// Exit codes: 0 success, 1 usage or input error, 2 numeric failure.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "covsketch/bench.hpp"
#include "covsketch/config.hpp"
#include "covsketch/errors.hpp"
#include "covsketch/kernels.hpp"
#include "covsketch/matrix_io.hpp"
#include "covsketch/rip_probe.hpp"
#include "covsketch/sensing.hpp"
#include "covsketch/solvers.hpp"
#include "covsketch/structures.hpp"

namespace cs = covsketch;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;

void print_map(const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) std::cout << k << '=' << v << '\n';
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string structure;
  int n = 0;
  int param = 0;
  cs::Seed seed = 1;
  std::optional<double> power_law;
  std::string out;
  std::string meta;
};

void run_gen(const GenArgs& a) {
  const auto truth = cs::generate(cs::parse_structure(a.structure), a.n, a.param, a.seed, a.power_law);
  if (a.out.empty()) {
    cs::write_matrix_csv(std::cout, truth.matrix);
    return;
  }
  cs::write_truth(a.out, a.meta.empty() ? a.out + ".meta" : a.meta, truth);
}

// ---------------------------------------------------------------- sketch

struct SketchArgs {
  std::string matrix;
  std::string stream;
  std::string ensemble_in;
  int m = 0;
  std::string dist = "gaussian";
  cs::Seed seed = 1;
  cs::Seed schedule_seed = 2;
  double noise = 0.0;
  std::string ensemble_out;
  std::string y_out;
};

void run_sketch(const SketchArgs& a) {
  if (a.matrix.empty() == a.stream.empty()) throw cs::ConfigError("sketch: give exactly one of --matrix or --stream");
  std::optional<cs::SensingEnsemble> ens;
  cs::Matrix input = a.matrix.empty() ? cs::load_matrix_csv(a.stream) : cs::load_matrix_csv(a.matrix);
  const int n = static_cast<int>(input.cols());
  if (!a.ensemble_in.empty()) {
    ens.emplace(cs::load_ensemble(a.ensemble_in));
    if (ens->n() != n) throw cs::ShapeError("sketch: ensemble dimension does not match the input");
  } else {
    if (a.m < 1) throw cs::ConfigError("sketch: --m is required without --ensemble-in");
    ens.emplace(cs::SensingEnsemble::draw(n, a.m, cs::Distribution::parse(a.dist), a.seed));
  }

  cs::MeasurementSet meas;
  if (!a.matrix.empty()) {
    if (input.rows() != input.cols()) throw cs::ShapeError("sketch: --matrix must be square");
    if (!cs::is_symmetric(input)) throw cs::ShapeError("sketch: --matrix must be symmetric");
    meas = cs::add_uniform_noise(cs::apply(*ens, input), a.noise, cs::derive_seed(a.seed, cs::Stream::kNoise));
  } else {
    const cs::RowMatrix rows = input;
    auto res = cs::sketch_stream(rows, *ens, a.schedule_seed);
    meas = res.measurements;
    const auto missing = res.schedule.unassigned();
    std::cout << "samples=" << rows.rows() << '\n' << "unassigned=" << missing.size() << '\n';
    if (!missing.empty()) cs::warn("sketch: some indices received no samples; their entries are NaN");
  }

  if (!a.ensemble_out.empty()) cs::save_ensemble(a.ensemble_out, *ens);
  if (a.y_out.empty()) {
    for (Eigen::Index i = 0; i < meas.y.size(); ++i) std::cout << cs::format_double(meas.y(i)) << '\n';
  } else {
    cs::save_vector_csv(a.y_out, meas.y);
  }
  std::cout << "n=" << ens->n() << '\n'
            << "m=" << ens->m() << '\n'
            << "noise=" << cs::noise_kind_name(meas.noise_kind) << '\n'
            << "epsilon=" << cs::format_double(meas.noise_level) << '\n';
}

// ---------------------------------------------------------------- recover

struct RecoverArgs {
  std::string ensemble;
  std::string y;
  std::string structure = "lowrank";
  std::optional<double> epsilon;
  std::optional<double> lambda;
  bool no_psd = false;
  std::optional<int> max_iter;
  std::optional<cs::Seed> seed;
  std::optional<double> penalty;
  std::optional<double> tol;
  int iters = 2000;
  std::string config;
  std::string out;
  std::string truth;
  std::string extract;
};

int run_recover(const RecoverArgs& a) {
  const cs::SensingEnsemble ens = cs::load_ensemble(a.ensemble);
  cs::MeasurementSet meas;
  meas.y = cs::load_vector_csv(a.y);
  if (meas.y.size() != ens.m()) throw cs::ShapeError("recover: y length does not match the ensemble");

  cs::SolverConfig cfg =
      a.config.empty() ? cs::SolverConfig{} : cs::SolverConfig::from_config(cs::ConfigMap::load(a.config));
  if (a.epsilon) cfg.epsilon = *a.epsilon;
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.no_psd) cfg.psd_constraint = false;
  if (a.max_iter) cfg.max_iter = *a.max_iter;
  if (a.seed) cfg.seed = *a.seed;
  if (a.penalty) cfg.penalty = *a.penalty;
  if (a.tol) cfg.tol_primal = cfg.tol_dual = *a.tol;
  cfg.validate();
  if (cfg.epsilon > 0.0) {
    meas.noise_kind = a.structure == "toeplitz" ? cs::NoiseKind::kL2Bounded : cs::NoiseKind::kL1Bounded;
    meas.noise_level = cfg.epsilon;
  }

  std::optional<cs::Matrix> truth;
  if (!a.truth.empty()) truth = cs::load_matrix_csv(a.truth);

  cs::RecoveryResult res;
  switch (cs::parse_solver(a.structure)) {
    case cs::SolverKind::kLowrank: res = cs::recover_lowrank(meas, ens, cfg); break;
    case cs::SolverKind::kToeplitz: res = cs::recover_toeplitz(meas, ens, cfg); break;
    case cs::SolverKind::kSparse: res = cs::recover_sparse(meas, ens, cfg); break;
    case cs::SolverKind::kSparseRankone: res = cs::recover_sparse_rankone(meas, ens, cfg); break;
    case cs::SolverKind::kPocs:
      res = cs::pocs(meas, ens, cs::Matrix::Zero(ens.n(), ens.n()), a.iters, truth ? &*truth : nullptr, cfg.tol_primal);
      break;
  }

  if (a.out.empty()) cs::write_matrix_csv(std::cout, res.estimate);
  else cs::save_matrix_csv(a.out, res.estimate);
  print_map(res.diagnostics());
  if (truth) std::cout << "nmse=" << cs::format_double(cs::nmse(res.estimate, *truth)) << '\n';
  if (!a.extract.empty()) {
    const auto sig = cs::extract_signal(res.estimate);
    cs::save_vector_csv(a.extract, sig.x);
    std::cout << "lambda1=" << cs::format_double(sig.lambda1) << '\n';
  }
  // POCS runs a fixed iteration budget; only the ADMM programs report convergence.
  if (!res.converged && a.structure != "pocs") {
    std::cerr << "covsketch: solver did not reach tolerance in " << res.iterations << " iterations\n";
    return kExitNumeric;
  }
  return 0;
}

// ---------------------------------------------------------------- phase

struct PhaseArgs {
  std::string config;
  std::string out;
  std::string summary;
  int threads = 0;
  bool timing = false;
};

void run_phase(const PhaseArgs& a) {
  const auto grid = cs::ExperimentGrid::from_config(cs::ConfigMap::load(a.config));
  const int threads = a.threads > 0 ? a.threads : cs::threads_from_env();
  const auto records = cs::run_grid(grid, threads);
  cs::CsvOptions opts;
  opts.include_timing = a.timing;
  if (a.out.empty()) cs::emit_csv(std::cout, records, opts);
  else cs::emit_csv(a.out, records, opts);
  const auto cells = cs::summarize(records);
  if (!a.summary.empty()) {
    std::ofstream f(a.summary);
    if (!f) throw cs::IoError("cannot open " + a.summary);
    cs::write_summary_csv(f, cells);
  } else if (!a.out.empty()) {
    cs::write_summary_csv(std::cout, cells);
  }
}

// ---------------------------------------------------------------- rip

struct RipArgs {
  std::string mode = "l2l1";
  std::string cls = "rank";
  int n = 20;
  int m = 500;
  int r = 2;
  int k = 10;
  int l = 0;
  int trials = 100;
  long long samples = 100000;
  std::string dist = "gaussian";
  cs::Seed seed = 1;
  bool fresh = false;
  std::string out;
};

void run_rip(const RipArgs& a) {
  const auto dist = cs::Distribution::parse(a.dist);
  const int n = a.n;
  const int m = a.m;
  cs::EnsembleFactory factory = [n, m, dist](cs::Seed s) { return cs::SensingEnsemble::draw(n, m, dist, s); };

  auto emit = [&](const cs::RipEstimate& est) {
    if (!a.out.empty()) {
      std::ofstream f(a.out);
      if (!f) throw cs::IoError("cannot open " + a.out);
      cs::write_rip_csv(f, est);
    }
    cs::write_rip_summary(std::cout, est);
  };

  if (a.mode == "l2l1") {
    cs::ClassSampler sampler;
    if (a.cls == "rank") sampler = cs::rank_sampler(n, a.r);
    else if (a.cls == "sparse") sampler = cs::sparse_sampler(n, a.k);
    else if (a.cls == "lowrank_sparse") sampler = cs::lowrank_plus_sparse_sampler(n, a.k, a.r, a.l);
    else throw cs::ConfigError("rip: unknown class '" + a.cls + "'");
    emit(cs::estimate_rip(factory, sampler, a.trials, a.fresh, a.seed, a.cls));
  } else if (a.mode == "toeplitz-l2") {
    emit(cs::rip_l2l2_toeplitz(factory, cs::toeplitz_sampler(n, a.r), a.trials, a.fresh, a.seed));
  } else if (a.mode == "isotropy") {
    const cs::Matrix x = cs::gen_toeplitz_lowrank(n, a.r, cs::derive_seed(a.seed, cs::Stream::kTruth)).matrix;
    const double dev = cs::isotropy_deviation(dist, n, a.samples, x, a.seed);
    std::cout << "n=" << n << "\nsamples=" << a.samples << "\ndeviation=" << cs::format_double(dev) << '\n';
  } else if (a.mode == "tnorm") {
    const auto st = cs::toeplitz_norm_stats(dist, n, a.trials, a.seed);
    std::cout << "n=" << n << "\ntrials=" << a.trials << "\nmax_ratio=" << cs::format_double(st.max_ratio)
              << "\nbound_dominates=" << (st.bound_dominates ? "true" : "false") << '\n';
  } else if (a.mode == "l1l1") {
    const auto ens = cs::SensingEnsemble::draw(n, m, dist, a.seed);
    std::cout << "r=" << a.r << "\nratio=" << cs::format_double(cs::l1l1_failure_ratio(ens, a.r)) << '\n';
  } else {
    throw cs::ConfigError("rip: unknown mode '" + a.mode + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadratic sketching and structured covariance recovery"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker count (overrides COVSKETCH_THREADS)");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a structured ground-truth matrix");
  g->add_option("--structure", gen.structure, "lowrank_psd|toeplitz_lowrank|sparse_psd|sparse_symmetric|sparse_rankone")
      ->required();
  g->add_option("--n", gen.n, "Dimension")->required();
  g->add_option("--param", gen.param, "Rank r or sparsity k")->required();
  g->add_option("--seed", gen.seed, "Seed");
  g->add_option("--power-law", gen.power_law, "Power-law exponent for sparse_rankone (> 1)");
  g->add_option("--out", gen.out, "Matrix CSV (default: stdout)");
  g->add_option("--meta", gen.meta, "Metadata sidecar (default: <out>.meta)");

  SketchArgs sk;
  auto* s = app.add_subcommand("sketch", "Draw an ensemble and measure a matrix or a sample stream");
  s->add_option("--matrix", sk.matrix, "Symmetric matrix CSV");
  s->add_option("--stream", sk.stream, "Sample stream CSV, one sample per row");
  s->add_option("--ensemble-in", sk.ensemble_in, "Reuse an existing ensemble");
  s->add_option("--m", sk.m, "Number of measurements");
  s->add_option("--dist", sk.dist, "gaussian|rademacher|uniform_scaled");
  s->add_option("--seed", sk.seed, "Ensemble seed");
  s->add_option("--schedule-seed", sk.schedule_seed, "Stream assignment seed");
  s->add_option("--noise", sk.noise, "Uniform noise level sigma (matrix input only)");
  s->add_option("--ensemble-out", sk.ensemble_out, "Write the ensemble (binary)");
  s->add_option("--y-out", sk.y_out, "Write measurements (CSV)");

  RecoverArgs rc;
  auto* r = app.add_subcommand("recover", "Recover a structured matrix from measurements");
  r->add_option("--ensemble", rc.ensemble, "Ensemble file")->required();
  r->add_option("--y", rc.y, "Measurements CSV")->required();
  r->add_option("--structure", rc.structure, "lowrank|toeplitz|sparse|sparse-rank1|pocs")
      ->check(CLI::IsMember({"lowrank", "toeplitz", "sparse", "sparse-rank1", "pocs"}));
  r->add_option("--epsilon", rc.epsilon, "Data-fit radius");
  r->add_option("--lambda", rc.lambda, "l1 weight (sparse-rank1)");
  r->add_flag("--no-psd", rc.no_psd, "Drop the PSD constraint");
  r->add_option("--max-iter", rc.max_iter, "Iteration cap");
  r->add_option("--seed", rc.seed, "Solver seed");
  r->add_option("--penalty", rc.penalty, "Initial ADMM penalty");
  r->add_option("--tol", rc.tol, "Relative residual tolerance");
  r->add_option("--iters", rc.iters, "POCS iterations");
  r->add_option("--config", rc.config, "Config file with [solver] keys");
  r->add_option("--out", rc.out, "Estimate CSV (default: stdout)");
  r->add_option("--truth", rc.truth, "Truth CSV; reports NMSE");
  r->add_option("--extract", rc.extract, "Write the top-eigenvector signal estimate");

  PhaseArgs ph;
  auto* p = app.add_subcommand("phase", "Run an experiment grid from a config file");
  p->add_option("--config", ph.config, "Grid config")->required();
  p->add_option("--out", ph.out, "Trial CSV (default: stdout)");
  p->add_option("--summary", ph.summary, "Per-cell summary CSV");
  p->add_flag("--timing", ph.timing, "Include the wall_ms column");

  RipArgs rp;
  auto* q = app.add_subcommand("rip", "Monte Carlo RIP and isotropy probes");
  q->add_option("--mode", rp.mode, "l2l1|toeplitz-l2|isotropy|tnorm|l1l1")
      ->check(CLI::IsMember({"l2l1", "toeplitz-l2", "isotropy", "tnorm", "l1l1"}));
  q->add_option("--class", rp.cls, "rank|sparse|lowrank_sparse (l2l1 mode)");
  q->add_option("--n", rp.n, "Dimension");
  q->add_option("--m", rp.m, "Measurements");
  q->add_option("--r", rp.r, "Rank");
  q->add_option("--k", rp.k, "Sparsity or block size");
  q->add_option("--l", rp.l, "Sparse part size (lowrank_sparse)");
  q->add_option("--trials", rp.trials, "Probe count");
  q->add_option("--samples", rp.samples, "Monte Carlo groups (isotropy)");
  q->add_option("--dist", rp.dist, "gaussian|rademacher|uniform_scaled");
  q->add_option("--seed", rp.seed, "Seed");
  q->add_flag("--fresh", rp.fresh, "Draw a new ensemble per probe");
  q->add_option("--out", rp.out, "Per-trial CSV");

  std::string lim_structure;
  int lim_n = 0;
  int lim_param = 0;
  auto* l = app.add_subcommand("limits", "Information-theoretic measurement count");
  l->add_option("--structure", lim_structure, "Structure class")->required();
  l->add_option("--n", lim_n, "Dimension");
  l->add_option("--param", lim_param, "Rank r or sparsity k")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  cs::set_warning_handler([](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; });
  cs::kernels::set_worker_count(threads > 0 ? threads : cs::threads_from_env());
  if (threads > 0) ph.threads = threads;

  try {
    if (*g) run_gen(gen);
    else if (*s) run_sketch(sk);
    else if (*r) return run_recover(rc);
    else if (*p) run_phase(ph);
    else if (*q) run_rip(rp);
    else if (*l) {
      std::cout << cs::info_limit(cs::parse_structure(lim_structure), lim_n > 0 ? lim_n : lim_param, lim_param)
                << '\n';
    }
  } catch (const cs::NumericError& e) {
    std::cerr << "covsketch: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const cs::UndefinedMetricError& e) {
    std::cerr << "covsketch: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "covsketch: " << e.what() << '\n';
    return kExitUsage;
  }
  return 0;
}
