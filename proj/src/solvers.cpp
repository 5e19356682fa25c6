#include "covsketch/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "covsketch/config.hpp"
#include "covsketch/errors.hpp"
#include "covsketch/matrix_io.hpp"
#include "covsketch/structures.hpp"

namespace covsketch {

void SolverConfig::validate() const {
  if (!(penalty > 0.0)) throw ParameterError("solver: penalty must be > 0");
  if (max_iter < 1) throw ParameterError("solver: max_iter must be >= 1");
  if (!(tol_primal > 0.0) || !(tol_dual > 0.0)) throw ParameterError("solver: tolerances must be > 0");
  if (!(epsilon >= 0.0)) throw ParameterError("solver: epsilon must be >= 0");
  if (lambda && !(*lambda >= 0.0)) throw ParameterError("solver: lambda must be >= 0");
}

SolverConfig SolverConfig::from_config(const ConfigMap& cfg, const std::string& prefix) {
  SolverConfig out;
  out.penalty = cfg.get_double(prefix + "penalty", out.penalty);
  out.max_iter = static_cast<int>(cfg.get_int(prefix + "max_iter", out.max_iter));
  out.tol_primal = cfg.get_double(prefix + "tol_primal", out.tol_primal);
  out.tol_dual = cfg.get_double(prefix + "tol_dual", out.tol_dual);
  out.epsilon = cfg.get_double(prefix + "epsilon", out.epsilon);
  if (cfg.contains(prefix + "lambda")) out.lambda = cfg.get_double(prefix + "lambda");
  out.psd_constraint = cfg.get_bool(prefix + "psd", out.psd_constraint);
  out.seed = static_cast<Seed>(cfg.get_int(prefix + "seed", 0));
  out.validate();
  return out;
}

std::map<std::string, std::string> RecoveryResult::diagnostics() const {
  return {
      {"iterations", std::to_string(iterations)},
      {"primal_residual", format_double(primal_residual)},
      {"dual_residual", format_double(dual_residual)},
      {"converged", converged ? "true" : "false"},
      {"objective", format_double(objective)},
  };
}

namespace {

enum class Prox { kTracePsd, kPsd, kNuclear, kL1 };
enum class Ball { kL1, kL2 };

struct BlockSpec {
  Prox prox;
  double weight;
};

struct Program {
  std::vector<BlockSpec> blocks;
  Ball ball = Ball::kL1;
  bool toeplitz = false;
  // Block whose iterate is returned; -1 returns the consensus variable X.
  int estimate_block = 0;
};

Matrix apply_prox(Prox prox, const Matrix& v, double tau) {
  switch (prox) {
    case Prox::kTracePsd: return prox_trace_psd(v, tau);
    case Prox::kPsd: return project_psd(v);
    case Prox::kNuclear: return prox_nuclear(v, tau);
    case Prox::kL1: return soft_threshold(v, tau);
  }
  return v;
}

double objective_value(const Program& prog, const Matrix& m) {
  double obj = 0.0;
  for (const auto& b : prog.blocks) {
    switch (b.prox) {
      case Prox::kTracePsd: obj += b.weight * m.trace(); break;
      case Prox::kNuclear: {
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m), Eigen::EigenvaluesOnly);
        obj += b.weight * eig.eigenvalues().cwiseAbs().sum();
        break;
      }
      case Prox::kL1: obj += b.weight * m.cwiseAbs().sum(); break;
      case Prox::kPsd: break;
    }
  }
  return obj;
}

// Normalized measurement operator restricted to the program's subspace
// (all symmetric matrices, or symmetric Toeplitz matrices), with the
// factorization needed by the consensus X-update
//   argmin_X  J/2 ||X - V/J||^2 + 1/2 ||A X - b||^2.
class SubspaceOperator {
 public:
  SubspaceOperator(const SensingEnsemble& ens, bool toeplitz, int blocks)
      : ens_(ens), toeplitz_(toeplitz), blocks_(blocks) {
    const int n = ens.n(), m = ens.m();
    const RowMatrix& a = ens.vectors();
    const Vector sq_norms = a.rowwise().squaredNorm();
    const double dim = 0.5 * double(n) * double(n + 1);
    scale_ = std::sqrt(sq_norms.array().square().sum() / dim);
    if (!(scale_ > 0.0)) throw DegenerateInputError("sensing ensemble is identically zero");
    if (toeplitz_) {
      // Column k holds the coefficient of t_k in a_i^T T(t) a_i.
      phi_.resize(m, n);
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < n; ++k) {
          double acc = 0.0;
          for (int j = 0; j + k < n; ++j) acc += a(i, j) * a(i, j + k);
          phi_(i, k) = (k == 0 ? acc : 2.0 * acc) / scale_;
        }
      weights_.resize(n);
      for (int k = 0; k < n; ++k) weights_(k) = k == 0 ? double(n) : 2.0 * double(n - k);
      Matrix sys = phi_.transpose() * phi_;
      sys.diagonal() += double(blocks_) * weights_;
      toeplitz_chol_.compute(sys);
      if (toeplitz_chol_.info() != Eigen::Success) throw NumericError("Toeplitz normal equations not PD");
    } else {
      gram_ = gram_matrix(ens) / (scale_ * scale_);
      Matrix sys = gram_;
      sys.diagonal().array() += double(blocks_);
      chol_.compute(sys);
      if (chol_.info() != Eigen::Success) throw NumericError("consensus system not PD");
    }
  }

  double scale() const { return scale_; }

  Vector apply(const Matrix& x) const {
    if (toeplitz_) return phi_ * toeplitz_coefficients(x);
    return covsketch::apply(ens_, x) / scale_;
  }

  // Adjoint restricted to the subspace.
  Matrix adjoint(const Vector& v) const {
    Matrix full = covsketch::adjoint(ens_, v) / scale_;
    return toeplitz_ ? toeplitz_project(full) : full;
  }

  Matrix project(const Matrix& x) const { return toeplitz_ ? toeplitz_project(x) : x; }

  // Solves the X-update given V = sum_j (Z_j - U_j) and b; also returns A X.
  void solve(const Matrix& v, const Vector& b, Matrix& x, Vector& ax) const {
    const double j = double(blocks_);
    if (toeplitz_) {
      const int n = ens_.n();
      Vector rhs = phi_.transpose() * b;
      for (int k = 0; k < n; ++k) {
        double diag_sum = 0.0;
        for (int i = 0; i + k < n; ++i) diag_sum += v(i + k, i) + (k == 0 ? 0.0 : v(i, i + k));
        rhs(k) += diag_sum;
      }
      const Vector t = toeplitz_chol_.solve(rhs);
      x = toeplitz_from_coefficients(t);
      ax = phi_ * t;
      return;
    }
    // Woodbury: (J I + A*A)^{-1} R = (R - A*((J I + G)^{-1} A R)) / J with
    // R = V + A* b, so A R = A V + G b and X = (V + A*(b - K^{-1} A R)) / J.
    const Vector av = apply(v);
    const Vector ar = av + gram_ * b;
    const Vector c = b - chol_.solve(ar);
    x = (v + covsketch::adjoint(ens_, c) / scale_) / j;
    ax = (av + gram_ * c) / j;
  }

 private:
  const SensingEnsemble& ens_;
  bool toeplitz_;
  int blocks_;
  double scale_ = 1.0;
  Matrix gram_;
  Eigen::LLT<Matrix> chol_;
  Matrix phi_;
  Vector weights_;
  Eigen::LLT<Matrix> toeplitz_chol_;
};

double ball_norm(Ball ball, const Vector& v) { return ball == Ball::kL1 ? v.lpNorm<1>() : v.norm(); }

Vector project_ball(Ball ball, const Vector& v, double radius) {
  return ball == Ball::kL1 ? project_l1_ball(v, radius) : project_l2_ball(v, radius);
}

RecoveryResult solve_admm(const Program& prog, const MeasurementSet& meas, const SensingEnsemble& ens,
                          const SolverConfig& cfg) {
  cfg.validate();
  if (meas.y.size() != ens.m())
    throw ShapeError("measurement vector length " + std::to_string(meas.y.size()) + " != m = " +
                     std::to_string(ens.m()));
  if (!meas.y.allFinite()) throw ParameterError("measurements contain non-finite values");
  const int n = ens.n(), m = ens.m();
  const bool noiseless = cfg.epsilon == 0.0;

  RecoveryResult result;
  // Every objective is nonnegative and vanishes at 0, so 0 is optimal
  // whenever it is feasible.
  if (ball_norm(prog.ball, meas.y) <= cfg.epsilon) {
    result.estimate = Matrix::Zero(n, n);
    result.converged = true;
    return result;
  }

  const int nblocks = static_cast<int>(prog.blocks.size());
  const SubspaceOperator op(ens, prog.toeplitz, nblocks);
  // Solve for X / data_scale with the operator divided by op.scale(): the
  // iteration is then invariant to rescaling y and epsilon together.
  const double data_scale = meas.y.lpNorm<1>() / double(m);
  const double norm_factor = data_scale * op.scale();
  const Vector y = meas.y / norm_factor;
  const double eps = cfg.epsilon / norm_factor;

  double rho = cfg.penalty;
  Matrix x = Matrix::Zero(n, n);
  Vector ax = Vector::Zero(m);
  std::vector<Matrix> z(std::size_t(nblocks), Matrix::Zero(n, n));
  std::vector<Matrix> u(std::size_t(nblocks), Matrix::Zero(n, n));
  Vector w = Vector::Zero(m), w_old = w, du = Vector::Zero(m);
  Matrix dz_sum(n, n);

  constexpr int kCheckEvery = 10;
  constexpr double kBalanceRatio = 3.0;
  constexpr double kTiny = 1e-300;
  constexpr double kRelax = 1.6;
  constexpr int kUpdatesPerLevel = 16;
  int penalty_updates = 0, last_update = 0;
  const double kMinPenalty = cfg.penalty * 1e-6, kMaxPenalty = cfg.penalty * 1e6;

  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    Matrix v = Matrix::Zero(n, n);
    for (int j = 0; j < nblocks; ++j) v += z[std::size_t(j)] - u[std::size_t(j)];
    op.solve(v, y + w - du, x, ax);

    // Over-relaxed updates: x is replaced by a x + (1 - a) z in every coupling.
    dz_sum.setZero();
    for (int j = 0; j < nblocks; ++j) {
      const auto& spec = prog.blocks[std::size_t(j)];
      const Matrix xh = kRelax * x + (1.0 - kRelax) * z[std::size_t(j)];
      Matrix zn = apply_prox(spec.prox, xh + u[std::size_t(j)], spec.weight / rho);
      dz_sum += zn - z[std::size_t(j)];
      u[std::size_t(j)] += xh - zn;
      z[std::size_t(j)] = std::move(zn);
    }
    w_old = w;
    const Vector axh = kRelax * ax + (1.0 - kRelax) * (y + w);
    if (!noiseless) w = project_ball(prog.ball, axh - y + du, eps);
    du += axh - y - w;

    if ((it + 1) % kCheckEvery != 0 && it + 1 != cfg.max_iter) continue;

    double r2 = (ax - y - w).squaredNorm();
    double xnorm2 = ax.squaredNorm(), znorm2 = (w + y).squaredNorm();
    for (int j = 0; j < nblocks; ++j) {
      r2 += (x - z[std::size_t(j)]).squaredNorm();
      xnorm2 += x.squaredNorm();
      znorm2 += z[std::size_t(j)].squaredNorm();
    }
    Matrix dual = dz_sum;
    if (!noiseless) dual += op.adjoint(w - w_old);
    // The duals of the individual blocks cancel at a KKT point, so the dual
    // residual is measured against the size of each piece, not their sum.
    Matrix usum = Matrix::Zero(n, n);
    for (int j = 0; j < nblocks; ++j) usum += u[std::size_t(j)];
    const double dual_scale = std::max(op.project(usum).norm(), op.adjoint(du).norm());
    const double r = std::sqrt(r2);
    const double s = rho * op.project(dual).norm();
    result.primal_residual = r / std::max({std::sqrt(xnorm2), std::sqrt(znorm2), kTiny});
    result.dual_residual = s / std::max(rho * dual_scale, kTiny);
    if (result.primal_residual <= cfg.tol_primal && result.dual_residual <= cfg.tol_dual) {
      result.converged = true;
      ++it;
      break;
    }
    // Residual balancing on the same normalized residuals the stopping test uses.
    const double rn = result.primal_residual, sn = result.dual_residual;
    // Updates get rarer as they accumulate: with a penalty that keeps
    // flipping ADMM can settle into a limit cycle.
    if (it + 1 - last_update < kCheckEvery << (penalty_updates / kUpdatesPerLevel)) continue;
    if (rn > kBalanceRatio * sn && rho < kMaxPenalty) {
      ++penalty_updates;
      last_update = it + 1;
      rho *= 2.0;
      for (auto& uj : u) uj /= 2.0;
      du /= 2.0;
    } else if (sn > kBalanceRatio * rn && rho > kMinPenalty) {
      ++penalty_updates;
      last_update = it + 1;
      rho /= 2.0;
      for (auto& uj : u) uj *= 2.0;
      du *= 2.0;
    }
  }

  result.iterations = it;
  const Matrix& est = prog.estimate_block < 0 ? x : z[std::size_t(prog.estimate_block)];
  result.estimate = symmetrize(est) * data_scale;
  result.objective = objective_value(prog, result.estimate);
  return result;
}

}  // namespace

RecoveryResult recover_lowrank(const MeasurementSet& meas, const SensingEnsemble& ens, const SolverConfig& cfg) {
  Program prog;
  prog.blocks = {{cfg.psd_constraint ? Prox::kTracePsd : Prox::kNuclear, 1.0}};
  prog.ball = Ball::kL1;
  return solve_admm(prog, meas, ens, cfg);
}

RecoveryResult recover_toeplitz(const MeasurementSet& meas, const SensingEnsemble& ens, const SolverConfig& cfg) {
  Program prog;
  prog.blocks = {{cfg.psd_constraint ? Prox::kTracePsd : Prox::kNuclear, 1.0}};
  prog.ball = Ball::kL2;
  prog.toeplitz = true;
  prog.estimate_block = -1;
  return solve_admm(prog, meas, ens, cfg);
}

RecoveryResult recover_sparse(const MeasurementSet& meas, const SensingEnsemble& ens, const SolverConfig& cfg) {
  Program prog;
  prog.blocks = {{Prox::kL1, 1.0}};
  if (cfg.psd_constraint) {
    prog.blocks.push_back({Prox::kPsd, 0.0});
    prog.estimate_block = 1;
  }
  prog.ball = Ball::kL1;
  return solve_admm(prog, meas, ens, cfg);
}

RecoveryResult recover_sparse_rankone(const MeasurementSet& meas, const SensingEnsemble& ens,
                                      const SolverConfig& cfg) {
  const double lambda = cfg.lambda.value_or(1.0 / std::sqrt(double(ens.n())));
  if (!(lambda > 0.0)) throw ParameterError("recover_sparse_rankone: lambda must be > 0");
  Program prog;
  prog.blocks = {{cfg.psd_constraint ? Prox::kTracePsd : Prox::kNuclear, 1.0}, {Prox::kL1, lambda}};
  prog.ball = Ball::kL1;
  return solve_admm(prog, meas, ens, cfg);
}

RecoveryResult pocs(const MeasurementSet& meas, const SensingEnsemble& ens, const Matrix& init, int iters,
                    const Matrix* truth, double tol) {
  if (meas.y.size() != ens.m()) throw ShapeError("pocs: measurement length != m");
  if (init.rows() != ens.n() || init.cols() != ens.n()) throw ShapeError("pocs: init is not n x n");
  if (iters < 0) throw ParameterError("pocs: iteration count must be >= 0");
  const Matrix gram = gram_matrix(ens);
  const Eigen::LLT<Matrix> chol(gram);
  const auto& l = chol.matrixLLT();
  const double max_pivot = l.diagonal().maxCoeff();
  if (chol.info() != Eigen::Success || l.diagonal().minCoeff() <= 1e-7 * max_pivot)
    throw RankDeficiencyError("pocs: A A* is singular; use more measurements (m <= n(n+1)/2) or a regularized solver");

  RecoveryResult result;
  Matrix sigma = init;
  Matrix prev = sigma;
  const double ynorm = std::max(meas.y.norm(), 1e-300);
  for (int t = 0; t < iters; ++t) {
    prev = sigma;
    const Vector resid = apply(ens, sigma) - meas.y;
    sigma -= adjoint(ens, chol.solve(resid));
    sigma = project_psd(sigma);
    if (truth) result.trajectory.push_back(nmse(sigma, *truth));
  }
  result.iterations = iters;
  result.primal_residual = (apply(ens, sigma) - meas.y).norm() / ynorm;
  result.dual_residual = (sigma - prev).norm() / std::max(sigma.norm(), 1e-300);
  result.converged = result.primal_residual <= tol && result.dual_residual <= tol;
  result.objective = sigma.trace();
  result.estimate = std::move(sigma);
  return result;
}

double sin_angle(const Vector& a, const Vector& b) {
  const double na = a.squaredNorm(), nb = b.squaredNorm();
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("sin_angle: zero vector");
  const double c2 = std::min(1.0, a.dot(b) * a.dot(b) / (na * nb));
  return std::sqrt(std::max(0.0, 1.0 - c2));
}

ExtractedSignal extract_signal(const Matrix& x, const Vector* truth) {
  if (x.rows() != x.cols()) throw ShapeError("extract_signal: matrix must be square");
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(x));
  const Eigen::Index top = x.rows() - 1;
  const double lambda1 = eig.eigenvalues()(top);
  if (!(lambda1 > 0.0)) throw DegenerateInputError("extract_signal: top eigenvalue is not positive");
  ExtractedSignal out;
  out.lambda1 = lambda1;
  out.x = std::sqrt(lambda1) * eig.eigenvectors().col(top);
  Eigen::Index imax = 0;
  out.x.cwiseAbs().maxCoeff(&imax);
  if (out.x(imax) < 0.0) out.x = -out.x;
  if (truth) {
    if (truth->size() != x.rows()) throw ShapeError("extract_signal: truth has wrong length");
    out.sin_angle = sin_angle(out.x, *truth);
    out.davis_kahan_bound = (x - *truth * truth->transpose()).norm() / truth->squaredNorm();
  }
  return out;
}

}  // namespace covsketch
