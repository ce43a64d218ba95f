#include "norst/sparse_recovery.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace norst {

namespace {

void soft_threshold(const VectorXd& v, double lam, VectorXd& out) {
  out = v.unaryExpr([lam](double a) {
    if (a > lam) return a - lam;
    if (a < -lam) return a + lam;
    return 0.0;
  });
}

// Psi v into out; an empty basis gives the identity.
void apply_psi(const MatrixXd& p, const VectorXd& v, VectorXd& out) {
  if (p.cols() == 0) {
    out = v;
    return;
  }
  out.noalias() = v - p * (p.transpose() * v);
}

struct InnerSolve {
  VectorXd x;
  double residual = 0.0;
  std::int64_t iterations = 0;
};

// FISTA with gradient-based restart. Step 1 is exact: ||Psi||^2 = 1.
InnerSolve solve_lagrangian(const MatrixXd& p, const VectorXd& y_tilde, const VectorXd& psi_y, double lam,
                            const VectorXd& warm, double tol, std::int64_t max_iter) {
  const Index n = y_tilde.size();
  VectorXd x = warm;
  VectorXd z = warm;
  VectorXd x_next(n);
  VectorXd psi_z(n);
  VectorXd step(n);
  double t = 1.0;
  std::int64_t it = 0;
  for (; it < max_iter; ++it) {
    apply_psi(p, z, psi_z);
    step.noalias() = z - psi_z + psi_y;  // z - grad f(z)
    soft_threshold(step, lam, x_next);
    const double diff = (x_next - x).norm();
    const double scale = std::max(x_next.norm(), 1e-12);
    // restart when momentum points uphill
    const bool restart = (z - x_next).dot(x_next - x) > 0.0;
    const double t_next = restart ? 1.0 : 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = restart ? 0.0 : (t - 1.0) / t_next;
    z = x_next + beta * (x_next - x);
    x.swap(x_next);
    t = t_next;
    if (diff <= tol * scale) {
      ++it;
      break;
    }
  }
  InnerSolve out;
  apply_psi(p, x, psi_z);
  out.residual = (y_tilde - psi_z).norm();
  out.iterations = it;
  out.x = std::move(x);
  if (it >= max_iter) {
    throw ConvergenceError("l1_min_noisy: shrinkage loop hit its iteration cap (" + std::to_string(max_iter) + ")",
                           out.x, out.residual);
  }
  return out;
}

}  // namespace

ProjectedObservation ProjectedObservation::from_raw(const VectorXd& y, const Basis& p) {
  return ProjectedObservation{p.project_out(y), p};
}

L1Result l1_min_noisy(const ProjectedObservation& obs, double xi, const L1Options& opts) {
  const VectorXd& y_tilde = obs.y_tilde;
  const Index n = y_tilde.size();
  if (obs.projector_basis.ambient_dim() != n) {
    throw DimensionMismatch("l1_min_noisy: projector and observation dimensions differ");
  }
  if (!(xi >= 0.0)) throw InvalidArgument("l1_min_noisy: xi must be non-negative");
  if (!(opts.tol > 0.0)) throw InvalidArgument("l1_min_noisy: tol must be positive");

  L1Result result;
  result.x = VectorXd::Zero(n);
  const double y_norm = y_tilde.norm();
  result.residual = y_norm;
  if (y_norm <= xi) return result;  // zero is feasible

  const MatrixXd& p = obs.projector_basis.matrix();
  VectorXd psi_y(n);
  apply_psi(p, y_tilde, psi_y);
  // No x reaches a residual below ||(I - Psi) y_tilde||.
  const double floor_res = (y_tilde - psi_y).norm();
  const double target = std::max(xi, floor_res * (1.0 + 1e-9));
  const double band = opts.residual_band * target;

  const std::int64_t cap =
      opts.max_iterations > 0
          ? opts.max_iterations
          : static_cast<std::int64_t>(std::ceil(10.0 * static_cast<double>(n) * std::log(1.0 / opts.tol))) + 10;

  const double lam_max = psi_y.cwiseAbs().maxCoeff();
  if (!(lam_max > 0.0)) return result;

  // Bracket: hi is infeasible (residual > target), lo is feasible.
  double lam_hi = lam_max;
  double res_hi = y_norm;
  InnerSolve best_feasible;
  bool have_lo = false;
  double lam_lo = 0.0;
  double res_lo = 0.0;
  VectorXd warm = VectorXd::Zero(n);
  std::int64_t total_iters = 0;

  auto evaluate = [&](double lam) {
    InnerSolve s = solve_lagrangian(p, y_tilde, psi_y, lam, warm, opts.tol, cap);
    total_iters += s.iterations;
    warm = s.x;
    return s;
  };

  double lam = 0.5 * lam_max;
  int steps = 0;
  while (!have_lo && steps < opts.max_multiplier_steps) {
    ++steps;
    InnerSolve s = evaluate(lam);
    if (s.residual <= target + band) {
      have_lo = true;
      lam_lo = lam;
      res_lo = s.residual;
      best_feasible = std::move(s);
      if (res_lo >= target - band) break;
    } else {
      lam_hi = lam;
      res_hi = s.residual;
      lam *= 0.1;
    }
  }
  if (!have_lo) {
    throw ConvergenceError("l1_min_noisy: no multiplier met the residual constraint", warm, res_hi);
  }

  // Illinois false position on residual(lam) - target, with bisection
  // fallback.
  double f_lo = res_lo - target;
  double f_hi = res_hi - target;
  int last = 0;
  while (best_feasible.residual < target - band && steps < opts.max_multiplier_steps) {
    if (lam_hi - lam_lo <= 1e-12 * lam_hi) break;
    ++steps;
    double cand = lam_lo - f_lo * (lam_hi - lam_lo) / (f_hi - f_lo);
    if (!(cand > lam_lo && cand < lam_hi)) cand = 0.5 * (lam_lo + lam_hi);
    InnerSolve s = evaluate(cand);
    const double f = s.residual - target;
    if (s.residual <= target + band) {
      lam_lo = cand;
      f_lo = f;
      best_feasible = std::move(s);
      if (last == -1) f_hi *= 0.5;
      last = -1;
      if (best_feasible.residual >= target - band) break;
    } else {
      lam_hi = cand;
      f_hi = f;
      if (last == 1) f_lo *= 0.5;
      last = 1;
    }
  }
  result.x = std::move(best_feasible.x);
  result.residual = best_feasible.residual;
  result.multiplier = lam_lo;
  result.iterations = total_iters;
  return result;
}

Support threshold_support(const VectorXd& x_cs, double omega_supp) {
  if (!(omega_supp > 0.0)) throw InvalidArgument("threshold_support: omega must be positive");
  Support out;
  for (Index i = 0; i < x_cs.size(); ++i) {
    if (std::abs(x_cs(i)) > omega_supp) out.push_back(i);
  }
  return out;
}

VectorXd ls_debias(const ProjectedObservation& obs, const Support& support, const LsOptions& opts) {
  const Index n = obs.y_tilde.size();
  if (obs.projector_basis.ambient_dim() != n) {
    throw DimensionMismatch("ls_debias: projector and observation dimensions differ");
  }
  if (!(opts.cg_tol > 0.0) || opts.cg_iters <= 0) {
    throw InvalidArgument("ls_debias: cg_tol and cg_iters must be positive");
  }
  VectorXd x = VectorXd::Zero(n);
  const Index m = static_cast<Index>(support.size());
  if (m == 0) return x;
  for (Index k = 0; k < m; ++k) {
    const Index i = support[static_cast<std::size_t>(k)];
    if (i < 0 || i >= n) throw InvalidArgument("ls_debias: support index out of range");
    if (k > 0 && i <= support[static_cast<std::size_t>(k - 1)]) {
      throw InvalidArgument("ls_debias: support must be sorted and unique");
    }
  }

  const MatrixXd& p = obs.projector_basis.matrix();
  const Index r = p.cols();
  MatrixXd p_t(m, r);
  VectorXd psi_y(n);
  apply_psi(p, obs.y_tilde, psi_y);
  VectorXd rhs(m);
  for (Index k = 0; k < m; ++k) {
    const Index i = support[static_cast<std::size_t>(k)];
    if (r > 0) p_t.row(k) = p.row(i);
    rhs(k) = psi_y(i);
  }

  // Psi_T' Psi_T = I - P_T P_T'; its smallest eigenvalue is 1 - ||P_T||^2.
  if (r > 0) {
    const MatrixXd small = r <= m ? MatrixXd(p_t.transpose() * p_t) : MatrixXd(p_t * p_t.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(small, Eigen::EigenvaluesOnly);
    const double min_eig = 1.0 - es.eigenvalues()(small.rows() - 1);
    if (min_eig < opts.singular_tol) {
      throw SingularSystem("ls_debias: Psi_T' Psi_T is singular on a support of size " + std::to_string(m) +
                               " (support too large or overlapping the subspace)",
                           min_eig);
    }
  }

  auto apply_a = [&](const VectorXd& v) -> VectorXd {
    if (r == 0) return v;
    return v - p_t * (p_t.transpose() * v);
  };

  VectorXd z = VectorXd::Zero(m);
  VectorXd res = rhs;
  VectorXd dir = res;
  double rs = res.squaredNorm();
  const double stop = opts.cg_tol * opts.cg_tol * std::max(rhs.squaredNorm(), 1e-300);
  for (int it = 0; it < opts.cg_iters && rs > stop; ++it) {
    const VectorXd a_dir = apply_a(dir);
    const double step = rs / dir.dot(a_dir);
    z += step * dir;
    res -= step * a_dir;
    const double rs_next = res.squaredNorm();
    dir = res + (rs_next / rs) * dir;
    rs = rs_next;
  }
  for (Index k = 0; k < m; ++k) x(support[static_cast<std::size_t>(k)]) = z(k);
  return x;
}

SparseEstimate projected_cs_step(const VectorXd& y, const Basis& p_hat, double xi, double omega_supp,
                                 const CsStepOptions& opts) {
  if (y.size() != p_hat.ambient_dim()) {
    throw DimensionMismatch("projected_cs_step: observation length " + std::to_string(y.size()) +
                            " differs from subspace ambient dimension " + std::to_string(p_hat.ambient_dim()));
  }
  const ProjectedObservation obs = ProjectedObservation::from_raw(y, p_hat);
  L1Result l1 = l1_min_noisy(obs, xi, opts.l1);
  SparseEstimate est;
  est.support = threshold_support(l1.x, omega_supp);
  est.x_hat = ls_debias(obs, est.support, opts.ls);
  est.l_hat = y - est.x_hat;
  est.x_cs = std::move(l1.x);
  est.shrinkage_iterations = l1.iterations;
  return est;
}

}  // namespace norst
