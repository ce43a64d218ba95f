#pragma once

#include "norst/error.hpp"
#include "norst/geometry.hpp"

#include <cstdint>
#include <vector>

namespace norst {

using Support = std::vector<Index>;  // sorted, 0-based

// y_tilde = (I - P P') y together with the P defining the projector.
struct ProjectedObservation {
  VectorXd y_tilde;
  Basis projector_basis;

  static ProjectedObservation from_raw(const VectorXd& y, const Basis& p);
};

struct L1Options {
  double tol = 1e-4;          // relative change stopping rule for the shrinkage loop
  double residual_band = 1e-3;  // accept |res - xi| <= band * xi
  int max_multiplier_steps = 60;
  // 0 selects 10 * n * log(1/tol).
  std::int64_t max_iterations = 0;
};

struct L1Result {
  VectorXd x;
  double residual = 0.0;      // || y_tilde - Psi x ||
  double multiplier = 0.0;    // Lagrangian weight that met the constraint
  std::int64_t iterations = 0;  // total shrinkage steps across all multipliers
};

// The shrinkage loop ran out of iterations.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, VectorXd last_iterate, double residual)
      : NumericalError(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}
  const VectorXd& last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }

 private:
  VectorXd last_iterate_;
  double residual_;
};

// min ||x||_1 s.t. ||y_tilde - Psi x|| <= xi, solved through the Lagrangian
// form min lam ||x||_1 + 1/2 ||y_tilde - Psi x||^2 with accelerated proximal
// gradient, lam chosen by a bracketed search on the residual.
L1Result l1_min_noisy(const ProjectedObservation& obs, double xi, const L1Options& opts = {});

// {i : |x_i| > omega}
Support threshold_support(const VectorXd& x_cs, double omega_supp);

struct LsOptions {
  double cg_tol = 1e-10;
  int cg_iters = 10;
  // Smallest eigenvalue of Psi_T' Psi_T below this is treated as singular.
  double singular_tol = 1e-12;
};

// x supported on T with Psi_T' Psi_T x_T = Psi_T' y_tilde, by conjugate
// gradient on the normal equations. Throws SingularSystem.
VectorXd ls_debias(const ProjectedObservation& obs, const Support& support, const LsOptions& opts = {});

struct SparseEstimate {
  VectorXd x_cs;
  Support support;
  VectorXd x_hat;
  VectorXd l_hat;
  std::int64_t shrinkage_iterations = 0;
};

struct CsStepOptions {
  L1Options l1;
  LsOptions ls;
};

// Projected CS: y_tilde = Psi y, l1 recovery, support threshold, LS debias,
// l_hat = y - x_hat.
SparseEstimate projected_cs_step(const VectorXd& y, const Basis& p_hat, double xi, double omega_supp,
                                 const CsStepOptions& opts = {});

}  // namespace norst
