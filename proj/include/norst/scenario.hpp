#pragma once

#include "norst/geometry.hpp"
#include "norst/rng.hpp"
#include "norst/sparse_recovery.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <vector>

namespace norst {

using SparseMatrixXd = Eigen::SparseMatrix<double>;
using SparseVectorXd = Eigen::SparseVector<double>;

enum class SupportKind { kNone, kBernoulli, kMovingObject };

struct SupportModel {
  SupportKind kind = SupportKind::kNone;
  double rho = 0.0;  // bernoulli
  Index s = 0;       // moving object: block length
  Index dwell = 1;   // moving object: frames per position

  static SupportModel none() { return {}; }
  static SupportModel bernoulli(double rho);
  // dwell = ceil(b0 * alpha), at least 1.
  static SupportModel moving_object(Index s, double b0, Index alpha);
};

enum class MagnitudeMode { kUniform, kConstant };

// (a_t)_i ~ unif[-q_i, q_i], q_i = sqrt(f) - sqrt(f)(i-1)/(2r) for i < r
// (1-based), q_r = 1.
struct CoeffModel {
  Index r = 0;
  double f = 1.0;
  double eta = 3.0;  // a_i^2 <= eta lambda_i for the uniform law

  VectorXd q() const;
  VectorXd lambdas() const;  // q_i^2 / 3
};

struct ScenarioConfig {
  Index n = 200;
  Index d = 3000;
  Index r = 10;
  double f = 50.0;
  std::vector<Index> change_times{1000, 2000};
  double gamma = 0.001;  // rotation size for every change
  Index t_train = 100;
  SupportModel train_support;  // frames t < t_train
  SupportModel support;        // frames t >= t_train
  double x_min = 10.0;
  double x_max = 20.0;
  MagnitudeMode magnitude = MagnitudeMode::kUniform;
  // Dense noise v_t = U c with c_i ~ unif[-sqrt(3) sigma, sqrt(3) sigma] on a
  // random r-dimensional subspace U; 0 disables it. ||E vv'|| = sigma^2.
  double noise_var = 0.0;
  // Throw when measured support fractions miss the model targets.
  bool check_budgets = true;
  Index budget_alpha = 100;  // window for the row-fraction budget check

  void validate() const;
};

struct Scenario {
  ScenarioConfig cfg;
  std::uint64_t seed = 0;
  std::vector<Basis> subspaces;  // P_0 .. P_J
  MatrixXd L;
  SparseMatrixXd X;
  MatrixXd V;  // empty when noise is off
  MatrixXd Y;
  std::vector<Support> supports;

  Index n() const { return L.rows(); }
  Index d() const { return L.cols(); }
  // Index j of the subspace in force at frame t.
  int epoch_of(Index t) const;
  const Basis& subspace_at(Index t) const { return subspaces[static_cast<std::size_t>(epoch_of(t))]; }
};

Scenario gen_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

// Support of frame t under `model`; `t_rel` counts frames since the model
// came into force.
Support gen_support(const SupportModel& model, Index n, Index t_rel, Rng& rng);

// Nonzero values on `support`: uniform mode draws a random sign times
// unif[x_min, x_max]; constant mode sets every entry to x_min.
SparseVectorXd gen_magnitudes(const Support& support, Index n, double x_min, double x_max, MagnitudeMode mode,
                              Rng& rng);
SparseVectorXd gen_magnitudes(const Support& support, Index n, double x_min, double x_max, MagnitudeMode mode,
                              std::uint64_t seed);

// max over alpha-windows J and rows i of (1/alpha) #{t in J : i in T_t}.
double max_outlier_frac_row(const std::vector<Support>& supports, Index n, Index alpha);
// max_t |T_t| / n
double max_outlier_frac_col(const std::vector<Support>& supports, Index n);

// Per-frame Bernoulli(rho) missing sets.
std::vector<Support> gen_bernoulli_masks(Index n, Index d, double rho, std::uint64_t seed);

}  // namespace norst
