#pragma once

#include "norst/geometry.hpp"

#include <cstdint>
#include <optional>

namespace norst {

enum class InitMode { kAltProjLite, kOracle, kRandomOrthogonal };

struct InitConfig {
  Index t_train = 100;
  Index r = 0;
  int iters = 0;              // 0 selects ceil(log2 r) + 4
  double thresh_decay = 0.7;  // screening threshold multiplier per step
  // Final threshold. When unset: x_min / 2 if x_min is known, else five
  // robust (MAD) standard deviations of the training entries.
  std::optional<double> thresh_floor;
  std::optional<double> x_min;
  InitMode mode = InitMode::kAltProjLite;
  double oracle_target = 0.0;  // sin theta for kOracle
  std::uint64_t seed = 0;

  int effective_iters() const;
  double effective_floor(const MatrixXd& y) const;
};

Index default_t_train(Index r);

// Screens entries of Y against a threshold decaying from max |Y| to the
// floor, then alternates (a) rank-r truncation of Y with flagged entries
// replaced by the current low-rank estimate and (b) hard thresholding of
// Y - L_hat at the floor. Throws DegenerateSubspace when sigma_r of the
// cleaned data vanishes.
Basis init_altproj_lite(const MatrixXd& y_train, const InitConfig& cfg);

// P_true with one direction tilted toward its orthogonal complement, so
// that sin_theta_max(result, P_true) = target.
Basis init_oracle(const Basis& p_true, double target, std::uint64_t seed);

// Haar-distributed: QR of a Gaussian matrix with the signs of diag(R) fixed.
Basis init_random_orthogonal(Index n, Index r, std::uint64_t seed);

}  // namespace norst
