#include "norst/init.hpp"

#include "norst/error.hpp"
#include "norst/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace norst {

int InitConfig::effective_iters() const {
  if (iters > 0) return iters;
  const double rr = static_cast<double>(std::max<Index>(r, 1));
  return static_cast<int>(std::ceil(std::log2(rr))) + 4;
}

double InitConfig::effective_floor(const MatrixXd& y) const {
  if (thresh_floor) return *thresh_floor;
  if (x_min) return *x_min / 2.0;
  // 5 robust standard deviations of the entries (MAD scale).
  std::vector<double> v(y.data(), y.data() + y.size());
  if (v.empty()) return 0.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double med = *mid;
  for (double& x : v) x = std::abs(x - med);
  std::nth_element(v.begin(), mid, v.end());
  return 5.0 * 1.4826 * *mid;
}

Index default_t_train(Index r) { return std::max<Index>(100, 4 * r); }

Basis init_altproj_lite(const MatrixXd& y_train, const InitConfig& cfg) {
  const Index r = cfg.r;
  if (r < 1 || y_train.cols() < r || y_train.rows() < r) {
    throw InvalidArgument("init_altproj_lite: need r >= 1 and a training block with at least r rows and columns");
  }
  if (!(cfg.thresh_decay > 0.0 && cfg.thresh_decay < 1.0)) {
    throw InvalidArgument("init_altproj_lite: thresh_decay must lie in (0, 1)");
  }
  const double floor = cfg.effective_floor(y_train);
  // Screening: with no low-rank estimate yet the residual is Y itself; a
  // rank-r fit at a high threshold would absorb the outliers.
  double thresh = y_train.cwiseAbs().maxCoeff();
  while (thresh > floor) thresh = std::max(floor, thresh * cfg.thresh_decay);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> flagged = y_train.array().abs() > thresh;

  MatrixXd l_hat = MatrixXd::Zero(y_train.rows(), y_train.cols());
  TruncatedSvd svd;
  for (int it = 0; it < cfg.effective_iters(); ++it) {
    // Flagged entries take the current low-rank value (zero on the first pass).
    const MatrixXd cleaned = flagged.select(l_hat, y_train);
    svd = top_r_left_singular_vectors(cleaned, r);
    if (!(svd.singular_values(r - 1) > 1e-12 * std::max(svd.singular_values(0), 1e-300))) {
      throw DegenerateSubspace("init_altproj_lite: training data has rank below r = " + std::to_string(r));
    }
    const MatrixXd& p = svd.basis.matrix();
    l_hat = p * (p.transpose() * cleaned);
    flagged = (y_train - l_hat).array().abs() > thresh;
  }
  return svd.basis;
}

Basis init_oracle(const Basis& p_true, double target, std::uint64_t seed) {
  if (!(target >= 0.0 && target < 1.0)) throw InvalidArgument("init_oracle: target must lie in [0, 1)");
  const Index n = p_true.ambient_dim();
  const Index r = p_true.dim();
  if (target == 0.0 || r == 0) return p_true;
  if (r == n) throw InvalidArgument("init_oracle: r = n leaves no direction to tilt toward");
  Rng rng(seed, "init_oracle");
  // Random rotation inside the subspace picks which direction tilts.
  MatrixXd g(r, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < r; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(g);
  const MatrixXd rot = qr.householderQ() * MatrixXd::Identity(r, r);
  MatrixXd q = p_true.matrix() * rot;

  VectorXd w(n);
  double nrm = 0.0;
  while (nrm < 1e-8) {
    for (Index i = 0; i < n; ++i) w(i) = rng.normal();
    w = p_true.project_out(w);
    w = p_true.project_out(w);
    nrm = w.norm();
  }
  w /= nrm;
  const double c = std::sqrt(1.0 - target * target);
  q.col(0) = c * q.col(0) + target * w;
  return orthonormalize(q);
}

Basis init_random_orthogonal(Index n, Index r, std::uint64_t seed) {
  if (r < 0 || r > n) throw InvalidArgument("init_random_orthogonal: need 0 <= r <= n");
  if (r == 0) return Basis::empty(n);
  Rng rng(seed, "init_random_orthogonal");
  MatrixXd g(n, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, r);
  const MatrixXd& rr = qr.matrixQR();
  for (Index j = 0; j < r; ++j) {
    if (rr(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return Basis(std::move(q));
}

}  // namespace norst
