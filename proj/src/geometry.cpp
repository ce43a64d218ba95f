#include "norst/geometry.hpp"

#include "norst/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace norst {

namespace {

double max_abs_gram_defect(const MatrixXd& m) {
  if (m.cols() == 0) return 0.0;
  const MatrixXd gram = m.transpose() * m;
  return (gram - MatrixXd::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff();
}

// Largest eigenvalue of a small symmetric PSD matrix.
double top_eigenvalue(const MatrixXd& sym) {
  if (sym.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues()(sym.rows() - 1));
}

}  // namespace

Basis::Basis(MatrixXd cols) : cols_(std::move(cols)) {
  if (cols_.cols() > cols_.rows()) {
    throw InvalidArgument("basis has more columns (" + std::to_string(cols_.cols()) +
                          ") than rows (" + std::to_string(cols_.rows()) + ")");
  }
  const double defect = max_abs_gram_defect(cols_);
  if (!(defect <= kOrthonormalityTol)) {
    throw InvalidArgument("columns are not orthonormal (max |P'P - I| = " +
                          std::to_string(defect) + ")");
  }
}

Basis Basis::empty(Index n) {
  Basis b;
  b.cols_.resize(n, 0);
  return b;
}

VectorXd Basis::project(const VectorXd& v) const {
  if (v.size() != ambient_dim()) throw DimensionMismatch("project: vector length differs from n");
  if (is_empty()) return VectorXd::Zero(v.size());
  return cols_ * (cols_.transpose() * v);
}

VectorXd Basis::project_out(const VectorXd& v) const {
  if (v.size() != ambient_dim()) throw DimensionMismatch("project_out: vector length differs from n");
  if (is_empty()) return v;
  return v - cols_ * (cols_.transpose() * v);
}

double Basis::orthonormality_defect() const { return max_abs_gram_defect(cols_); }

Basis orthonormalize(const MatrixXd& m) {
  const Index n = m.rows();
  const Index k = m.cols();
  if (k > n) throw DegenerateSubspace("orthonormalize: more columns than rows");
  if (k == 0) return Basis::empty(n);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(m);
  const auto diag = qr.matrixR().diagonal().cwiseAbs();
  const double lead = diag(0);
  if (!(lead > 0.0) || diag(k - 1) < 1e-10 * lead) {
    throw DegenerateSubspace("orthonormalize: numerical rank below " + std::to_string(k));
  }
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, k);
  return Basis(std::move(q));
}

Basis orthonormalize_drop_dependent(const MatrixXd& m, double rel_tol) {
  const Index n = m.rows();
  if (m.cols() == 0) return Basis::empty(n);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(m);
  const auto diag = qr.matrixR().diagonal().cwiseAbs();
  const double lead = diag(0);
  Index rank = 0;
  if (lead > 0.0) {
    while (rank < diag.size() && diag(rank) >= rel_tol * lead) ++rank;
  }
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, rank);
  return Basis(std::move(q));
}

double spectral_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  // Work on the narrower side; JacobiSVD is accurate for tiny values.
  if (m.cols() <= m.rows()) {
    Eigen::JacobiSVD<MatrixXd> svd(m);
    return svd.singularValues()(0);
  }
  Eigen::JacobiSVD<MatrixXd> svd(m.transpose());
  return svd.singularValues()(0);
}

double sin_theta_max(const Basis& p1, const Basis& p2) {
  if (p1.ambient_dim() != p2.ambient_dim()) {
    throw DimensionMismatch("sin_theta_max: ambient dimensions differ (" +
                            std::to_string(p1.ambient_dim()) + " vs " +
                            std::to_string(p2.ambient_dim()) + ")");
  }
  if (p2.is_empty()) return 0.0;
  MatrixXd resid = p2.matrix();
  if (!p1.is_empty()) resid -= p1.matrix() * (p1.matrix().transpose() * p2.matrix());
  return std::min(1.0, spectral_norm(resid));
}

TruncatedSvd top_r_left_singular_vectors(const MatrixXd& m, Index r) {
  const Index n = m.rows();
  const Index cols = m.cols();
  if (r < 0 || r > std::min(n, cols)) {
    throw InvalidArgument("top_r_left_singular_vectors: r must lie in [0, min(n, m)]");
  }
  TruncatedSvd out;
  if (r == 0) {
    out.basis = Basis::empty(n);
    return out;
  }
  const Index k = std::min(n, cols);
  VectorXd sigma(k);
  MatrixXd left;
  if (n <= cols) {
    const MatrixXd gram = m * m.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
    // ascending order; flip
    for (Index i = 0; i < k; ++i) sigma(i) = std::sqrt(std::max(0.0, es.eigenvalues()(n - 1 - i)));
    left = es.eigenvectors().rightCols(r).rowwise().reverse();
  } else {
    const MatrixXd gram = m.transpose() * m;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
    for (Index i = 0; i < k; ++i) sigma(i) = std::sqrt(std::max(0.0, es.eigenvalues()(cols - 1 - i)));
    const MatrixXd right = es.eigenvectors().rightCols(r).rowwise().reverse();
    left = m * right;
    for (Index j = 0; j < r; ++j) {
      const double nrm = left.col(j).norm();
      if (nrm > 0.0) left.col(j) /= nrm;
    }
  }
  out.singular_values = sigma.head(r);
  const double next = r < k ? sigma(r) : 0.0;
  out.degenerate_gap = sigma(r - 1) - next < 1e-12 * sigma(0);
  if (sigma(r - 1) <= 1e-300) {
    // Rank below r: keep the informative directions and complete with
    // coordinate vectors (modified Gram-Schmidt).
    out.degenerate_gap = true;
    MatrixXd q(n, r);
    Index filled = 0;
    auto try_add = [&](VectorXd v) {
      for (int pass = 0; pass < 2; ++pass) {
        for (Index j = 0; j < filled; ++j) v -= q.col(j).dot(v) * q.col(j);
      }
      const double nrm = v.norm();
      if (nrm > 0.5) q.col(filled++) = v / nrm;
    };
    for (Index j = 0; j < r && sigma(j) > 1e-300; ++j) try_add(left.col(j));
    for (Index i = 0; i < n && filled < r; ++i) try_add(VectorXd::Unit(n, i));
    out.basis = Basis(std::move(q));
    return out;
  }
  // Re-orthonormalize to absorb the rounding of the Gram route.
  Eigen::HouseholderQR<MatrixXd> qr(left);
  out.basis = Basis(qr.householderQ() * MatrixXd::Identity(n, r));
  return out;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    // result * num / i stays integral at every step
    if (result > std::numeric_limits<std::uint64_t>::max() / num) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    result = result * num / i;
  }
  return result;
}

RicResult ric_of_projector(const Basis& p, Index s, RicMode mode) {
  const Index n = p.ambient_dim();
  if (s < 1 || s > n) throw InvalidArgument("ric_of_projector: s must lie in [1, n]");
  RicResult out;
  out.mode = mode;
  if (p.is_empty()) return out;
  const MatrixXd& m = p.matrix();
  if (mode == RicMode::kBound) {
    out.value = static_cast<double>(s) * m.rowwise().squaredNorm().maxCoeff();
    return out;
  }
  const std::uint64_t count = binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(s));
  if (count > kMaxRicSupports) {
    throw InvalidArgument("ric_of_projector: C(" + std::to_string(n) + ", " + std::to_string(s) +
                          ") supports exceed the exact-mode limit; use bound mode");
  }
  // Lexicographic enumeration of s-subsets.
  std::vector<Index> idx(static_cast<std::size_t>(s));
  std::iota(idx.begin(), idx.end(), Index{0});
  MatrixXd rows(s, m.cols());
  double best = 0.0;
  while (true) {
    for (Index i = 0; i < s; ++i) rows.row(i) = m.row(idx[static_cast<std::size_t>(i)]);
    const double val = s <= m.cols() ? top_eigenvalue(rows * rows.transpose())
                                     : top_eigenvalue(rows.transpose() * rows);
    best = std::max(best, val);
    Index pos = s - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - s + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (Index i = pos + 1; i < s; ++i) {
      idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i - 1)] + 1;
    }
  }
  out.value = best;
  return out;
}

double coherence(const Basis& p) {
  if (p.is_empty()) return 0.0;
  const double n = static_cast<double>(p.ambient_dim());
  const double r = static_cast<double>(p.dim());
  return n / r * p.matrix().rowwise().squaredNorm().maxCoeff();
}

SubspaceDiag diagnose(const Basis& p, Index s) {
  SubspaceDiag d;
  d.coherence_mu = coherence(p);
  d.s = s;
  if (s < 1) return d;
  const bool exact_ok =
      binomial(static_cast<std::uint64_t>(p.ambient_dim()), static_cast<std::uint64_t>(s)) <=
      kMaxRicSupports;
  const RicResult ric = ric_of_projector(p, s, exact_ok ? RicMode::kExact : RicMode::kBound);
  d.ric_delta = std::min(1.0, ric.value);
  d.ric_mode = ric.mode;
  return d;
}

Basis rotate_subspace(const Basis& p, const MatrixXd& skew, double gamma) {
  const Index n = p.ambient_dim();
  if (skew.rows() != n || skew.cols() != n) {
    throw DimensionMismatch("rotate_subspace: generator must be n x n");
  }
  if (n > 0 && (skew + skew.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw InvalidArgument("rotate_subspace: generator is not skew-symmetric");
  }
  if (p.is_empty() || gamma == 0.0) return p;

  // Action of the exponential on the n x r block: scale so that the 1-norm
  // of the step generator is at most 1, then apply the truncated Taylor
  // series once per scaling step.
  const double norm1 = std::abs(gamma) * skew.cwiseAbs().colwise().sum().maxCoeff();
  int steps = 1;
  while (norm1 / steps > 1.0) steps *= 2;
  const MatrixXd step = (gamma / steps) * skew;

  MatrixXd block = p.matrix();
  for (int s = 0; s < steps; ++s) {
    MatrixXd term = block;
    MatrixXd sum = block;
    for (int k = 1; k < 60; ++k) {
      term = step * term / static_cast<double>(k);
      sum += term;
      if (term.norm() <= 1e-17 * sum.norm()) break;
    }
    block = std::move(sum);
  }
  // Symmetric orthonormalization B (B'B)^{-1/2} removes rounding drift
  // without permuting or mixing columns.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(block.transpose() * block);
  if (!(es.eigenvalues().minCoeff() > 0.5)) {
    throw NumericalError("rotate_subspace: rotated block lost orthonormality");
  }
  const MatrixXd inv_sqrt =
      es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  return Basis(block * inv_sqrt);
}

}  // namespace norst
