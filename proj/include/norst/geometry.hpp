#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace norst {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Tolerance on max |P'P - I| for a matrix to count as a basis.
inline constexpr double kOrthonormalityTol = 1e-10;

// An n x r matrix with mutually orthonormal columns, standing for the
// subspace it spans. r may be zero (the trivial subspace of R^n).
class Basis {
 public:
  Basis() = default;

  // Throws InvalidArgument unless `cols` is orthonormal to
  // kOrthonormalityTol and r <= n.
  explicit Basis(MatrixXd cols);

  static Basis empty(Index n);

  const MatrixXd& matrix() const noexcept { return cols_; }
  Index ambient_dim() const noexcept { return cols_.rows(); }
  Index dim() const noexcept { return cols_.cols(); }
  bool is_empty() const noexcept { return cols_.cols() == 0; }

  // P (P' v)
  VectorXd project(const VectorXd& v) const;
  // (I - P P') v, without forming the n x n projector.
  VectorXd project_out(const VectorXd& v) const;

  // max |P'P - I|
  double orthonormality_defect() const;

 private:
  MatrixXd cols_;
};

// Orthonormal basis for the column space of `m` (Householder QR with column
// pivoting). Throws DegenerateSubspace when the numerical rank, at relative
// tolerance 1e-10, is below the column count.
Basis orthonormalize(const MatrixXd& m);

// Like orthonormalize, but silently drops dependent directions.
Basis orthonormalize_drop_dependent(const MatrixXd& m, double rel_tol = 1e-10);

// Largest singular value, computed densely.
double spectral_norm(const MatrixXd& m);

// || (I - P1 P1') P2 ||, the sine of the largest principal angle.
double sin_theta_max(const Basis& p1, const Basis& p2);

struct TruncatedSvd {
  Basis basis;
  VectorXd singular_values;  // the top r, descending
  // sigma_r - sigma_{r+1} < 1e-12 sigma_1: the basis is an arbitrary choice
  // inside a tied block.
  bool degenerate_gap = false;
};

// Top-r left singular vectors of an n x m matrix via the eigendecomposition
// of whichever Gram matrix (n x n or m x m) is smaller.
TruncatedSvd top_r_left_singular_vectors(const MatrixXd& m, Index r);

enum class RicMode { kExact, kBound };

struct RicResult {
  double value = 0.0;
  RicMode mode = RicMode::kExact;
};

inline constexpr std::uint64_t kMaxRicSupports = 1000000;

// delta_s(I - P P') = max_{|T| <= s} ||I_T' P||^2.
// Exact mode enumerates every support of size s and throws InvalidArgument
// when C(n, s) exceeds kMaxRicSupports. Bound mode returns
// s * max_i ||row_i(P)||^2.
RicResult ric_of_projector(const Basis& p, Index s, RicMode mode);

// n / r * max_i ||row_i(P)||^2
double coherence(const Basis& p);

struct SubspaceDiag {
  double coherence_mu = 0.0;
  double ric_delta = 0.0;
  Index s = 0;
  RicMode ric_mode = RicMode::kExact;
};

// Coherence plus delta_s; exact when the enumeration is affordable, bound
// otherwise (clamped to 1).
SubspaceDiag diagnose(const Basis& p, Index s);

// exp(gamma * B) P column for column, for skew-symmetric B.
// Throws InvalidArgument when max |B + B'| > 1e-10.
Basis rotate_subspace(const Basis& p, const MatrixXd& skew, double gamma);

// Binomial coefficient, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

}  // namespace norst
