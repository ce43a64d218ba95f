#include "norst/tracker.hpp"

#include "norst/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace norst {

namespace {

bool contains(std::span<const Index> times, Index t) {
  return std::find(times.begin(), times.end(), t) != times.end();
}

}  // namespace

void TrackerParams::validate() const {
  if (r < 1) throw InvalidArgument("tracker: r must be positive");
  if (K < 1) throw InvalidArgument("tracker: K must be at least 1");
  if (alpha < r) throw InvalidArgument("tracker: alpha must be at least r");
  if (!(omega_supp > 0.0) || !(xi > 0.0) || !(lambda_thresh > 0.0)) {
    throw InvalidArgument("tracker: omega_supp, xi and lambda_thresh must be positive");
  }
}

double refinement_count_exact(double zeta, const SuggestConstants& c) {
  if (!(zeta > 0.0)) throw InvalidArgument("refinement_count_exact: zeta must be positive");
  if (!(c.decay > 0.0 && c.decay < 1.0)) throw InvalidArgument("refinement_count_exact: decay must lie in (0, 1)");
  return std::log(c.c_K / zeta) / std::log(1.0 / c.decay);
}

TrackerParams suggest_params(Index n, Index r, double f, double lambda_plus, double x_min, double zeta,
                             const SuggestConstants& c) {
  if (n < 2 || r < 1 || !(f > 0.0) || !(lambda_plus > 0.0) || !(x_min > 0.0)) {
    throw InvalidArgument("suggest_params: inputs must be positive (n >= 2)");
  }
  if (!(zeta > 0.0 && zeta <= 0.01)) throw InvalidArgument("suggest_params: zeta must lie in (0, 0.01]");
  TrackerParams p;
  p.r = r;
  const double a = c.c_alpha * std::pow(f, c.f_power) * static_cast<double>(r) * std::log(static_cast<double>(n));
  p.alpha = std::max<Index>(r, static_cast<Index>(std::llround(a)));
  p.K = std::max(1, static_cast<int>(std::ceil(refinement_count_exact(zeta, c) - 1e-12)));
  p.omega_supp = x_min / 2.0;
  p.xi = x_min / 15.0;
  p.lambda_thresh = 2.0 * zeta * zeta * lambda_plus;
  return p;
}

double estimate_lambda_plus(const MatrixXd& l_hat) {
  if (l_hat.cols() == 0) throw InvalidArgument("estimate_lambda_plus: empty window");
  const double inv = 1.0 / static_cast<double>(l_hat.cols());
  const MatrixXd small = l_hat.cols() <= l_hat.rows() ? MatrixXd(l_hat.transpose() * l_hat)
                                                     : MatrixXd(l_hat * l_hat.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(small, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues()(small.rows() - 1)) * inv;
}

double compute_detection_stat(const MatrixXd& window, const Basis& p_ref) {
  if (window.cols() == 0) throw InvalidArgument("compute_detection_stat: window is empty");
  if (window.rows() != p_ref.ambient_dim()) {
    throw DimensionMismatch("compute_detection_stat: window rows differ from the basis dimension");
  }
  MatrixXd b = window;
  if (!p_ref.is_empty()) b -= p_ref.matrix() * (p_ref.matrix().transpose() * window);
  // lambda_max(B B') = lambda_max(B' B); the alpha x alpha side is smaller.
  const MatrixXd gram = b.cols() <= b.rows() ? MatrixXd(b.transpose() * b) : MatrixXd(b * b.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues()(gram.rows() - 1)) / static_cast<double>(window.cols());
}

NorstTracker::NorstTracker(Basis p_init, TrackerParams params, Index first_frame)
    : params_(std::move(params)), first_frame_(first_frame) {
  params_.validate();
  if (p_init.dim() != params_.r) {
    throw DimensionMismatch("tracker: initial basis has r = " + std::to_string(p_init.dim()) +
                            " but params specify r = " + std::to_string(params_.r));
  }
  auto p0 = std::make_shared<const Basis>(std::move(p_init));
  state_.p_current = p0;
  state_.p_prev = p0;
  state_.window = MatrixXd::Zero(p0->ambient_dim(), params_.alpha);
  state_.t = first_frame;
  omega_ = params_.omega_supp;
  xi_ = params_.xi;

  Epoch e0;
  e0.index = 0;
  e0.t_hat = first_frame;
  e0.basis = p0;
  if (params_.refine_initial) {
    state_.phase = Phase::kUpdate;
    state_.t_hat_j = first_frame;
    state_.t_hat_fin = first_frame + params_.K * params_.alpha - 1;
  } else {
    state_.phase = Phase::kDetect;
    state_.t_hat_fin = first_frame - 1;
    e0.t_fin = first_frame - 1;
  }
  epochs_.push_back(std::move(e0));
}

void NorstTracker::push_window(const VectorXd& l_hat) {
  // Column order is irrelevant to both the SVD and the covariance test.
  state_.window.col(state_.t % params_.alpha) = l_hat;
  state_.window_count = std::min(state_.window_count + 1, params_.alpha);
}

void NorstTracker::begin_update(Index t) {
  // A change arriving mid-update closes the current epoch with its latest
  // estimate.
  if (state_.phase == Phase::kUpdate && !epochs_.back().complete()) {
    epochs_.back().t_fin = t - 1;
    state_.p_prev = state_.p_current;
  }
  state_.phase = Phase::kUpdate;
  state_.j += 1;
  state_.k = 0;
  state_.t_hat_j = t;
  state_.t_hat_fin = t + params_.K * params_.alpha - 1;
  Epoch e;
  e.index = state_.j;
  e.t_hat = t;
  e.basis = state_.p_current;
  epochs_.push_back(std::move(e));
}

FrameEstimate NorstTracker::process_frame(const VectorXd& y) {
  if (y.size() != state_.p_current->ambient_dim()) {
    throw DimensionMismatch("process_frame: frame length " + std::to_string(y.size()) + " differs from n = " +
                            std::to_string(state_.p_current->ambient_dim()));
  }
  double xi = xi_;
  if (params_.xi_mode == XiMode::kPreviousResidual && prev_l_hat_.size() == y.size()) {
    xi = std::max(1e-6, state_.p_current->project_out(prev_l_hat_).norm());
  }
  SparseEstimate est = projected_cs_step(y, *state_.p_current, xi, omega_, params_.cs);
  return finish_frame(y, std::move(est), {}, true);
}

FrameEstimate NorstTracker::process_frame_known_changes(const VectorXd& y, std::span<const Index> change_times) {
  if (y.size() != state_.p_current->ambient_dim()) {
    throw DimensionMismatch("process_frame_known_changes: frame length differs from n");
  }
  SparseEstimate est = projected_cs_step(y, *state_.p_current, xi_, omega_, params_.cs);
  return finish_frame(y, std::move(est), change_times, false);
}

FrameEstimate NorstTracker::process_frame_with_support(const VectorXd& y, const Support& support,
                                                       std::span<const Index> change_times, bool detect) {
  if (y.size() != state_.p_current->ambient_dim()) {
    throw DimensionMismatch("process_frame_with_support: frame length differs from n");
  }
  const ProjectedObservation obs = ProjectedObservation::from_raw(y, *state_.p_current);
  SparseEstimate est;
  est.support = support;
  est.x_hat = ls_debias(obs, est.support, params_.cs.ls);
  est.l_hat = y - est.x_hat;
  est.x_cs = est.x_hat;
  return finish_frame(y, std::move(est), change_times, detect);
}

FrameEstimate NorstTracker::finish_frame(const VectorXd& y, SparseEstimate est, std::span<const Index> change_times,
                                         bool detect) {
  (void)y;
  const Index t = state_.t;
  FrameEstimate out;
  out.t = t;
  shrinkage_iterations_ += est.shrinkage_iterations;

  if (params_.adaptive_xmin && !est.support.empty()) {
    double m = std::abs(est.x_hat(est.support.front()));
    for (Index i : est.support) m = std::min(m, std::abs(est.x_hat(i)));
    m = std::max(m, 1e-6);
    omega_ = m / 2.0;
    xi_ = m / 15.0;
  }
  if (params_.retain_history) supports_.push_back(est.support);
  if (params_.xi_mode == XiMode::kPreviousResidual) prev_l_hat_ = est.l_hat;

  if (!change_times.empty() && t > first_frame_ && contains(change_times, t)) {
    begin_update(t);
  }
  push_window(est.l_hat);

  if (state_.phase == Phase::kDetect) {
    const Index since = t - state_.t_hat_fin;
    if (detect && since > 0 && since % params_.alpha == 0 && state_.window_count == params_.alpha) {
      const double stat = compute_detection_stat(state_.window, *state_.p_prev);
      out.detection_stat = stat;
      if (stat >= params_.lambda_thresh) {
        begin_update(t);
        out.change_detected_at = t;
        detections_.push_back(t);
      }
    }
  } else {
    const Index due = state_.t_hat_j + static_cast<Index>(state_.k + 1) * params_.alpha - 1;
    if (t == due && state_.window_count == params_.alpha) {
      TruncatedSvd svd = top_r_left_singular_vectors(state_.window, params_.r);
      auto basis = std::make_shared<const Basis>(std::move(svd.basis));
      state_.p_current = basis;
      state_.k += 1;
      refinements_.push_back(Refinement{state_.j, state_.k, t, basis});
      epochs_.back().basis = basis;
      if (state_.k == params_.K) {
        epochs_.back().t_fin = t;
        state_.p_prev = basis;
        state_.t_hat_fin = t;
        state_.phase = Phase::kDetect;
        state_.k = 0;
      }
    }
  }

  out.x_hat = std::move(est.x_hat);
  out.l_hat = std::move(est.l_hat);
  out.support = std::move(est.support);
  out.subspace = state_.p_current;
  out.epoch = state_.j;
  out.phase = state_.phase;
  state_.t = t + 1;
  return out;
}

Basis union_basis(const Basis& p1, const Basis& p2, int* dropped) {
  if (p1.ambient_dim() != p2.ambient_dim()) throw DimensionMismatch("union_basis: ambient dimensions differ");
  const Index n = p1.ambient_dim();
  if (dropped) *dropped = 0;
  if (p2.is_empty()) return p1;
  MatrixXd resid = p2.matrix();
  if (!p1.is_empty()) resid -= p1.matrix() * (p1.matrix().transpose() * p2.matrix());
  Eigen::JacobiSVD<MatrixXd> svd(resid, Eigen::ComputeThinU);
  const VectorXd& s = svd.singularValues();
  Index keep = 0;
  while (keep < s.size() && s(keep) > 1e-6) ++keep;
  if (dropped) *dropped = static_cast<int>(p2.dim() - keep);
  if (keep == 0) return p1;
  MatrixXd cat(n, p1.dim() + keep);
  cat << p1.matrix(), svd.matrixU().leftCols(keep);
  return orthonormalize(cat);
}

OfflineResult offline_smooth(const MatrixXd& y, Index first_frame, const std::vector<Support>& supports,
                             const std::vector<Epoch>& epochs, const LsOptions& ls) {
  if (static_cast<Index>(supports.size()) != y.cols()) {
    throw DimensionMismatch("offline_smooth: support history length " + std::to_string(supports.size()) +
                            " differs from frame count " + std::to_string(y.cols()));
  }
  if (epochs.empty()) throw InvalidArgument("offline_smooth: no epochs");
  const Index n = y.rows();
  OfflineResult out;
  out.l_hat.resize(n, y.cols());

  // Projector per interval (t_fin_{j-1}, t_fin_j]; the epoch j == 0 interval
  // uses P_0 alone. Frames past the last finalization use the last complete
  // estimate joined with any in-progress one.
  struct Interval {
    Index last;  // inclusive end frame
    Basis basis;
  };
  std::vector<Interval> intervals;
  const Epoch* prev = nullptr;
  for (const Epoch& e : epochs) {
    if (!e.basis) throw InvalidArgument("offline_smooth: epoch without a basis");
    if (!e.complete()) continue;
    int dropped = 0;
    Basis b = prev ? union_basis(*prev->basis, *e.basis, &dropped) : *e.basis;
    out.dropped_directions += dropped;
    intervals.push_back({e.t_fin, std::move(b)});
    prev = &e;
  }
  const Epoch& tail = epochs.back();
  Basis tail_basis;
  if (prev == nullptr) {
    tail_basis = *tail.basis;
  } else if (!tail.complete()) {
    int dropped = 0;
    tail_basis = union_basis(*prev->basis, *tail.basis, &dropped);
    out.dropped_directions += dropped;
  } else {
    tail_basis = *prev->basis;
  }

  std::size_t iv = 0;
  for (Index c = 0; c < y.cols(); ++c) {
    const Index t = first_frame + c;
    while (iv < intervals.size() && intervals[iv].last < t) ++iv;
    const Basis& b = iv < intervals.size() ? intervals[iv].basis : tail_basis;
    const VectorXd yc = y.col(c);
    const ProjectedObservation obs = ProjectedObservation::from_raw(yc, b);
    const VectorXd x = ls_debias(obs, supports[static_cast<std::size_t>(c)], ls);
    out.l_hat.col(c) = yc - x;
  }
  return out;
}

}  // namespace norst
