#pragma once

#include "norst/geometry.hpp"
#include "norst/sparse_recovery.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace norst {

// How the CS noise bound xi is chosen each frame.
enum class XiMode {
  kConstant,          // params.xi (or the adaptive x_min rule when enabled)
  kPreviousResidual,  // ||Psi l_hat_{t-1}||
};

struct TrackerParams {
  Index r = 0;
  int K = 1;          // refinement steps per update phase
  Index alpha = 0;    // frames per refinement / detection window
  double omega_supp = 0.0;
  double xi = 0.0;
  double lambda_thresh = 0.0;
  // Track x_min from the smallest recovered outlier of the previous frame.
  bool adaptive_xmin = false;
  XiMode xi_mode = XiMode::kConstant;
  // Run K refinements of the initial estimate before the first detect phase.
  bool refine_initial = true;
  // Keep every frame's support so offline smoothing can run afterwards.
  bool retain_history = true;
  CsStepOptions cs;

  // Throws InvalidArgument on K < 1, alpha < r, non-positive scalars.
  void validate() const;
};

// Multipliers behind suggest_params. Defaults reproduce the settings used
// for the n = 1000, r = 30 synthetic benchmark.
struct SuggestConstants {
  double c_alpha = 1.45;   // alpha = round(c_alpha * f^f_power * r * ln n)
  double f_power = 0.0;
  double c_K = 10.0;       // K = ceil(ln(c_K / zeta) / ln(1 / decay))
  double decay = 0.36787944117144233;  // e^-1
};

// Real-valued refinement count before rounding up.
double refinement_count_exact(double zeta, const SuggestConstants& c = {});

TrackerParams suggest_params(Index n, Index r, double f, double lambda_plus, double x_min, double zeta,
                             const SuggestConstants& c = {});

// Largest eigenvalue of the sample covariance of the lambda_plus estimate
// window (columns are l_hat vectors).
double estimate_lambda_plus(const MatrixXd& l_hat);

enum class Phase { kDetect, kUpdate };

// A completed (or in-progress) subspace estimation epoch.
struct Epoch {
  int index = 0;
  Index t_hat = 0;   // update start: detection frame, known change, or first frame
  Index t_fin = -1;  // frame of the K-th refinement; -1 while in progress
  std::shared_ptr<const Basis> basis;  // final estimate, or latest while in progress
  bool complete() const noexcept { return t_fin >= 0; }
};

struct Refinement {
  int epoch = 0;
  int k = 0;  // 1-based
  Index t = 0;
  std::shared_ptr<const Basis> basis;
};

struct TrackerState {
  Phase phase = Phase::kUpdate;
  int j = 0;
  int k = 0;
  Index t_hat_j = 0;
  Index t_hat_fin = -1;
  std::shared_ptr<const Basis> p_current;
  std::shared_ptr<const Basis> p_prev;
  MatrixXd window;     // n x alpha ring buffer of l_hat
  Index window_count = 0;
  Index t = 0;         // index of the next frame to process
};

struct FrameEstimate {
  Index t = 0;
  VectorXd x_hat;
  VectorXd l_hat;
  Support support;
  std::shared_ptr<const Basis> subspace;  // estimate after this frame
  std::optional<Index> change_detected_at;
  std::optional<double> detection_stat;   // set on frames where the test ran
  int epoch = 0;
  Phase phase = Phase::kUpdate;
};

// lambda_max((1/alpha) sum Phi l l' Phi) over the window columns.
double compute_detection_stat(const MatrixXd& window, const Basis& p_ref);

class NorstTracker {
 public:
  // Throws DimensionMismatch when p_init.dim() != params.r.
  NorstTracker(Basis p_init, TrackerParams params, Index first_frame = 0);

  // Automatic mode: projected CS, then detect/update.
  FrameEstimate process_frame(const VectorXd& y);

  // Basic mode: epochs start exactly at the given change frames; no
  // detection test runs.
  FrameEstimate process_frame_known_changes(const VectorXd& y, std::span<const Index> change_times);

  // The subspace machinery with a caller-supplied support (missing-data
  // mode). The LS fill runs on `support`; no l1 step.
  FrameEstimate process_frame_with_support(const VectorXd& y, const Support& support,
                                           std::span<const Index> change_times = {}, bool detect = true);

  const TrackerState& state() const noexcept { return state_; }
  const TrackerParams& params() const noexcept { return params_; }
  const std::vector<Epoch>& epochs() const noexcept { return epochs_; }
  const std::vector<Refinement>& refinements() const noexcept { return refinements_; }
  const std::vector<Support>& support_history() const noexcept { return supports_; }
  const std::vector<Index>& detections() const noexcept { return detections_; }
  Index first_frame() const noexcept { return first_frame_; }
  std::int64_t shrinkage_iterations() const noexcept { return shrinkage_iterations_; }

 private:
  FrameEstimate finish_frame(const VectorXd& y, SparseEstimate est, std::span<const Index> change_times,
                             bool detect);
  void begin_update(Index t);
  void push_window(const VectorXd& l_hat);

  TrackerParams params_;
  TrackerState state_;
  Index first_frame_ = 0;
  double omega_ = 0.0;
  double xi_ = 0.0;
  VectorXd prev_l_hat_;
  std::vector<Epoch> epochs_;
  std::vector<Refinement> refinements_;
  std::vector<Support> supports_;
  std::vector<Index> detections_;
  std::int64_t shrinkage_iterations_ = 0;
};

// Offline pass: each frame is re-solved by LS on its recorded support with
// the projector built from [P_{j-1}, (I - P_{j-1} P_{j-1}') P_j]. Column c
// of `y` is frame first_frame + c. Returns the smoothed l_hat matrix.
struct OfflineResult {
  MatrixXd l_hat;
  int dropped_directions = 0;  // dependent union directions removed
};

OfflineResult offline_smooth(const MatrixXd& y, Index first_frame, const std::vector<Support>& supports,
                             const std::vector<Epoch>& epochs, const LsOptions& ls = {});

// [P1, (I - P1 P1') P2] orthonormalized; directions of P2 within 1e-6 of
// span(P1) are dropped.
Basis union_basis(const Basis& p1, const Basis& p2, int* dropped = nullptr);

}  // namespace norst
