#pragma once

#include "norst/geometry.hpp"
#include "norst/sparse_recovery.hpp"
#include "norst/tracker.hpp"

#include <optional>
#include <vector>

namespace norst {

struct FrameMetrics {
  Index t = 0;
  double sin_theta = 0.0;  // sin_theta_max(P_hat_(t), P_(t))
  double rel_err_l = 0.0;  // ||l_hat - l|| / ||l||
  double support_precision = 1.0;
  double support_recall = 1.0;
  int detected_epoch = 0;  // tracker epoch after the frame
};

struct DetectionEvent {
  Index t_true = 0;
  std::optional<Index> t_hat;  // first detection in [t_j, t_{j+1})
  Index delay = 0;             // t_hat - t_true when detected
};

struct MetricsReport {
  std::vector<FrameMetrics> frames;
  double rel_frob_online = 0.0;  // ||L_hat - L||_F / ||L||_F over tracked frames
  std::optional<double> rel_frob_offline;
  std::vector<DetectionEvent> detections;
  std::vector<Index> false_detections;  // detections no true change accounts for
  double support_exact_rate = 1.0;      // T_hat == T on settled frames
  Index settled_frames = 0;
  double ms_per_frame = 0.0;
};

// |A and B| / |A|, with 1 for empty A. Both sorted.
double support_precision(const Support& est, const Support& truth);
// |A and B| / |B|, with 1 for empty B.
double support_recall(const Support& est, const Support& truth);

// Running sums for ||L_hat - L||_F / ||L||_F.
class FrobAccumulator {
 public:
  void add(const VectorXd& l_hat, const VectorXd& l) {
    err_ += (l_hat - l).squaredNorm();
    ref_ += l.squaredNorm();
  }
  double value() const;

 private:
  double err_ = 0.0;
  double ref_ = 0.0;
};

double rel_frobenius_error(const MatrixXd& l_hat, const MatrixXd& l);

// Pairs each true change with the first detection in its epoch; other
// detections are false.
void match_detections(const std::vector<Index>& change_times, Index d, const std::vector<Index>& detected,
                      MetricsReport& report);

}  // namespace norst
