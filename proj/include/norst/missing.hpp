#pragma once

#include "norst/geometry.hpp"
#include "norst/sparse_recovery.hpp"
#include "norst/tracker.hpp"

#include <span>

namespace norst {

// Missing entries are stored as zeros, with the index set alongside.
struct MaskedFrame {
  VectorXd y_obs;
  Support missing;

  // Zeroes y on `missing`. Throws InvalidArgument on a bad index set.
  static MaskedFrame from_full(const VectorXd& y, Support missing);
};

// LS fill of the known missing set, then the tracker's detect/update
// machinery. No l1 work is done.
FrameEstimate mc_process_frame(NorstTracker& tracker, const MaskedFrame& frame);

struct CoherenceGate {
  bool pass = true;
  double value = 0.0;      // 2 s mu r_bar / n
  double threshold = 0.01;
};

// Checks 2 s mu r_bar / n < threshold with mu from the basis rows and
// r_bar = max(r, ln n).
CoherenceGate coherence_gate(const Basis& p_init, Index s, double threshold = 0.01);

}  // namespace norst
