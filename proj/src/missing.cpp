#include "norst/missing.hpp"

#include "norst/error.hpp"

#include <algorithm>
#include <cmath>

namespace norst {

MaskedFrame MaskedFrame::from_full(const VectorXd& y, Support missing) {
  for (std::size_t k = 0; k < missing.size(); ++k) {
    if (missing[k] < 0 || missing[k] >= y.size()) throw InvalidArgument("MaskedFrame: missing index out of range");
    if (k > 0 && missing[k] <= missing[k - 1]) throw InvalidArgument("MaskedFrame: missing set must be sorted and unique");
  }
  MaskedFrame f{y, std::move(missing)};
  for (Index i : f.missing) f.y_obs(i) = 0.0;
  return f;
}

FrameEstimate mc_process_frame(NorstTracker& tracker, const MaskedFrame& frame) {
  return tracker.process_frame_with_support(frame.y_obs, frame.missing);
}

CoherenceGate coherence_gate(const Basis& p_init, Index s, double threshold) {
  CoherenceGate g;
  g.threshold = threshold;
  if (s <= 0 || p_init.is_empty()) return g;
  const double n = static_cast<double>(p_init.ambient_dim());
  const double r = static_cast<double>(p_init.dim());
  const double r_bar = std::max(r, std::log(n));
  // mu r_bar / n with mu measured against r_bar.
  const double max_row = p_init.matrix().rowwise().squaredNorm().maxCoeff();
  const double mu = n / r_bar * max_row;
  g.value = 2.0 * static_cast<double>(s) * mu * r_bar / n;
  g.pass = g.value < threshold;
  return g;
}

}  // namespace norst
