#include "norst/metrics.hpp"

#include "norst/error.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

namespace norst {

namespace {

std::size_t intersection_size(const Support& a, const Support& b) {
  std::size_t i = 0, j = 0, c = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++c;
      ++i;
      ++j;
    }
  }
  return c;
}

}  // namespace

double support_precision(const Support& est, const Support& truth) {
  if (est.empty()) return 1.0;
  return static_cast<double>(intersection_size(est, truth)) / static_cast<double>(est.size());
}

double support_recall(const Support& est, const Support& truth) {
  if (truth.empty()) return 1.0;
  return static_cast<double>(intersection_size(est, truth)) / static_cast<double>(truth.size());
}

double FrobAccumulator::value() const {
  if (ref_ <= 0.0) return err_ > 0.0 ? INFINITY : 0.0;
  return std::sqrt(err_ / ref_);
}

double rel_frobenius_error(const MatrixXd& l_hat, const MatrixXd& l) {
  if (l_hat.rows() != l.rows() || l_hat.cols() != l.cols()) {
    throw DimensionMismatch("rel_frobenius_error: shapes differ");
  }
  const double ref = l.norm();
  if (ref == 0.0) return (l_hat - l).norm() == 0.0 ? 0.0 : INFINITY;
  return (l_hat - l).norm() / ref;
}

void match_detections(const std::vector<Index>& change_times, Index d, const std::vector<Index>& detected,
                      MetricsReport& report) {
  report.detections.clear();
  report.false_detections.clear();
  std::vector<bool> used(detected.size(), false);
  for (std::size_t j = 0; j < change_times.size(); ++j) {
    DetectionEvent ev;
    ev.t_true = change_times[j];
    const Index end = j + 1 < change_times.size() ? change_times[j + 1] : d;
    for (std::size_t k = 0; k < detected.size(); ++k) {
      if (!used[k] && detected[k] >= ev.t_true && detected[k] < end) {
        ev.t_hat = detected[k];
        ev.delay = detected[k] - ev.t_true;
        used[k] = true;
        break;
      }
    }
    report.detections.push_back(ev);
  }
  for (std::size_t k = 0; k < detected.size(); ++k) {
    if (!used[k]) report.false_detections.push_back(detected[k]);
  }
}

}  // namespace norst
