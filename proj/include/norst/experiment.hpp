#pragma once

#include "norst/init.hpp"
#include "norst/metrics.hpp"
#include "norst/scenario.hpp"
#include "norst/tracker.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace norst {

enum class RunMode { kAuto, kKnown, kOffline, kMc };

const char* to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);

struct ExperimentConfig {
  ScenarioConfig scenario;
  RunMode mode = RunMode::kAuto;

  Index alpha = 100;
  int K = 8;
  // Target subspace accuracy; lambda_thresh = 2 zeta^2 lambda_plus. The
  // default gives 7.5e-4 at f = 50.
  double zeta = 0.0047434164902525690;
  std::optional<double> lambda_plus;    // default: largest coefficient variance
  std::optional<double> lambda_thresh;  // overrides the zeta rule
  std::optional<double> tracker_xmin;   // x_min the tracker assumes; default scenario.x_min
  bool adaptive_xmin = false;
  XiMode xi_mode = XiMode::kConstant;
  bool refine_initial = true;

  InitMode init = InitMode::kAltProjLite;
  double oracle_target = 0.01;
  int init_iters = 0;

  double missing_rho = 0.05;  // mc mode

  int trials = 1;
  std::uint64_t seed = 1;
  bool parallel = false;
  int threads = 0;  // 0: NORST_THREADS or hardware concurrency
  std::filesystem::path out_dir;
  bool write_frames = true;  // per-frame CSV for each trial
  bool keep_estimates = false;  // keep L_hat in the trial result

  void validate() const;
  TrackerParams tracker_params() const;
  double effective_lambda_plus() const;
};

// Desk-scale defaults: n = 200, d = 3000, r = 10, alpha = 100, changes at
// 1000 and 2000, moving-object outliers.
ExperimentConfig desk_profile();
// n = 1000, d = 12000, r = 30, alpha = 300, changes at 3000 and 8000.
ExperimentConfig benchmark_profile();

struct RefinementRecord {
  int epoch = 0;
  int k = 0;
  Index t = 0;
  int true_epoch = 0;
  double sin_theta = 0.0;  // against the true subspace of that epoch
};

struct EpochRecord {
  int index = 0;
  Index t_hat = 0;
  Index t_fin = -1;
  int true_epoch = 0;
  double sin_theta = 0.0;  // final (or latest) estimate vs truth
};

struct TrialResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricsReport metrics;
  std::vector<RefinementRecord> refinements;
  std::vector<EpochRecord> epochs;
  std::vector<Index> detections;
  double init_sin_theta = 0.0;
  double final_sin_theta = 0.0;
  std::int64_t shrinkage_iterations = 0;
  MatrixXd l_hat;          // when keep_estimates
  MatrixXd l_hat_offline;  // when keep_estimates and offline
  Index first_frame = 0;
};

struct Quantiles {
  double mean = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

Quantiles summarize(std::vector<double> v);

struct ExperimentSummary {
  std::vector<TrialResult> trials;
  int failed = 0;
  Quantiles online;
  std::optional<Quantiles> offline;
  Quantiles final_sin_theta;
};

// One trial with scenario seed `seed`. Algorithm errors are caught and
// recorded in the result.
TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t seed);
// Same, on an existing scenario (its own config replaces cfg.scenario).
TrialResult run_trial_on(const ExperimentConfig& cfg, const Scenario& sc, std::uint64_t seed);

// Trials cfg.seed, cfg.seed + 1, ...; writes per-trial CSV and summary.json
// under cfg.out_dir when set. Throws NumericalError if every trial failed.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

struct PhaseGrid {
  std::vector<Index> r_grid;
  std::vector<double> b0_grid;
  MatrixXd success;  // rows follow r_grid, columns b0_grid
};

// Bernoulli(b0) supports, subspace change 10x the base gamma, training
// fraction 0.02; success when the relative Frobenius error (offline when
// cfg.mode is kOffline) is below success_threshold. Trial errors count as
// failures.
PhaseGrid run_phase_transition(const ExperimentConfig& base, const std::vector<Index>& r_grid,
                               const std::vector<double>& b0_grid, int trials, double success_threshold);

struct XminCurve {
  double x_min = 0.0;
  std::vector<double> sin_theta;  // mean over trials, per tracked frame
  Index first_frame = 0;
  Quantiles final_sin_theta;
  Quantiles rel_frob;
};

// Constant-magnitude outliers at each value. omega and xi follow the swept
// value unless cfg.tracker_xmin pins them.
std::vector<XminCurve> run_xmin_sweep(const std::vector<double>& xmin_values, const ExperimentConfig& cfg);

// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);
int resolve_threads(const ExperimentConfig& cfg);

void write_phase_grid(const std::filesystem::path& path, const PhaseGrid& grid);
void write_xmin_curves(const std::filesystem::path& path, const std::vector<XminCurve>& curves);
void write_summary_json(const std::filesystem::path& path, const ExperimentConfig& cfg, const ExperimentSummary& s);

}  // namespace norst
