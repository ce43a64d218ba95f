#include "norst/config.hpp"
#include "norst/error.hpp"
#include "norst/experiment.hpp"
#include "norst/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace norst;

namespace {

// Exit codes by failure category.
enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfig = 3,
  kInvalid = 4,
  kIo = 5,
  kParse = 6,
  kNumerical = 7,
};

struct Flags {
  std::string config;
  std::string profile = "desk";
  std::string mode;
  std::uint64_t seed = 1;
  int trials = 1;
  std::string out_dir;
  Index n = 0, d = 0, r = 0;
  double f = 0.0;
  Index alpha = 0;
  int K = 0;
  double xmin = 0.0;
  double tracker_xmin = 0.0;
  std::string support_model;
  double rho = -1.0;
  double b0 = -1.0;
  std::string change_times;
  bool parallel = false;
  int threads = 0;
  std::string scenario_dir;
  bool save_estimates = false;
};

void add_common(CLI::App* app, Flags& fl) {
  app->add_option("--config", fl.config, "INI config file");
  app->add_option("--profile", fl.profile, "starting defaults: desk or benchmark")->check(CLI::IsMember({"desk", "benchmark"}));
  app->add_option("--mode", fl.mode, "auto, known, offline or mc");
  app->add_option("--seed", fl.seed, "first trial seed");
  app->add_option("--trials", fl.trials, "number of seeded trials")->check(CLI::PositiveNumber);
  app->add_option("--out-dir", fl.out_dir, "output directory");
  app->add_option("--n", fl.n, "ambient dimension");
  app->add_option("--d", fl.d, "frame count");
  app->add_option("--r", fl.r, "subspace dimension");
  app->add_option("--f", fl.f, "coefficient condition number");
  app->add_option("--alpha", fl.alpha, "window length");
  app->add_option("--K", fl.K, "refinement steps per update phase");
  app->add_option("--xmin", fl.xmin, "smallest outlier magnitude in the generated data");
  app->add_option("--tracker-xmin", fl.tracker_xmin, "x_min assumed by the tracker (default: --xmin)");
  app->add_option("--support-model", fl.support_model, "moving_object, bernoulli or none");
  app->add_option("--rho", fl.rho, "Bernoulli outlier probability (missing fraction in mc mode)");
  app->add_option("--b0", fl.b0, "moving-object row fraction per window");
  app->add_option("--change-times", fl.change_times, "comma-separated change frames");
  app->add_flag("--parallel", fl.parallel, "run trials on several threads (capped by NORST_THREADS)");
  app->add_option("--threads", fl.threads, "worker count when --parallel");
}

LoadedConfig build_config(const CLI::App* app, const Flags& fl) {
  LoadedConfig lc = fl.config.empty() ? profile_config(fl.profile) : load_config(fl.config);
  ExperimentConfig& c = lc.cfg;
  ScenarioConfig& s = c.scenario;
  auto given = [app](const char* name) { return app->count(name) > 0; };
  if (given("--mode")) c.mode = run_mode_from_string(fl.mode);
  if (given("--seed")) c.seed = fl.seed;
  if (given("--trials")) c.trials = fl.trials;
  if (given("--out-dir")) c.out_dir = fl.out_dir;
  if (given("--n")) s.n = fl.n;
  if (given("--d")) s.d = fl.d;
  if (given("--r")) s.r = fl.r;
  if (given("--f")) s.f = fl.f;
  if (given("--alpha")) c.alpha = fl.alpha;
  if (given("--K")) c.K = fl.K;
  if (given("--xmin")) {
    s.x_min = fl.xmin;
    s.x_max = std::max(s.x_max, fl.xmin);
  }
  if (given("--tracker-xmin")) c.tracker_xmin = fl.tracker_xmin;
  if (given("--support-model")) lc.support.model = fl.support_model;
  if (given("--rho")) {
    if (c.mode == RunMode::kMc) c.missing_rho = fl.rho;
    else lc.support.rho = fl.rho;
  }
  if (given("--b0")) lc.support.b0 = fl.b0;
  if (given("--change-times")) s.change_times = parse_index_list(fl.change_times);
  if (given("--parallel")) c.parallel = fl.parallel;
  if (given("--threads")) c.threads = fl.threads;
  resolve_supports(lc);
  return lc;
}

void print_summary(const ExperimentConfig& cfg, const ExperimentSummary& s) {
  std::printf("mode=%s trials=%d failed=%d\n", to_string(cfg.mode), cfg.trials, s.failed);
  std::printf("rel_frob_online   mean=%.4e median=%.4e q10=%.4e q90=%.4e\n", s.online.mean, s.online.median,
              s.online.q10, s.online.q90);
  if (s.offline) {
    std::printf("rel_frob_offline  mean=%.4e median=%.4e q10=%.4e q90=%.4e\n", s.offline->mean, s.offline->median,
                s.offline->q10, s.offline->q90);
  }
  std::printf("final_sin_theta   mean=%.4e median=%.4e\n", s.final_sin_theta.mean, s.final_sin_theta.median);
  for (const TrialResult& t : s.trials) {
    if (!t.ok) {
      std::printf("seed %llu failed: %s\n", static_cast<unsigned long long>(t.seed), t.error.c_str());
      continue;
    }
    for (const DetectionEvent& ev : t.metrics.detections) {
      if (ev.t_hat) {
        std::printf("seed %llu change %ld detected at %ld (delay %ld)\n", static_cast<unsigned long long>(t.seed),
                    static_cast<long>(ev.t_true), static_cast<long>(*ev.t_hat), static_cast<long>(ev.delay));
      } else {
        std::printf("seed %llu change %ld missed\n", static_cast<unsigned long long>(t.seed), static_cast<long>(ev.t_true));
      }
    }
    for (Index fd : t.metrics.false_detections) {
      std::printf("seed %llu false detection at %ld\n", static_cast<unsigned long long>(t.seed), static_cast<long>(fd));
    }
  }
}

int run_track(const CLI::App* app, const Flags& fl, RunMode forced, bool force) {
  LoadedConfig lc = build_config(app, fl);
  ExperimentConfig& c = lc.cfg;
  if (force) c.mode = forced;
  if (!fl.scenario_dir.empty()) {
    const Scenario sc = load_scenario(fl.scenario_dir);
    c.scenario = sc.cfg;
    c.keep_estimates = fl.save_estimates;
    const TrialResult t = run_trial_on(c, sc, sc.seed);
    if (!t.ok) throw NumericalError("tracking failed: " + t.error);
    ExperimentSummary s;
    s.trials.push_back(t);
    s.online = summarize({t.metrics.rel_frob_online});
    if (t.metrics.rel_frob_offline) s.offline = summarize({*t.metrics.rel_frob_offline});
    s.final_sin_theta = summarize({t.final_sin_theta});
    c.trials = 1;
    if (!c.out_dir.empty()) {
      std::filesystem::create_directories(c.out_dir);
      write_metrics_csv(c.out_dir / "frames.csv", t.metrics.frames);
      write_summary_json(c.out_dir / "summary.json", c, s);
      if (fl.save_estimates) {
        write_matrix(c.out_dir / "L_hat.nrst", t.l_hat);
        if (t.l_hat_offline.size() > 0) write_matrix(c.out_dir / "L_hat_offline.nrst", t.l_hat_offline);
      }
    }
    print_summary(c, s);
    return kOk;
  }
  const ExperimentSummary s = run_experiment(c);
  print_summary(c, s);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming robust subspace tracking experiments"};
  app.require_subcommand(1);
  Flags fl;

  auto* sim = app.add_subcommand("simulate", "generate a scenario and save it to --out-dir");
  add_common(sim, fl);

  auto* track = app.add_subcommand("track", "run the tracker on generated or saved scenarios");
  add_common(track, fl);
  track->add_option("--scenario", fl.scenario_dir, "saved scenario directory");
  track->add_flag("--save-estimates", fl.save_estimates, "write L_hat.nrst next to the metrics (saved scenario only)");

  auto* mc = app.add_subcommand("mc", "missing-data mode with Bernoulli masks");
  add_common(mc, fl);

  std::string r_grid = "5,10,15";
  std::string b0_grid = "0,0.1,0.2,0.3,0.4";
  double threshold = 0.5;
  auto* phase = app.add_subcommand("phase", "phase-transition grid over r and b0");
  add_common(phase, fl);
  phase->add_option("--r-grid", r_grid, "comma-separated r values");
  phase->add_option("--b0-grid", b0_grid, "comma-separated outlier fractions");
  phase->add_option("--threshold", threshold, "success threshold on the relative error");

  std::string xmin_values = "0.5,5,10";
  auto* xmin = app.add_subcommand("xmin", "constant-magnitude sweep over x_min");
  add_common(xmin, fl);
  xmin->add_option("--xmin-values", xmin_values, "comma-separated x_min values");

  std::string estimates;
  auto* report = app.add_subcommand("report", "recompute metrics from saved estimates");
  report->add_option("--scenario", fl.scenario_dir, "saved scenario directory")->required();
  report->add_option("--estimates", estimates, "L_hat container written by track")->required();
  report->add_option("--out-dir", fl.out_dir, "where to write report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (sim->parsed()) {
      LoadedConfig lc = build_config(sim, fl);
      if (lc.cfg.out_dir.empty()) throw ConfigError("simulate needs --out-dir");
      const Scenario sc = gen_scenario(lc.cfg.scenario, lc.cfg.seed);
      save_scenario(lc.cfg.out_dir, sc);
      std::printf("wrote scenario n=%ld d=%ld r=%ld to %s\n", static_cast<long>(sc.n()), static_cast<long>(sc.d()),
                  static_cast<long>(lc.cfg.scenario.r), lc.cfg.out_dir.c_str());
      return kOk;
    }
    if (track->parsed()) return run_track(track, fl, RunMode::kAuto, false);
    if (mc->parsed()) return run_track(mc, fl, RunMode::kMc, true);
    if (phase->parsed()) {
      LoadedConfig lc = build_config(phase, fl);
      const PhaseGrid g = run_phase_transition(lc.cfg, parse_index_list(r_grid), parse_double_list(b0_grid),
                                               lc.cfg.trials, threshold);
      if (!lc.cfg.out_dir.empty()) {
        std::filesystem::create_directories(lc.cfg.out_dir);
        write_phase_grid(lc.cfg.out_dir / "phase_grid.dat", g);
      }
      std::printf("r \\ b0");
      for (double b : g.b0_grid) std::printf(" %6.2f", b);
      std::printf("\n");
      for (std::size_t i = 0; i < g.r_grid.size(); ++i) {
        std::printf("%6ld", static_cast<long>(g.r_grid[i]));
        for (Index j = 0; j < g.success.cols(); ++j) std::printf(" %6.2f", g.success(static_cast<Index>(i), j));
        std::printf("\n");
      }
      return kOk;
    }
    if (xmin->parsed()) {
      LoadedConfig lc = build_config(xmin, fl);
      const auto curves = run_xmin_sweep(parse_double_list(xmin_values), lc.cfg);
      if (!lc.cfg.out_dir.empty()) {
        std::filesystem::create_directories(lc.cfg.out_dir);
        write_xmin_curves(lc.cfg.out_dir / "xmin_curves.dat", curves);
      }
      for (const XminCurve& cv : curves) {
        std::printf("x_min=%g final_sin_theta median=%.4e rel_frob median=%.4e\n", cv.x_min, cv.final_sin_theta.median,
                    cv.rel_frob.median);
      }
      return kOk;
    }
    if (report->parsed()) {
      const Scenario sc = load_scenario(fl.scenario_dir);
      const MatrixXd l_hat = read_matrix(estimates);
      if (l_hat.rows() != sc.n() || l_hat.cols() > sc.d()) {
        throw DimensionMismatch("estimates have shape " + std::to_string(l_hat.rows()) + "x" +
                                std::to_string(l_hat.cols()) + ", scenario is " + std::to_string(sc.n()) + "x" +
                                std::to_string(sc.d()));
      }
      const Index first = sc.d() - l_hat.cols();
      const double err = rel_frobenius_error(l_hat, sc.L.rightCols(l_hat.cols()));
      nlohmann::json j = {{"first_frame", first}, {"frames", l_hat.cols()}, {"rel_frob", err}};
      if (!fl.out_dir.empty()) {
        std::filesystem::create_directories(fl.out_dir);
        std::ofstream os(std::filesystem::path(fl.out_dir) / "report.json");
        if (!os) throw IoError("cannot write report.json under " + fl.out_dir);
        os << j.dump(2) << '\n';
      }
      std::printf("rel_frob=%.6e over %ld frames starting at %ld\n", err, static_cast<long>(l_hat.cols()),
                  static_cast<long>(first));
      return kOk;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.category()) {
      case ErrorCategory::kConfig:
        return kConfig;
      case ErrorCategory::kInvalidArgument:
        return kInvalid;
      case ErrorCategory::kIo:
        return kIo;
      case ErrorCategory::kParse:
        return kParse;
      case ErrorCategory::kNumerical:
        return kNumerical;
    }
    return kFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kUsage;
}
