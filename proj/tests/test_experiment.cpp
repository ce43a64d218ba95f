#include <doctest.h>

#include "norst/config.hpp"
#include "norst/error.hpp"
#include "norst/experiment.hpp"
#include "norst/metrics.hpp"

#include <filesystem>
#include <fstream>

#include <unistd.h>

using namespace norst;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("norst_exp_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_ini(const std::string& name, const std::string& body) {
  const fs::path p = scratch(name);
  std::ofstream os(p, std::ios::trunc);
  os << body;
  return p;
}

ExperimentConfig small_run() {
  ExperimentConfig c = desk_profile();
  c.scenario.d = 2000;
  c.scenario.change_times = {1000};
  c.write_frames = false;
  c.keep_estimates = true;
  return c;
}

}  // namespace

TEST_CASE("profiles") {
  const ExperimentConfig p = benchmark_profile();
  CHECK(p.scenario.n == 1000);
  CHECK(p.scenario.d == 12000);
  CHECK(p.scenario.r == 30);
  CHECK(p.alpha == 300);
  CHECK(p.K == 8);
  CHECK(p.scenario.change_times == std::vector<Index>{3000, 8000});
  CHECK(p.scenario.support.s == 50);
  CHECK(p.scenario.support.dwell == 90);
  const TrackerParams tp = p.tracker_params();
  CHECK(tp.omega_supp == 5.0);
  CHECK(tp.xi == doctest::Approx(10.0 / 15.0));
  CHECK(tp.lambda_thresh == doctest::Approx(7.5e-4).epsilon(1e-9));

  const ExperimentConfig d = desk_profile();
  CHECK(d.scenario.n == 200);
  CHECK(d.alpha == 100);
}

TEST_CASE("config file overrides and rejects unknown keys") {
  const fs::path ok = write_ini("ok.ini",
                                "[run]\nprofile = desk\nmode = offline\ntrials = 3\nseed = 7\n"
                                "[scenario]\nn = 120\nsupport_model = bernoulli\nrho = 0.1\n"
                                "[tracker]\nalpha = 80\nx_min = 8\n");
  const LoadedConfig lc = load_config(ok);
  CHECK(lc.cfg.mode == RunMode::kOffline);
  CHECK(lc.cfg.trials == 3);
  CHECK(lc.cfg.seed == 7);
  CHECK(lc.cfg.scenario.n == 120);
  CHECK(lc.cfg.alpha == 80);
  CHECK(lc.cfg.scenario.support.kind == SupportKind::kBernoulli);
  CHECK(lc.cfg.scenario.support.rho == 0.1);
  CHECK(lc.cfg.tracker_params().omega_supp == 4.0);

  CHECK_THROWS_AS(load_config(write_ini("k.ini", "[tracker]\nbeta = 1\n")), ConfigError);
  CHECK_THROWS_AS(load_config(write_ini("s.ini", "[extra]\na = 1\n")), ConfigError);
  CHECK_THROWS_AS(load_config(write_ini("v.ini", "[scenario]\nn = ten\n")), ConfigError);
  CHECK_THROWS_AS(load_config(write_ini("m.ini", "[run]\nmode = sideways\n")), Error);
  try {
    load_config(write_ini("p.ini", "[run]\ntrials = 2\nthis line is not ini\n"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load_config(scratch("absent.ini")), IoError);
}

TEST_CASE("list parsing and run modes") {
  CHECK(parse_double_list("0.5, 5,10") == std::vector<double>{0.5, 5.0, 10.0});
  CHECK(parse_index_list("1000,2000") == std::vector<Index>{1000, 2000});
  CHECK_THROWS(parse_index_list("1,x"));
  for (RunMode m : {RunMode::kAuto, RunMode::kKnown, RunMode::kOffline, RunMode::kMc}) {
    CHECK(run_mode_from_string(to_string(m)) == m);
  }
}

TEST_CASE("support precision and recall") {
  CHECK(support_precision({1, 2, 3}, {2, 3, 4}) == doctest::Approx(2.0 / 3.0));
  CHECK(support_recall({1, 2}, {2, 3, 4, 5}) == doctest::Approx(0.25));
  CHECK(support_precision({}, {1}) == 1.0);
  CHECK(support_recall({1}, {}) == 1.0);
}

TEST_CASE("detections are matched to their epoch") {
  MetricsReport rep;
  match_detections({1000, 2000}, 3000, {450, 1099, 1300, 2098}, rep);
  REQUIRE(rep.detections.size() == 2);
  CHECK(rep.detections[0].t_hat == 1099);
  CHECK(rep.detections[0].delay == 99);
  CHECK(rep.detections[1].t_hat == 2098);
  CHECK(rep.false_detections == std::vector<Index>{450, 1300});
}

TEST_CASE("trials replay bit for bit, serial or parallel") {
  ExperimentConfig c = small_run();
  c.mode = RunMode::kOffline;
  const TrialResult a = run_trial(c, 5);
  const TrialResult b = run_trial(c, 5);
  REQUIRE(a.ok);
  CHECK(a.l_hat == b.l_hat);
  CHECK(a.l_hat_offline == b.l_hat_offline);
  CHECK(a.detections == b.detections);
  REQUIRE(a.metrics.frames.size() == b.metrics.frames.size());
  for (std::size_t i = 0; i < a.metrics.frames.size(); ++i) {
    REQUIRE(a.metrics.frames[i].sin_theta == b.metrics.frames[i].sin_theta);
    REQUIRE(a.metrics.frames[i].rel_err_l == b.metrics.frames[i].rel_err_l);
  }

  c.trials = 3;
  c.seed = 4;
  c.parallel = true;
  c.threads = 3;
  const ExperimentSummary par = run_experiment(c);
  REQUIRE(par.trials.size() == 3);
  CHECK(par.trials[1].seed == 5);
  CHECK(par.trials[1].l_hat == a.l_hat);
}

TEST_CASE("offline error is below online error on a desk run") {
  ExperimentConfig c = small_run();
  c.mode = RunMode::kOffline;
  const TrialResult t = run_trial(c, 2);
  REQUIRE(t.ok);
  REQUIRE(t.metrics.rel_frob_offline.has_value());
  CHECK(*t.metrics.rel_frob_offline < t.metrics.rel_frob_online);
  CHECK(t.metrics.rel_frob_online < 1e-2);
  REQUIRE(t.metrics.detections.size() == 1);
  CHECK(t.metrics.detections[0].t_hat.has_value());
  CHECK(t.metrics.false_detections.empty());
}

TEST_CASE("run_experiment writes frames and a summary") {
  ExperimentConfig c = small_run();
  c.keep_estimates = false;
  c.write_frames = true;
  c.out_dir = scratch("run");
  c.seed = 3;
  run_experiment(c);
  CHECK(fs::exists(c.out_dir / "summary.json"));
  CHECK(fs::exists(c.out_dir / "frames_seed3.csv"));
}

TEST_CASE("phase grid: no outliers means success everywhere") {
  ExperimentConfig c = desk_profile();
  c.scenario.d = 1200;
  c.scenario.change_times = {600};
  c.write_frames = false;
  const PhaseGrid g = run_phase_transition(c, {5, 10}, {0.0}, 2, 0.5);
  CHECK(g.success.rows() == 2);
  CHECK(g.success.cols() == 1);
  CHECK(g.success(0, 0) == 1.0);
  CHECK(g.success(1, 0) == 1.0);
}

TEST_CASE("invalid experiment settings are rejected") {
  ExperimentConfig c = desk_profile();
  c.alpha = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = desk_profile();
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = desk_profile();
  c.tracker_xmin = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
