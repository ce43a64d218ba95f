#include "norst/experiment.hpp"

#include "norst/error.hpp"
#include "norst/io.hpp"
#include "norst/missing.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace norst {

const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::kAuto:
      return "auto";
    case RunMode::kKnown:
      return "known";
    case RunMode::kOffline:
      return "offline";
    case RunMode::kMc:
      return "mc";
  }
  return "auto";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "auto" || s == "norst_auto") return RunMode::kAuto;
  if (s == "known" || s == "norst_known") return RunMode::kKnown;
  if (s == "offline" || s == "norst_offline") return RunMode::kOffline;
  if (s == "mc") return RunMode::kMc;
  throw ConfigError("unknown mode '" + s + "' (expected auto, known, offline or mc)");
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (alpha < scenario.r) throw ConfigError("alpha must be at least r");
  if (K < 1) throw ConfigError("K must be at least 1");
  if (!(zeta > 0.0)) throw ConfigError("zeta must be positive");
  if (mode == RunMode::kMc && !(missing_rho >= 0.0 && missing_rho < 1.0)) {
    throw ConfigError("missing_rho must lie in [0, 1)");
  }
  if (tracker_xmin && !(*tracker_xmin > 0.0)) throw ConfigError("tracker x_min must be positive");
  if (mode != RunMode::kMc && init == InitMode::kAltProjLite && scenario.t_train < scenario.r) {
    throw ConfigError("t_train must be at least r for the AltProj-style initializer");
  }
}

double ExperimentConfig::effective_lambda_plus() const {
  if (lambda_plus) return *lambda_plus;
  return CoeffModel{scenario.r, scenario.f}.lambdas().maxCoeff();
}

TrackerParams ExperimentConfig::tracker_params() const {
  const double xm = tracker_xmin.value_or(scenario.x_min);
  TrackerParams p;
  p.r = scenario.r;
  p.K = K;
  p.alpha = alpha;
  p.omega_supp = xm / 2.0;
  p.xi = xm / 15.0;
  p.lambda_thresh = lambda_thresh.value_or(2.0 * zeta * zeta * effective_lambda_plus());
  p.adaptive_xmin = adaptive_xmin;
  p.xi_mode = xi_mode;
  p.refine_initial = refine_initial;
  p.retain_history = mode == RunMode::kOffline;
  return p;
}

ExperimentConfig desk_profile() {
  ExperimentConfig c;
  ScenarioConfig& s = c.scenario;
  s.n = 200;
  s.d = 3000;
  s.r = 10;
  s.f = 50.0;
  s.change_times = {1000, 2000};
  s.gamma = 0.001;
  s.t_train = 100;
  c.alpha = 100;
  c.K = 8;
  s.train_support = SupportModel::moving_object(2, 0.01, c.alpha);
  s.support = SupportModel::moving_object(10, 0.3, c.alpha);
  s.budget_alpha = c.alpha;
  return c;
}

ExperimentConfig benchmark_profile() {
  ExperimentConfig c;
  ScenarioConfig& s = c.scenario;
  s.n = 1000;
  s.d = 12000;
  s.r = 30;
  s.f = 50.0;
  s.change_times = {3000, 8000};
  s.gamma = 0.001;
  s.t_train = 100;
  c.alpha = 300;
  c.K = 8;
  s.train_support = SupportModel::moving_object(10, 0.01, c.alpha);
  s.support = SupportModel::moving_object(50, 0.3, c.alpha);
  s.budget_alpha = c.alpha;
  return c;
}

Quantiles summarize(std::vector<double> v) {
  Quantiles q;
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  q.mean = sum / static_cast<double>(v.size());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  q.median = at(0.5);
  q.q10 = at(0.1);
  q.q90 = at(0.9);
  return q;
}

namespace {

Basis make_init(const ExperimentConfig& cfg, const Scenario& sc, std::uint64_t seed) {
  const Index r = cfg.scenario.r;
  if (cfg.mode == RunMode::kMc || cfg.init == InitMode::kRandomOrthogonal) {
    return init_random_orthogonal(cfg.scenario.n, r, Rng(seed, "tracker_init").next_u64());
  }
  if (cfg.init == InitMode::kOracle) {
    return init_oracle(sc.subspaces.front(), cfg.oracle_target, Rng(seed, "tracker_init").next_u64());
  }
  InitConfig ic;
  ic.r = r;
  ic.t_train = cfg.scenario.t_train;
  ic.iters = cfg.init_iters;
  return init_altproj_lite(sc.Y.leftCols(cfg.scenario.t_train), ic);
}

// sin theta against the truth, recomputed only when either side changes.
class SinThetaCache {
 public:
  explicit SinThetaCache(const Scenario& sc) : sc_(sc) {}
  double operator()(const std::shared_ptr<const Basis>& est, int true_epoch) {
    if (est.get() != last_ || true_epoch != last_epoch_) {
      last_ = est.get();
      last_epoch_ = true_epoch;
      value_ = sin_theta_max(sc_.subspaces[static_cast<std::size_t>(true_epoch)], *est);
    }
    return value_;
  }

 private:
  const Scenario& sc_;
  const Basis* last_ = nullptr;
  int last_epoch_ = -1;
  double value_ = 0.0;
};

}  // namespace

TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentConfig c = cfg;
  if (c.mode == RunMode::kMc) {
    c.scenario.train_support = SupportModel::none();
    c.scenario.support = SupportModel::none();
  }
  try {
    const Scenario sc = gen_scenario(c.scenario, seed);
    return run_trial_on(c, sc, seed);
  } catch (const Error& e) {
    TrialResult res;
    res.seed = seed;
    res.error = e.what();
    return res;
  }
}

TrialResult run_trial_on(const ExperimentConfig& cfg, const Scenario& sc, std::uint64_t seed) {
  TrialResult res;
  res.seed = seed;
  try {
    ExperimentConfig c = cfg;
    c.scenario = sc.cfg;
    const Index n = sc.n();
    const Index d = sc.d();
    const Index first = c.mode == RunMode::kMc ? 0 : c.scenario.t_train;
    res.first_frame = first;

    Basis p_init = make_init(c, sc, seed);
    res.init_sin_theta = sin_theta_max(sc.subspaces.front(), p_init);
    NorstTracker tracker(std::move(p_init), c.tracker_params(), first);

    std::vector<Support> masks;
    if (c.mode == RunMode::kMc) masks = gen_bernoulli_masks(n, d, c.missing_rho, Rng(seed, "mask_seed").next_u64());

    SinThetaCache sin_cache(sc);
    FrobAccumulator frob;
    MetricsReport& m = res.metrics;
    if (c.write_frames || c.keep_estimates) m.frames.reserve(static_cast<std::size_t>(d - first));
    if (c.keep_estimates) res.l_hat.resize(n, d - first);
    Index settled = 0, settled_exact = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (Index t = first; t < d; ++t) {
      const TrackerState& st = tracker.state();
      const bool eligible = st.phase == Phase::kDetect && sc.epoch_of(t) == sc.epoch_of(std::max<Index>(st.t_hat_fin, 0));
      FrameEstimate est;
      const Support* truth = &sc.supports[static_cast<std::size_t>(t)];
      switch (c.mode) {
        case RunMode::kAuto:
        case RunMode::kOffline:
          est = tracker.process_frame(sc.Y.col(t));
          break;
        case RunMode::kKnown:
          est = tracker.process_frame_known_changes(sc.Y.col(t), c.scenario.change_times);
          break;
        case RunMode::kMc: {
          const MaskedFrame mf = MaskedFrame::from_full(sc.Y.col(t), masks[static_cast<std::size_t>(t)]);
          est = mc_process_frame(tracker, mf);
          truth = &masks[static_cast<std::size_t>(t)];
          break;
        }
      }
      const VectorXd l = sc.L.col(t);
      frob.add(est.l_hat, l);
      if (eligible && c.mode != RunMode::kMc) {
        ++settled;
        if (est.support == *truth) ++settled_exact;
      }
      if (c.keep_estimates) res.l_hat.col(t - first) = est.l_hat;
      FrameMetrics fm;
      fm.t = t;
      fm.sin_theta = sin_cache(est.subspace, sc.epoch_of(t));
      const double ln = l.norm();
      fm.rel_err_l = ln > 0.0 ? (est.l_hat - l).norm() / ln : (est.l_hat - l).norm();
      fm.support_precision = support_precision(est.support, *truth);
      fm.support_recall = support_recall(est.support, *truth);
      fm.detected_epoch = est.epoch;
      res.final_sin_theta = fm.sin_theta;
      if (c.write_frames || c.keep_estimates) m.frames.push_back(fm);
    }
    const auto t1 = std::chrono::steady_clock::now();
    m.ms_per_frame = std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(std::max<Index>(1, d - first));
    m.rel_frob_online = frob.value();
    m.settled_frames = settled;
    m.support_exact_rate = settled > 0 ? static_cast<double>(settled_exact) / static_cast<double>(settled) : 1.0;
    res.detections = tracker.detections();
    match_detections(c.mode == RunMode::kKnown ? std::vector<Index>{} : c.scenario.change_times, d, res.detections, m);
    res.shrinkage_iterations = tracker.shrinkage_iterations();

    for (const Epoch& e : tracker.epochs()) {
      EpochRecord er;
      er.index = e.index;
      er.t_hat = e.t_hat;
      er.t_fin = e.t_fin;
      er.true_epoch = e.index == 0 ? 0 : sc.epoch_of(e.t_hat);
      er.sin_theta = sin_theta_max(sc.subspaces[static_cast<std::size_t>(er.true_epoch)], *e.basis);
      res.epochs.push_back(er);
    }
    for (const Refinement& rf : tracker.refinements()) {
      RefinementRecord rr;
      rr.epoch = rf.epoch;
      rr.k = rf.k;
      rr.t = rf.t;
      rr.true_epoch = res.epochs[static_cast<std::size_t>(rf.epoch)].true_epoch;
      rr.sin_theta = sin_theta_max(sc.subspaces[static_cast<std::size_t>(rr.true_epoch)], *rf.basis);
      res.refinements.push_back(rr);
    }

    if (c.mode == RunMode::kOffline) {
      const OfflineResult off =
          offline_smooth(sc.Y.middleCols(first, d - first), first, tracker.support_history(), tracker.epochs(),
                         c.tracker_params().cs.ls);
      m.rel_frob_offline = rel_frobenius_error(off.l_hat, sc.L.middleCols(first, d - first));
      if (c.keep_estimates) res.l_hat_offline = off.l_hat;
    }
    res.ok = true;
  } catch (const Error& e) {
    res.ok = false;
    res.error = e.what();
  }
  return res;
}

int resolve_threads(const ExperimentConfig& cfg) {
  if (!cfg.parallel) return 1;
  int n = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("NORST_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, n);
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min(threads, count);
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentSummary s;
  s.trials.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, resolve_threads(cfg), [&](int i) {
    s.trials[static_cast<std::size_t>(i)] = run_trial(cfg, cfg.seed + static_cast<std::uint64_t>(i));
  });
  std::vector<double> on, off, fin;
  for (const TrialResult& t : s.trials) {
    if (!t.ok) {
      ++s.failed;
      continue;
    }
    on.push_back(t.metrics.rel_frob_online);
    fin.push_back(t.final_sin_theta);
    if (t.metrics.rel_frob_offline) off.push_back(*t.metrics.rel_frob_offline);
  }
  s.online = summarize(on);
  s.final_sin_theta = summarize(fin);
  if (!off.empty()) s.offline = summarize(off);

  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir.string() + ": " + ec.message());
    if (cfg.write_frames) {
      for (const TrialResult& t : s.trials) {
        if (t.ok) write_metrics_csv(cfg.out_dir / ("frames_seed" + std::to_string(t.seed) + ".csv"), t.metrics.frames);
      }
    }
    write_summary_json(cfg.out_dir / "summary.json", cfg, s);
  }
  if (s.failed == cfg.trials) {
    throw NumericalError("all " + std::to_string(cfg.trials) + " trials failed; first error: " + s.trials.front().error);
  }
  return s;
}

namespace {

nlohmann::json quantiles_json(const Quantiles& q) {
  return {{"mean", q.mean}, {"median", q.median}, {"q10", q.q10}, {"q90", q.q90}};
}

}  // namespace

void write_summary_json(const std::filesystem::path& path, const ExperimentConfig& cfg, const ExperimentSummary& s) {
  nlohmann::json j;
  j["mode"] = to_string(cfg.mode);
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["failed"] = s.failed;
  j["n"] = cfg.scenario.n;
  j["d"] = cfg.scenario.d;
  j["r"] = cfg.scenario.r;
  j["alpha"] = cfg.alpha;
  j["K"] = cfg.K;
  j["rel_frob_online"] = quantiles_json(s.online);
  if (s.offline) j["rel_frob_offline"] = quantiles_json(*s.offline);
  j["final_sin_theta"] = quantiles_json(s.final_sin_theta);
  nlohmann::json per = nlohmann::json::array();
  for (const TrialResult& t : s.trials) {
    nlohmann::json e = {{"seed", t.seed}, {"ok", t.ok}};
    if (!t.ok) {
      e["error"] = t.error;
    } else {
      e["rel_frob_online"] = t.metrics.rel_frob_online;
      if (t.metrics.rel_frob_offline) e["rel_frob_offline"] = *t.metrics.rel_frob_offline;
      e["init_sin_theta"] = t.init_sin_theta;
      e["final_sin_theta"] = t.final_sin_theta;
      e["support_exact_rate"] = t.metrics.support_exact_rate;
      e["ms_per_frame"] = t.metrics.ms_per_frame;
      nlohmann::json det = nlohmann::json::array();
      for (const DetectionEvent& ev : t.metrics.detections) {
        nlohmann::json d = {{"t_true", ev.t_true}};
        if (ev.t_hat) {
          d["t_hat"] = *ev.t_hat;
          d["delay"] = ev.delay;
        } else {
          d["t_hat"] = nullptr;
        }
        det.push_back(d);
      }
      e["detections"] = det;
      e["false_detections"] = t.metrics.false_detections;
    }
    per.push_back(e);
  }
  j["per_trial"] = per;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing (" + path.string() + ")");
  os << j.dump(2) << '\n';
}

PhaseGrid run_phase_transition(const ExperimentConfig& base, const std::vector<Index>& r_grid,
                               const std::vector<double>& b0_grid, int trials, double success_threshold) {
  if (r_grid.empty() || b0_grid.empty()) throw InvalidArgument("run_phase_transition: grids must be nonempty");
  if (trials < 1) throw InvalidArgument("run_phase_transition: trials must be positive");
  PhaseGrid g{r_grid, b0_grid, MatrixXd::Zero(static_cast<Index>(r_grid.size()), static_cast<Index>(b0_grid.size()))};
  struct Job {
    std::size_t ri, bi;
    int trial;
  };
  std::vector<Job> jobs;
  for (std::size_t ri = 0; ri < r_grid.size(); ++ri)
    for (std::size_t bi = 0; bi < b0_grid.size(); ++bi)
      for (int k = 0; k < trials; ++k) jobs.push_back({ri, bi, k});
  std::vector<char> ok(jobs.size(), 0);
  parallel_for(static_cast<int>(jobs.size()), resolve_threads(base), [&](int i) {
    const Job& jb = jobs[static_cast<std::size_t>(i)];
    ExperimentConfig c = base;
    c.write_frames = false;
    c.scenario.r = r_grid[jb.ri];
    c.scenario.gamma = base.scenario.gamma * 10.0;
    c.scenario.train_support = SupportModel::bernoulli(0.02);
    c.scenario.support = SupportModel::bernoulli(b0_grid[jb.bi]);
    c.alpha = std::max(base.alpha, c.scenario.r);
    const TrialResult t = run_trial(c, base.seed + static_cast<std::uint64_t>(jb.trial));
    if (!t.ok) return;
    const double err = (base.mode == RunMode::kOffline && t.metrics.rel_frob_offline) ? *t.metrics.rel_frob_offline
                                                                                     : t.metrics.rel_frob_online;
    ok[static_cast<std::size_t>(i)] = err < success_threshold ? 1 : 0;
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    g.success(static_cast<Index>(jobs[i].ri), static_cast<Index>(jobs[i].bi)) += ok[i];
  }
  g.success /= static_cast<double>(trials);
  return g;
}

std::vector<XminCurve> run_xmin_sweep(const std::vector<double>& xmin_values, const ExperimentConfig& cfg) {
  if (xmin_values.empty()) throw InvalidArgument("run_xmin_sweep: no x_min values");
  std::vector<XminCurve> out;
  for (double xm : xmin_values) {
    if (!(xm > 0.0)) throw InvalidArgument("run_xmin_sweep: x_min must be positive");
    ExperimentConfig c = cfg;
    c.scenario.x_min = xm;
    c.scenario.x_max = xm;
    c.scenario.magnitude = MagnitudeMode::kConstant;
    c.write_frames = true;
    c.out_dir.clear();
    std::vector<TrialResult> trials(static_cast<std::size_t>(c.trials));
    parallel_for(c.trials, resolve_threads(c), [&](int i) {
      trials[static_cast<std::size_t>(i)] = run_trial(c, c.seed + static_cast<std::uint64_t>(i));
    });
    XminCurve curve;
    curve.x_min = xm;
    std::vector<double> fin, frob;
    int used = 0;
    for (const TrialResult& t : trials) {
      if (!t.ok) continue;
      curve.first_frame = t.first_frame;
      if (curve.sin_theta.empty()) curve.sin_theta.assign(t.metrics.frames.size(), 0.0);
      for (std::size_t k = 0; k < t.metrics.frames.size() && k < curve.sin_theta.size(); ++k) {
        curve.sin_theta[k] += t.metrics.frames[k].sin_theta;
      }
      fin.push_back(t.final_sin_theta);
      frob.push_back(t.metrics.rel_frob_online);
      ++used;
    }
    if (used == 0) throw NumericalError("run_xmin_sweep: every trial failed at x_min = " + std::to_string(xm));
    for (double& v : curve.sin_theta) v /= used;
    curve.final_sin_theta = summarize(fin);
    curve.rel_frob = summarize(frob);
    out.push_back(std::move(curve));
  }
  return out;
}

void write_phase_grid(const std::filesystem::path& path, const PhaseGrid& grid) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing (" + path.string() + ")");
  os << "# r b0 success\n";
  for (std::size_t ri = 0; ri < grid.r_grid.size(); ++ri) {
    for (std::size_t bi = 0; bi < grid.b0_grid.size(); ++bi) {
      os << grid.r_grid[ri] << ' ' << grid.b0_grid[bi] << ' '
         << grid.success(static_cast<Index>(ri), static_cast<Index>(bi)) << '\n';
    }
    os << '\n';  // gnuplot block separator
  }
}

void write_xmin_curves(const std::filesystem::path& path, const std::vector<XminCurve>& curves) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing (" + path.string() + ")");
  os.precision(10);
  os << "# t";
  for (const XminCurve& c : curves) os << " sin_theta_xmin_" << c.x_min;
  os << '\n';
  if (curves.empty()) return;
  const std::size_t len = curves.front().sin_theta.size();
  for (std::size_t k = 0; k < len; ++k) {
    os << curves.front().first_frame + static_cast<Index>(k);
    for (const XminCurve& c : curves) os << ' ' << (k < c.sin_theta.size() ? c.sin_theta[k] : NAN);
    os << '\n';
  }
}

}  // namespace norst
