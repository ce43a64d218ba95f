#include "norst/config.hpp"

#include "norst/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <set>
#include <sstream>

namespace norst {

namespace pt = boost::property_tree;

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item.substr(b), &used));
      if (item.find_first_not_of(" \t", b + used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number in list: '" + item + "'");
    }
  }
  return out;
}

std::vector<Index> parse_index_list(const std::string& s) {
  std::vector<Index> out;
  for (double v : parse_double_list(s)) {
    if (v != std::floor(v)) throw ConfigError("expected integers in list '" + s + "'");
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

LoadedConfig profile_config(const std::string& profile) {
  LoadedConfig lc;
  if (profile == "desk") {
    lc.cfg = desk_profile();
  } else if (profile == "benchmark") {
    lc.cfg = benchmark_profile();
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected desk or benchmark)");
  }
  return lc;
}

void resolve_supports(LoadedConfig& lc) {
  ScenarioConfig& s = lc.cfg.scenario;
  const SupportSpec& sp = lc.support;
  const Index n = s.n;
  auto block = [n](double frac) { return std::max<Index>(frac > 0.0 ? 1 : 0, static_cast<Index>(std::llround(frac * n))); };
  if (sp.model == "moving_object") {
    s.train_support = SupportModel::moving_object(block(sp.train_s_frac), sp.train_b0, lc.cfg.alpha);
    s.support = SupportModel::moving_object(block(sp.s_frac), sp.b0, lc.cfg.alpha);
  } else if (sp.model == "bernoulli") {
    s.train_support = SupportModel::bernoulli(sp.train_rho);
    s.support = SupportModel::bernoulli(sp.rho);
  } else if (sp.model == "none") {
    s.train_support = SupportModel::none();
    s.support = SupportModel::none();
  } else {
    throw ConfigError("unknown support model '" + sp.model + "' (expected moving_object, bernoulli or none)");
  }
  s.budget_alpha = lc.cfg.alpha;
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key " + key + ": expected a boolean, got '" + v + "'");
}

double to_double(const std::string& v, const std::string& key) {
  const auto list = parse_double_list(v);
  if (list.size() != 1) throw ConfigError("key " + key + ": expected one number, got '" + v + "'");
  return list.front();
}

Index to_index(const std::string& v, const std::string& key) {
  const double d = to_double(v, key);
  if (d != std::floor(d)) throw ConfigError("key " + key + ": expected an integer, got '" + v + "'");
  return static_cast<Index>(d);
}

InitMode init_from_string(const std::string& v) {
  if (v == "altproj" || v == "altproj_lite") return InitMode::kAltProjLite;
  if (v == "oracle") return InitMode::kOracle;
  if (v == "random" || v == "random_orthogonal") return InitMode::kRandomOrthogonal;
  throw ConfigError("unknown init mode '" + v + "'");
}

}  // namespace

LoadedConfig load_config(const std::filesystem::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    if (e.line() == 0) throw IoError("cannot read config " + path.string() + ": " + e.message());
    throw ParseError("config " + path.string() + " line " + std::to_string(e.line()) + ": " + e.message(),
                     static_cast<long>(e.line()));
  }
  const std::set<std::string> sections{"scenario", "tracker", "run"};
  for (const auto& [name, sub] : tree) {
    if (!sections.count(name)) throw ConfigError("unknown config section [" + name + "]");
    (void)sub;
  }
  const pt::ptree none;  // get_child returns a reference to its default
  const std::string profile = tree.get<std::string>("run.profile", "desk");
  LoadedConfig lc = profile_config(profile);
  ExperimentConfig& c = lc.cfg;
  ScenarioConfig& s = c.scenario;
  SupportSpec& sp = lc.support;

  for (const auto& [key, node] : tree.get_child("scenario", none)) {
    const std::string v = node.get_value<std::string>();
    const std::string k = "scenario." + key;
    if (key == "n") s.n = to_index(v, k);
    else if (key == "d") s.d = to_index(v, k);
    else if (key == "r") s.r = to_index(v, k);
    else if (key == "f") s.f = to_double(v, k);
    else if (key == "change_times") s.change_times = parse_index_list(v);
    else if (key == "gamma") s.gamma = to_double(v, k);
    else if (key == "t_train") s.t_train = to_index(v, k);
    else if (key == "support_model") sp.model = v;
    else if (key == "s_frac") sp.s_frac = to_double(v, k);
    else if (key == "b0") sp.b0 = to_double(v, k);
    else if (key == "rho") sp.rho = to_double(v, k);
    else if (key == "train_s_frac") sp.train_s_frac = to_double(v, k);
    else if (key == "train_b0") sp.train_b0 = to_double(v, k);
    else if (key == "train_rho") sp.train_rho = to_double(v, k);
    else if (key == "x_min") s.x_min = to_double(v, k);
    else if (key == "x_max") s.x_max = to_double(v, k);
    else if (key == "magnitude") {
      if (v == "uniform") s.magnitude = MagnitudeMode::kUniform;
      else if (v == "constant") s.magnitude = MagnitudeMode::kConstant;
      else throw ConfigError("key " + k + ": expected uniform or constant");
    } else if (key == "noise_var") s.noise_var = to_double(v, k);
    else throw ConfigError("unknown key " + k);
  }
  for (const auto& [key, node] : tree.get_child("tracker", none)) {
    const std::string v = node.get_value<std::string>();
    const std::string k = "tracker." + key;
    if (key == "alpha") c.alpha = to_index(v, k);
    else if (key == "K") c.K = static_cast<int>(to_index(v, k));
    else if (key == "zeta") c.zeta = to_double(v, k);
    else if (key == "lambda_plus") c.lambda_plus = to_double(v, k);
    else if (key == "lambda_thresh") c.lambda_thresh = to_double(v, k);
    else if (key == "x_min") c.tracker_xmin = to_double(v, k);
    else if (key == "adaptive_xmin") c.adaptive_xmin = parse_bool(v, k);
    else if (key == "xi_mode") {
      if (v == "constant") c.xi_mode = XiMode::kConstant;
      else if (v == "previous_residual") c.xi_mode = XiMode::kPreviousResidual;
      else throw ConfigError("key " + k + ": expected constant or previous_residual");
    } else if (key == "refine_initial") c.refine_initial = parse_bool(v, k);
    else if (key == "init") c.init = init_from_string(v);
    else if (key == "oracle_target") c.oracle_target = to_double(v, k);
    else if (key == "init_iters") c.init_iters = static_cast<int>(to_index(v, k));
    else throw ConfigError("unknown key " + k);
  }
  for (const auto& [key, node] : tree.get_child("run", none)) {
    const std::string v = node.get_value<std::string>();
    const std::string k = "run." + key;
    if (key == "profile") continue;
    if (key == "mode") c.mode = run_mode_from_string(v);
    else if (key == "trials") c.trials = static_cast<int>(to_index(v, k));
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_index(v, k));
    else if (key == "parallel") c.parallel = parse_bool(v, k);
    else if (key == "threads") c.threads = static_cast<int>(to_index(v, k));
    else if (key == "out_dir") c.out_dir = v;
    else if (key == "missing_rho") c.missing_rho = to_double(v, k);
    else if (key == "write_frames") c.write_frames = parse_bool(v, k);
    else throw ConfigError("unknown key " + k);
  }
  resolve_supports(lc);
  return lc;
}

}  // namespace norst
