#pragma once

#include "norst/experiment.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace norst {

// Outlier-support knobs as written in a config file or on the command
// line; resolved into SupportModels once alpha is known.
struct SupportSpec {
  std::string model = "moving_object";  // moving_object | bernoulli | none
  double s_frac = 0.05;
  double b0 = 0.3;
  double rho = 0.3;
  double train_s_frac = 0.01;
  double train_b0 = 0.01;
  double train_rho = 0.01;
};

struct LoadedConfig {
  ExperimentConfig cfg;
  SupportSpec support;
};

// Profile "desk" (default) or "benchmark".
LoadedConfig profile_config(const std::string& profile);

// INI file with [scenario], [tracker] and [run] sections. Unknown keys are
// rejected. A "profile" key under [run] selects the starting defaults.
LoadedConfig load_config(const std::filesystem::path& path);

// Sets the scenario support models from lc.support and cfg.alpha.
void resolve_supports(LoadedConfig& lc);

std::vector<double> parse_double_list(const std::string& s);
std::vector<Index> parse_index_list(const std::string& s);

}  // namespace norst
