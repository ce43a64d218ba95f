#pragma once

#include "norst/geometry.hpp"
#include "norst/metrics.hpp"
#include "norst/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace norst {

namespace fs = std::filesystem;

inline constexpr std::uint32_t kContainerVersion = 1;

// "NRST", u32 version, u64 rows, u64 cols (little endian), then rows*cols
// f64 values in row-major order.
void write_matrix(const fs::path& path, const MatrixXd& m);
// Throws IoError when the file cannot be opened, ParseError (line = the
// first incomplete row, 1-based) on a bad header or truncated payload.
MatrixXd read_matrix(const fs::path& path);

// n x d matrix with 1 on each listed index.
MatrixXd supports_to_mask(const std::vector<Support>& sets, Index n);
std::vector<Support> mask_to_supports(const MatrixXd& mask);

inline const std::vector<std::string>& metrics_csv_columns() {
  static const std::vector<std::string> cols{"t",          "sin_theta",      "rel_err_l",
                                             "support_precision", "support_recall", "detected_epoch"};
  return cols;
}

void write_metrics_csv(const fs::path& path, const std::vector<FrameMetrics>& frames);
// Validates the header and every row against the column schema.
std::vector<FrameMetrics> read_metrics_csv(const fs::path& path);

// Y/L/X/(V)/P_j containers plus meta.json.
void save_scenario(const fs::path& dir, const Scenario& sc);
Scenario load_scenario(const fs::path& dir);

// Loads a mask container as per-frame missing sets.
std::vector<Support> read_mask_file(const fs::path& path);

}  // namespace norst
