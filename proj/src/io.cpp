#include "norst/io.hpp"

#include "norst/error.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace norst {

namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

constexpr std::array<char, 4> kMagic{'N', 'R', 'S', 'T'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::istream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

std::string ctx(const fs::path& p) { return " (" + p.string() + ")"; }

}  // namespace

void write_matrix(const fs::path& path, const MatrixXd& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing" + ctx(path));
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kContainerVersion);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!os) throw IoError("write failed" + ctx(path));
}

MatrixXd read_matrix(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading" + ctx(path));
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ParseError("bad magic bytes, not an NRST container" + ctx(path), 0);
  }
  std::uint32_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  if (!get(is, version) || !get(is, rows) || !get(is, cols)) throw ParseError("truncated header" + ctx(path), 0);
  if (version != kContainerVersion) {
    throw ParseError("unsupported container version " + std::to_string(version) + ctx(path), 0);
  }
  constexpr std::uint64_t kMaxEntries = std::uint64_t{1} << 34;
  if (rows > kMaxEntries || cols > kMaxEntries || (rows && cols > kMaxEntries / rows)) {
    throw ParseError("implausible dimensions in header" + ctx(path), 0);
  }
  MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
  std::vector<double> row(cols);
  for (std::uint64_t i = 0; i < rows; ++i) {
    if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(cols * sizeof(double)))) {
      throw ParseError("truncated payload at row " + std::to_string(i + 1) + " of " + std::to_string(rows) + ctx(path),
                       static_cast<long>(i + 1));
    }
    for (std::uint64_t j = 0; j < cols; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = row[j];
  }
  char extra = 0;
  if (is.read(&extra, 1)) throw ParseError("trailing bytes after payload" + ctx(path), static_cast<long>(rows));
  return m;
}

MatrixXd supports_to_mask(const std::vector<Support>& sets, Index n) {
  MatrixXd m = MatrixXd::Zero(n, static_cast<Index>(sets.size()));
  for (std::size_t t = 0; t < sets.size(); ++t) {
    for (Index i : sets[t]) {
      if (i < 0 || i >= n) throw InvalidArgument("supports_to_mask: index out of range");
      m(i, static_cast<Index>(t)) = 1.0;
    }
  }
  return m;
}

std::vector<Support> mask_to_supports(const MatrixXd& mask) {
  std::vector<Support> out(static_cast<std::size_t>(mask.cols()));
  for (Index t = 0; t < mask.cols(); ++t) {
    for (Index i = 0; i < mask.rows(); ++i) {
      if (mask(i, t) != 0.0) out[static_cast<std::size_t>(t)].push_back(i);
    }
  }
  return out;
}

void write_metrics_csv(const fs::path& path, const std::vector<FrameMetrics>& frames) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing" + ctx(path));
  const auto& cols = metrics_csv_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  os << '\n';
  os.precision(17);
  for (const FrameMetrics& f : frames) {
    os << f.t << ',' << f.sin_theta << ',' << f.rel_err_l << ',' << f.support_precision << ',' << f.support_recall
       << ',' << f.detected_epoch << '\n';
  }
  if (!os) throw IoError("write failed" + ctx(path));
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, long line, const char* col) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) {
    // from_chars rejects "inf"/"nan" spellings used by some writers
    if (s == "inf") return INFINITY;
    if (s == "nan") return NAN;
    throw ParseError("metrics CSV line " + std::to_string(line) + ": column " + col + " is not a number: '" + s + "'",
                     line);
  }
  return v;
}

long long parse_int(const std::string& s, long line, const char* col) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("metrics CSV line " + std::to_string(line) + ": column " + col + " is not an integer: '" + s +
                         "'",
                     line);
  }
  return v;
}

}  // namespace

std::vector<FrameMetrics> read_metrics_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading" + ctx(path));
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty metrics CSV" + ctx(path), 1);
  if (split_csv(line) != metrics_csv_columns()) throw ParseError("metrics CSV header does not match the schema" + ctx(path), 1);
  std::vector<FrameMetrics> out;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != metrics_csv_columns().size()) {
      throw ParseError("metrics CSV line " + std::to_string(lineno) + ": expected 6 fields, found " +
                           std::to_string(f.size()) + ctx(path),
                       lineno);
    }
    FrameMetrics m;
    m.t = static_cast<Index>(parse_int(f[0], lineno, "t"));
    m.sin_theta = parse_double(f[1], lineno, "sin_theta");
    m.rel_err_l = parse_double(f[2], lineno, "rel_err_l");
    m.support_precision = parse_double(f[3], lineno, "support_precision");
    m.support_recall = parse_double(f[4], lineno, "support_recall");
    m.detected_epoch = static_cast<int>(parse_int(f[5], lineno, "detected_epoch"));
    if (!(m.sin_theta >= 0.0 && m.sin_theta <= 1.0) || !(m.support_precision >= 0.0 && m.support_precision <= 1.0) ||
        !(m.support_recall >= 0.0 && m.support_recall <= 1.0)) {
      throw ParseError("metrics CSV line " + std::to_string(lineno) + ": value outside [0, 1]" + ctx(path), lineno);
    }
    out.push_back(m);
  }
  return out;
}

namespace {

nlohmann::json model_json(const SupportModel& m) {
  const char* kind = m.kind == SupportKind::kNone ? "none" : m.kind == SupportKind::kBernoulli ? "bernoulli" : "moving_object";
  return {{"kind", kind}, {"rho", m.rho}, {"s", m.s}, {"dwell", m.dwell}};
}

SupportModel model_from_json(const nlohmann::json& j) {
  SupportModel m;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "none") {
    m.kind = SupportKind::kNone;
  } else if (kind == "bernoulli") {
    m.kind = SupportKind::kBernoulli;
  } else if (kind == "moving_object") {
    m.kind = SupportKind::kMovingObject;
  } else {
    throw ParseError("meta.json: unknown support kind '" + kind + "'", 0);
  }
  m.rho = j.at("rho").get<double>();
  m.s = j.at("s").get<Index>();
  m.dwell = j.at("dwell").get<Index>();
  return m;
}

}  // namespace

void save_scenario(const fs::path& dir, const Scenario& sc) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  const ScenarioConfig& c = sc.cfg;
  nlohmann::json meta = {
      {"format", "norst-scenario"},
      {"version", 1},
      {"seed", sc.seed},
      {"n", c.n},
      {"d", c.d},
      {"r", c.r},
      {"f", c.f},
      {"change_times", c.change_times},
      {"gamma", c.gamma},
      {"t_train", c.t_train},
      {"train_support", model_json(c.train_support)},
      {"support", model_json(c.support)},
      {"x_min", c.x_min},
      {"x_max", c.x_max},
      {"magnitude", c.magnitude == MagnitudeMode::kUniform ? "uniform" : "constant"},
      {"noise_var", c.noise_var},
      {"budget_alpha", c.budget_alpha},
      {"subspaces", sc.subspaces.size()},
  };
  std::ofstream os(dir / "meta.json", std::ios::trunc);
  if (!os) throw IoError("cannot open for writing" + ctx(dir / "meta.json"));
  os << meta.dump(2) << '\n';
  write_matrix(dir / "Y.nrst", sc.Y);
  write_matrix(dir / "L.nrst", sc.L);
  write_matrix(dir / "X.nrst", MatrixXd(sc.X));
  if (sc.V.size() > 0) write_matrix(dir / "V.nrst", sc.V);
  for (std::size_t j = 0; j < sc.subspaces.size(); ++j) {
    write_matrix(dir / ("P_" + std::to_string(j) + ".nrst"), sc.subspaces[j].matrix());
  }
}

Scenario load_scenario(const fs::path& dir) {
  std::ifstream is(dir / "meta.json");
  if (!is) throw IoError("cannot open for reading" + ctx(dir / "meta.json"));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("meta.json: ") + e.what() + ctx(dir), 0);
  }
  Scenario sc;
  try {
    ScenarioConfig& c = sc.cfg;
    sc.seed = meta.at("seed").get<std::uint64_t>();
    c.n = meta.at("n").get<Index>();
    c.d = meta.at("d").get<Index>();
    c.r = meta.at("r").get<Index>();
    c.f = meta.at("f").get<double>();
    c.change_times = meta.at("change_times").get<std::vector<Index>>();
    c.gamma = meta.at("gamma").get<double>();
    c.t_train = meta.at("t_train").get<Index>();
    c.train_support = model_from_json(meta.at("train_support"));
    c.support = model_from_json(meta.at("support"));
    c.x_min = meta.at("x_min").get<double>();
    c.x_max = meta.at("x_max").get<double>();
    c.magnitude = meta.at("magnitude").get<std::string>() == "constant" ? MagnitudeMode::kConstant : MagnitudeMode::kUniform;
    c.noise_var = meta.at("noise_var").get<double>();
    c.budget_alpha = meta.at("budget_alpha").get<Index>();
    const auto count = meta.at("subspaces").get<std::size_t>();
    for (std::size_t j = 0; j < count; ++j) {
      sc.subspaces.emplace_back(read_matrix(dir / ("P_" + std::to_string(j) + ".nrst")));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("meta.json: ") + e.what() + ctx(dir), 0);
  }
  sc.Y = read_matrix(dir / "Y.nrst");
  sc.L = read_matrix(dir / "L.nrst");
  const MatrixXd x = read_matrix(dir / "X.nrst");
  if (fs::exists(dir / "V.nrst")) sc.V = read_matrix(dir / "V.nrst");
  if (sc.Y.rows() != sc.cfg.n || sc.Y.cols() != sc.cfg.d || sc.L.rows() != sc.Y.rows() || sc.L.cols() != sc.Y.cols() ||
      x.rows() != sc.Y.rows() || x.cols() != sc.Y.cols()) {
    throw ParseError("scenario matrices disagree with meta.json dimensions" + ctx(dir), 0);
  }
  sc.X = x.sparseView(0.0, 0.0);
  sc.supports = mask_to_supports((x.array() != 0.0).cast<double>().matrix());
  return sc;
}

std::vector<Support> read_mask_file(const fs::path& path) { return mask_to_supports(read_matrix(path)); }

}  // namespace norst
