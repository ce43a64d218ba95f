#include "norst/scenario.hpp"

#include "norst/error.hpp"
#include "norst/init.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace norst {

SupportModel SupportModel::bernoulli(double rho) {
  SupportModel m;
  m.kind = SupportKind::kBernoulli;
  m.rho = rho;
  return m;
}

SupportModel SupportModel::moving_object(Index s, double b0, Index alpha) {
  SupportModel m;
  m.kind = SupportKind::kMovingObject;
  m.s = s;
  m.dwell = std::max<Index>(1, static_cast<Index>(std::ceil(b0 * static_cast<double>(alpha) - 1e-9)));
  return m;
}

VectorXd CoeffModel::q() const {
  VectorXd out(r);
  const double sf = std::sqrt(f);
  for (Index i = 1; i < r; ++i) out(i - 1) = sf - sf * static_cast<double>(i - 1) / (2.0 * static_cast<double>(r));
  if (r > 0) out(r - 1) = 1.0;
  return out;
}

VectorXd CoeffModel::lambdas() const { return q().array().square() / 3.0; }

namespace {

void validate_model(const SupportModel& m, Index n, const char* which) {
  const std::string w(which);
  switch (m.kind) {
    case SupportKind::kNone:
      break;
    case SupportKind::kBernoulli:
      if (!(m.rho >= 0.0 && m.rho <= 1.0)) throw InvalidArgument(w + " support: rho must lie in [0, 1]");
      break;
    case SupportKind::kMovingObject:
      if (m.s < 0 || m.s > n) throw InvalidArgument(w + " support: block length s must lie in [0, n]");
      if (m.dwell < 1) throw InvalidArgument(w + " support: dwell must be at least 1");
      break;
  }
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n < 1 || d < 1) throw InvalidArgument("scenario: n and d must be positive");
  if (r < 1 || r > n) throw InvalidArgument("scenario: r must lie in [1, n]");
  if (!(f >= 1.0)) throw InvalidArgument("scenario: f must be at least 1");
  for (std::size_t j = 0; j < change_times.size(); ++j) {
    if (change_times[j] < 1 || change_times[j] >= d) {
      throw InvalidArgument("scenario: change time " + std::to_string(change_times[j]) + " outside [1, d)");
    }
    if (j > 0 && change_times[j] <= change_times[j - 1]) {
      throw InvalidArgument("scenario: change times must increase");
    }
  }
  if (t_train < 0 || t_train > d) throw InvalidArgument("scenario: t_train must lie in [0, d]");
  validate_model(train_support, n, "training");
  validate_model(support, n, "main");
  if (!(x_min > 0.0) || !(x_max >= x_min)) throw InvalidArgument("scenario: need 0 < x_min <= x_max");
  if (!(noise_var >= 0.0)) throw InvalidArgument("scenario: noise_var must be non-negative");
  if (budget_alpha < 1) throw InvalidArgument("scenario: budget_alpha must be positive");
}

int Scenario::epoch_of(Index t) const {
  int j = 0;
  for (Index tc : cfg.change_times) {
    if (t >= tc) ++j;
  }
  return j;
}

Support gen_support(const SupportModel& model, Index n, Index t_rel, Rng& rng) {
  Support out;
  switch (model.kind) {
    case SupportKind::kNone:
      break;
    case SupportKind::kBernoulli:
      for (Index i = 0; i < n; ++i) {
        if (rng.bernoulli(model.rho)) out.push_back(i);
      }
      break;
    case SupportKind::kMovingObject: {
      if (model.s == 0) break;
      const Index pos = t_rel / model.dwell;
      const Index start = (pos % n) * model.s % n;
      out.reserve(static_cast<std::size_t>(model.s));
      for (Index k = 0; k < model.s; ++k) out.push_back((start + k) % n);
      std::sort(out.begin(), out.end());
      break;
    }
  }
  return out;
}

SparseVectorXd gen_magnitudes(const Support& support, Index n, double x_min, double x_max, MagnitudeMode mode,
                              Rng& rng) {
  if (!(x_min > 0.0) || !(x_max >= x_min)) throw InvalidArgument("gen_magnitudes: need 0 < x_min <= x_max");
  SparseVectorXd v(n);
  v.reserve(static_cast<Index>(support.size()));
  for (Index i : support) {
    if (i < 0 || i >= n) throw InvalidArgument("gen_magnitudes: support index out of range");
    const double val = mode == MagnitudeMode::kConstant ? x_min : rng.sign() * rng.uniform(x_min, x_max);
    v.insertBack(i) = val;
  }
  return v;
}

SparseVectorXd gen_magnitudes(const Support& support, Index n, double x_min, double x_max, MagnitudeMode mode,
                              std::uint64_t seed) {
  Rng rng(seed, "magnitudes");
  return gen_magnitudes(support, n, x_min, x_max, mode, rng);
}

double max_outlier_frac_row(const std::vector<Support>& supports, Index n, Index alpha) {
  const Index d = static_cast<Index>(supports.size());
  if (alpha < 1) throw InvalidArgument("max_outlier_frac_row: alpha must be positive");
  if (d == 0) return 0.0;
  if (alpha > d) throw InvalidArgument("max_outlier_frac_row: alpha exceeds the frame count");
  std::vector<Index> count(static_cast<std::size_t>(n), 0);
  Index best = 0;
  for (Index t = 0; t < d; ++t) {
    for (Index i : supports[static_cast<std::size_t>(t)]) {
      const Index c = ++count[static_cast<std::size_t>(i)];
      if (t >= alpha - 1) best = std::max(best, c);
    }
    if (t == alpha - 1) best = std::max(best, *std::max_element(count.begin(), count.end()));
    if (t >= alpha - 1) {
      for (Index i : supports[static_cast<std::size_t>(t - alpha + 1)]) --count[static_cast<std::size_t>(i)];
    }
  }
  return static_cast<double>(best) / static_cast<double>(alpha);
}

double max_outlier_frac_col(const std::vector<Support>& supports, Index n) {
  if (n < 1) throw InvalidArgument("max_outlier_frac_col: n must be positive");
  std::size_t best = 0;
  for (const Support& s : supports) best = std::max(best, s.size());
  return static_cast<double>(best) / static_cast<double>(n);
}

std::vector<Support> gen_bernoulli_masks(Index n, Index d, double rho, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("gen_bernoulli_masks: rho must lie in [0, 1]");
  Rng rng(seed, "masks");
  const SupportModel m = SupportModel::bernoulli(rho);
  std::vector<Support> out;
  out.reserve(static_cast<std::size_t>(d));
  for (Index t = 0; t < d; ++t) out.push_back(gen_support(m, n, t, rng));
  return out;
}

namespace {

void check_budgets(const Scenario& sc) {
  const ScenarioConfig& c = sc.cfg;
  const Index n = c.n;
  if (c.d <= c.t_train) return;
  const std::vector<Support> post(sc.supports.begin() + c.t_train, sc.supports.end());
  const Index len = static_cast<Index>(post.size());
  const SupportModel& m = c.support;
  if (m.kind == SupportKind::kMovingObject && m.s > 0) {
    const double col = max_outlier_frac_col(post, n);
    const double want_col = static_cast<double>(m.s) / static_cast<double>(n);
    if (std::abs(col - want_col) > 1e-12) {
      throw InvalidArgument("scenario budget: column fraction " + std::to_string(col) + " differs from s/n = " +
                            std::to_string(want_col));
    }
    const Index revisit = (n + m.s - 1) / m.s * m.dwell;
    const Index a = c.budget_alpha;
    if (m.dwell <= a && revisit >= a && len >= a + m.dwell) {
      const double row = max_outlier_frac_row(post, n, a);
      const double want = static_cast<double>(m.dwell) / static_cast<double>(a);
      if (std::abs(row - want) > 1.0 / static_cast<double>(a) + 1e-12) {
        throw InvalidArgument("scenario budget: row fraction " + std::to_string(row) + " misses dwell/alpha = " +
                              std::to_string(want));
      }
    }
  } else if (m.kind == SupportKind::kBernoulli) {
    double total = 0.0;
    for (const Support& s : post) total += static_cast<double>(s.size());
    const double cells = static_cast<double>(n) * static_cast<double>(len);
    const double mean = total / cells;
    const double se = std::sqrt(m.rho * (1.0 - m.rho) / cells);
    if (std::abs(mean - m.rho) > 8.0 * se + 1e-12) {
      throw InvalidArgument("scenario budget: Bernoulli fraction " + std::to_string(mean) + " far from rho = " +
                            std::to_string(m.rho));
    }
  }
}

}  // namespace

Scenario gen_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Scenario sc;
  sc.cfg = cfg;
  sc.seed = seed;
  const Index n = cfg.n;
  const Index d = cfg.d;
  const Index r = cfg.r;

  sc.subspaces.push_back(init_random_orthogonal(n, r, Rng(seed, "subspace").next_u64()));
  for (std::size_t j = 0; j < cfg.change_times.size(); ++j) {
    Rng rot(seed, "rotation_" + std::to_string(j + 1));
    MatrixXd bt(n, n);
    for (Index col = 0; col < n; ++col)
      for (Index row = 0; row < n; ++row) bt(row, col) = rot.normal();
    const MatrixXd skew = bt - bt.transpose();
    sc.subspaces.push_back(rotate_subspace(sc.subspaces.back(), skew, cfg.gamma));
  }

  CoeffModel cm{r, cfg.f};
  const VectorXd q = cm.q();
  Rng coeff(seed, "coefficients");
  sc.L.resize(n, d);
  VectorXd a(r);
  for (Index t = 0; t < d; ++t) {
    for (Index i = 0; i < r; ++i) a(i) = coeff.uniform(-q(i), q(i));
    sc.L.col(t).noalias() = sc.subspace_at(t).matrix() * a;
  }

  Rng supp(seed, "supports");
  Rng mag(seed, "magnitudes");
  sc.supports.reserve(static_cast<std::size_t>(d));
  std::vector<Eigen::Triplet<double>> trip;
  for (Index t = 0; t < d; ++t) {
    const bool train = t < cfg.t_train;
    Support s = gen_support(train ? cfg.train_support : cfg.support, n, train ? t : t - cfg.t_train, supp);
    const SparseVectorXd x = gen_magnitudes(s, n, cfg.x_min, cfg.x_max, cfg.magnitude, mag);
    for (SparseVectorXd::InnerIterator it(x); it; ++it) trip.emplace_back(it.index(), t, it.value());
    sc.supports.push_back(std::move(s));
  }
  sc.X.resize(n, d);
  sc.X.setFromTriplets(trip.begin(), trip.end());

  sc.Y = sc.L;
  sc.Y += sc.X;
  if (cfg.noise_var > 0.0) {
    const Basis u = init_random_orthogonal(n, r, Rng(seed, "noise_subspace").next_u64());
    Rng noise(seed, "noise");
    const double h = std::sqrt(3.0 * cfg.noise_var);
    sc.V.resize(n, d);
    VectorXd c(r);
    for (Index t = 0; t < d; ++t) {
      for (Index i = 0; i < r; ++i) c(i) = noise.uniform(-h, h);
      sc.V.col(t).noalias() = u.matrix() * c;
    }
    sc.Y += sc.V;
  }
  if (cfg.check_budgets) check_budgets(sc);
  return sc;
}

}  // namespace norst
