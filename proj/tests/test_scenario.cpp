#include <doctest.h>

#include "norst/error.hpp"
#include "norst/rng.hpp"
#include "norst/scenario.hpp"

#include <algorithm>
#include <cmath>

using namespace norst;

namespace {

ScenarioConfig small_cfg() {
  ScenarioConfig c;
  c.n = 100;
  c.d = 800;
  c.r = 5;
  c.change_times = {300, 600};
  c.t_train = 50;
  c.train_support = SupportModel::moving_object(1, 0.01, 100);
  c.support = SupportModel::moving_object(5, 0.3, 100);
  return c;
}

bool bit_equal(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data());
}

// Sliding-window row count, straight from the definition.
double naive_max_row(const std::vector<Support>& sets, Index n, Index alpha) {
  double best = 0.0;
  const Index d = static_cast<Index>(sets.size());
  for (Index start = 0; start + alpha <= d; ++start) {
    std::vector<int> count(static_cast<std::size_t>(n), 0);
    for (Index t = start; t < start + alpha; ++t)
      for (Index i : sets[static_cast<std::size_t>(t)]) ++count[static_cast<std::size_t>(i)];
    best = std::max(best, *std::max_element(count.begin(), count.end()) / static_cast<double>(alpha));
  }
  return best;
}

}  // namespace

TEST_CASE("Y = L + X + V exactly") {
  ScenarioConfig c = small_cfg();
  c.noise_var = 1e-4;
  const Scenario sc = gen_scenario(c, 3);
  MatrixXd y = sc.L;
  y += MatrixXd(sc.X);
  y += sc.V;
  CHECK(bit_equal(sc.Y, y));
  CHECK(sc.V.cols() == c.d);
  // ||E vv'|| = sigma^2: largest coefficient variance is h^2 / 3.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sc.V * sc.V.transpose() / static_cast<double>(c.d),
                                             Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(1e-4).epsilon(0.2));
}

TEST_CASE("scenario columns lie in the subspace in force and outliers follow the model") {
  const ScenarioConfig c = small_cfg();
  const Scenario sc = gen_scenario(c, 5);
  REQUIRE(sc.subspaces.size() == 3);
  for (const Basis& p : sc.subspaces) CHECK(p.orthonormality_defect() < kOrthonormalityTol);
  for (Index t = 0; t < c.d; ++t) {
    const VectorXd l = sc.L.col(t);
    REQUIRE(sc.subspace_at(t).project_out(l).norm() < 1e-10 * std::max(1.0, l.norm()));
  }
  CHECK(sc.epoch_of(299) == 0);
  CHECK(sc.epoch_of(300) == 1);
  CHECK(sc.epoch_of(799) == 2);

  const MatrixXd x = MatrixXd(sc.X);
  for (Index t = 0; t < c.d; ++t) {
    const Support& s = sc.supports[static_cast<std::size_t>(t)];
    REQUIRE(std::is_sorted(s.begin(), s.end()));
    Index nz = 0;
    for (Index i = 0; i < c.n; ++i) {
      if (x(i, t) != 0.0) {
        ++nz;
        REQUIRE(std::binary_search(s.begin(), s.end(), i));
        REQUIRE(std::abs(x(i, t)) >= c.x_min);
        REQUIRE(std::abs(x(i, t)) <= c.x_max);
      }
    }
    REQUIRE(nz == static_cast<Index>(s.size()));
  }
}

TEST_CASE("moving-object budgets") {
  const ScenarioConfig c = small_cfg();
  const Scenario sc = gen_scenario(c, 7);
  const std::vector<Support> post(sc.supports.begin() + c.t_train, sc.supports.end());
  CHECK(max_outlier_frac_col(post, c.n) == doctest::Approx(0.05));
  const double row = max_outlier_frac_row(post, c.n, 100);
  CHECK(row == doctest::Approx(naive_max_row(post, c.n, 100)));
  CHECK(std::abs(row - 0.3) <= 0.01 + 1e-12);
}

TEST_CASE("Bernoulli row fraction at rho = 0.3, n = 200, alpha = 300") {
  // Row counts over a window are Binomial(300, 0.3): mean 0.3, sd 0.026.
  // The maximum over 200 rows and ~1700 windows sits about 4 sd up.
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto sets = gen_bernoulli_masks(200, 2000, 0.3, seed);
    const double row = max_outlier_frac_row(sets, 200, 300);
    CHECK(row >= 0.3);
    CHECK(row <= 0.45);
  }
  const auto few = gen_bernoulli_masks(30, 120, 0.3, 9);
  CHECK(max_outlier_frac_row(few, 30, 40) == doctest::Approx(naive_max_row(few, 30, 40)));
}

TEST_CASE("Bernoulli column fraction at rho = 0.01, n = 1000") {
  const auto sets = gen_bernoulli_masks(1000, 500, 0.01, 4);
  double total = 0.0;
  for (const Support& s : sets) total += static_cast<double>(s.size());
  CHECK(total / (1000.0 * 500.0) == doctest::Approx(0.01).epsilon(0.1));
  CHECK(max_outlier_frac_col(sets, 1000) <= 0.03);
}

TEST_CASE("constant magnitudes equal x_min") {
  const SparseVectorXd v = gen_magnitudes(Support{1, 4, 7}, 10, 5.0, 5.0, MagnitudeMode::kConstant, 1);
  CHECK(v.nonZeros() == 3);
  for (SparseVectorXd::InnerIterator it(v); it; ++it) CHECK(it.value() == 5.0);
}

TEST_CASE("coefficient model") {
  const CoeffModel cm{30, 50.0};
  const VectorXd q = cm.q();
  CHECK(q(0) == doctest::Approx(std::sqrt(50.0)));
  CHECK(q(1) == doctest::Approx(std::sqrt(50.0) - std::sqrt(50.0) / 60.0));
  CHECK(q(29) == 1.0);
  CHECK(cm.lambdas()(0) == doctest::Approx(50.0 / 3.0));
  CHECK(cm.lambdas()(0) / cm.lambdas()(29) == doctest::Approx(50.0));
}

TEST_CASE("scenario generation replays bit for bit") {
  const ScenarioConfig c = small_cfg();
  const Scenario a = gen_scenario(c, 11);
  const Scenario b = gen_scenario(c, 11);
  const Scenario other = gen_scenario(c, 12);
  CHECK(bit_equal(a.Y, b.Y));
  CHECK(bit_equal(a.L, b.L));
  CHECK(a.supports == b.supports);
  CHECK_FALSE(bit_equal(a.Y, other.Y));
}

TEST_CASE("rotation size at n = 100") {
  ScenarioConfig c;
  c.n = 100;
  c.d = 200;
  c.r = 5;
  c.change_times = {100};
  c.t_train = 0;
  std::vector<double> s;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Scenario sc = gen_scenario(c, seed);
    s.push_back(sin_theta_max(sc.subspaces[0], sc.subspaces[1]));
  }
  std::sort(s.begin(), s.end());
  CHECK(s[2] > 0.014 / 3.0);
  CHECK(s[2] < 0.014 * 3.0);
}

TEST_CASE("scenario validation") {
  ScenarioConfig c = small_cfg();
  c.change_times = {600, 300};
  CHECK_THROWS_AS(gen_scenario(c, 1), InvalidArgument);
  c = small_cfg();
  c.x_min = 0.0;
  CHECK_THROWS_AS(gen_scenario(c, 1), InvalidArgument);
  c = small_cfg();
  c.r = 101;
  CHECK_THROWS_AS(gen_scenario(c, 1), InvalidArgument);
}

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(1, "x");
  Rng b(1, "x");
  Rng c(1, "y");
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    differs = differs || va != c.next_u64();
  }
  CHECK(differs);

  Rng u(2, "moments");
  double sum = 0.0, sq = 0.0;
  const int m = 200000;
  for (int i = 0; i < m; ++i) {
    const double z = u.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / m) < 0.01);
  CHECK(std::abs(sq / m - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    REQUIRE(u.below(7) < 7);
  }
}
