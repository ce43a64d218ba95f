#include <doctest.h>

#include "norst/error.hpp"
#include "norst/init.hpp"
#include "norst/scenario.hpp"

using namespace norst;

TEST_CASE("altproj_lite recovers the span of clean low-rank data") {
  const Basis p = init_random_orthogonal(60, 4, 1);
  const MatrixXd y = p.matrix() * MatrixXd::Random(4, 40);
  const Basis got = init_altproj_lite(y, InitConfig{.t_train = 40, .r = 4});
  CHECK(sin_theta_max(got, p) < 1e-8);
}

TEST_CASE("altproj_lite removes sparse large outliers") {
  ScenarioConfig c;
  c.n = 300;
  c.d = 100;
  c.r = 10;
  c.change_times = {};
  c.t_train = 100;
  c.train_support = SupportModel::moving_object(3, 0.01, 300);
  const Scenario sc = gen_scenario(c, 3);
  const Basis got = init_altproj_lite(sc.Y, InitConfig{.t_train = 100, .r = 10});
  // A rank-10 fit of Y itself is pulled toward the outlier blocks.
  const double naive = sin_theta_max(top_r_left_singular_vectors(sc.Y, 10).basis, sc.subspaces[0]);
  const double robust = sin_theta_max(got, sc.subspaces[0]);
  CHECK(robust < 0.01);
  CHECK(robust < naive);
}

TEST_CASE("altproj_lite argument checks") {
  CHECK_THROWS_AS(init_altproj_lite(MatrixXd::Ones(10, 3), InitConfig{.t_train = 3, .r = 4}), InvalidArgument);
  CHECK_THROWS_AS(init_altproj_lite(MatrixXd::Zero(10, 10), InitConfig{.t_train = 10, .r = 2}), DegenerateSubspace);
  InitConfig bad{.t_train = 10, .r = 2};
  bad.thresh_decay = 1.5;
  CHECK_THROWS_AS(init_altproj_lite(MatrixXd::Random(10, 10), bad), InvalidArgument);
}

TEST_CASE("default iteration count and floor") {
  InitConfig c{.t_train = 100, .r = 30};
  CHECK(c.effective_iters() == 9);
  c.x_min = 10.0;
  CHECK(c.effective_floor(MatrixXd::Zero(2, 2)) == 5.0);
  c.thresh_floor = 0.3;
  CHECK(c.effective_floor(MatrixXd::Zero(2, 2)) == 0.3);
  CHECK(default_t_train(10) == 100);
  CHECK(default_t_train(30) == 120);
}

TEST_CASE("oracle init hits the requested angle") {
  const Basis p = init_random_orthogonal(100, 5, 2);
  for (double target : {1e-3, 0.01, 0.3}) {
    const Basis got = init_oracle(p, target, 7);
    CHECK(got.orthonormality_defect() < kOrthonormalityTol);
    CHECK(sin_theta_max(p, got) == doctest::Approx(target).epsilon(1e-8));
  }
}

TEST_CASE("random orthogonal init is orthonormal and seeded") {
  const Basis a = init_random_orthogonal(50, 6, 9);
  const Basis b = init_random_orthogonal(50, 6, 9);
  CHECK(a.orthonormality_defect() < kOrthonormalityTol);
  CHECK(a.matrix() == b.matrix());
  CHECK_FALSE(a.matrix() == init_random_orthogonal(50, 6, 10).matrix());
}
