#include "qnsmc/tempering.hpp"

#include "qnsmc/rng.hpp"
#include "qnsmc/targets.hpp"
#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace qnsmc;
using Catch::Matchers::WithinAbs;

namespace {

TemperConfig tight() {
  TemperConfig cfg;
  cfg.bisect_tol = 1e-10;  // drive to the bracket-collapse exit
  return cfg;
}

}  // namespace

TEST_CASE("constant likelihood clamps to 1") {
  const Vector ll = Vector::Constant(5, -7.3);
  const Vector w = Vector::Constant(5, 0.2);
  REQUIRE(solve_next_lambda(ll, w, 0.0, TemperConfig{}, 0.95 * 5) == 1.0);
  REQUIRE(solve_next_lambda(ll, w, 0.7, TemperConfig{}, 0.95 * 5) == 1.0);
}

TEST_CASE("two-particle fixture matches the fine-grid oracle") {
  Vector ll(2), w(2);
  ll << 0.0, -10.0;
  w << 0.5, 0.5;
  const double target = 1.9;  // 0.95 * 2
  const double solved = solve_next_lambda(ll, w, 0.0, tight(), target);
  const double grid = oracles::grid_search_lambda(ll, w, 0.0, target, 1000000);
  REQUIRE_THAT(solved, WithinAbs(grid, 1e-6));
  // ESS at the solution hits the target
  REQUIRE_THAT(oracles::ess_at_lambda(ll, w, 0.0, solved), WithinAbs(target, 1e-6));
}

TEST_CASE("target at N converges to the lower bracket") {
  Vector ll(2), w(2);
  ll << 0.0, -10.0;
  w << 0.5, 0.5;
  // ESS(lambda) < 2 for every lambda > 0 here, so the solver walks down to a
  // lambda just above lambda_prev where the tolerance is met.
  const double solved = solve_next_lambda(ll, w, 0.0, TemperConfig{}, 2.0);
  REQUIRE(solved > 0.0);
  REQUIRE(solved < 0.01);
  REQUIRE_THAT(oracles::ess_at_lambda(ll, w, 0.0, solved), WithinAbs(2.0, 2.0 * 1e-4));

  SECTION("tight tolerance pushes the iterate further down but stays strict") {
    const double tighter = solve_next_lambda(ll, w, 0.0, tight(), 2.0);
    REQUIRE(tighter > 0.0);
    REQUIRE(tighter < solved);
  }
}

TEST_CASE("solver result is strictly above lambda_prev and at most 1") {
  RngStream rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index n = 2 + (trial % 6);
    const Vector ll = 5.0 * rng.normal_vector(n);
    Vector w = rng.normal_vector(n).array().abs() + 0.01;
    w /= w.sum();
    const double prev = 0.9 * rng.uniform();
    const double target = 1.0 + (ess(w) - 1.0) * rng.uniform();
    const double solved = solve_next_lambda(ll, w, prev, TemperConfig{}, target);
    REQUIRE(solved > prev);
    REQUIRE(solved <= 1.0);
  }
}

TEST_CASE("two-particle ESS from uniform weights is monotone non-increasing") {
  RngStream rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    Vector ll = 4.0 * rng.normal_vector(2);
    const Vector w = Vector::Constant(2, 0.5);
    double prev_val = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 200; ++k) {
      const double lam = static_cast<double>(k) / 200.0;
      const double e = oracles::ess_at_lambda(ll, w, 0.0, lam);
      REQUIRE(e <= prev_val + 1e-9);
      prev_val = e;
    }
  }
}

TEST_CASE("solver matches the grid oracle on random fixtures") {
  RngStream rng(33);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index n = 4;
    const Vector ll = 6.0 * rng.normal_vector(n);
    Vector w = rng.normal_vector(n).array().abs() + 0.05;
    w /= w.sum();
    const double target = 0.9 * ess(w);
    const double solved = solve_next_lambda(ll, w, 0.0, tight(), target);
    if (solved == 1.0) continue;  // clamped: nothing for the grid to find
    const double grid = oracles::grid_search_lambda(ll, w, 0.0, target, 1000000);
    REQUIRE_THAT(solved, WithinAbs(grid, 1.0 / 1000000.0));
  }
}

TEST_CASE("solver makes zero model evaluations") {
  const ConjugateGaussian target;
  const TemperedModel model = target.model();
  Vector ll(3), w(3);
  ll << -1.0, -2.0, -3.0;
  w << 0.3, 0.3, 0.4;
  const auto before = model.evaluation_count();
  solve_next_lambda(ll, w, 0.1, TemperConfig{}, 2.0);
  REQUIRE(model.evaluation_count() == before);
}

TEST_CASE("iteration cap raises with the best iterate attached") {
  Vector ll(2), w(2);
  ll << 0.0, -10.0;
  w << 0.5, 0.5;
  TemperConfig cfg;
  cfg.max_bisect_iters = 3;
  cfg.bisect_tol = 1e-12;
  try {
    solve_next_lambda(ll, w, 0.0, cfg, 1.9);
    FAIL("expected BisectionError");
  } catch (const BisectionError& e) {
    REQUIRE(e.best_lambda > 0.0);
    REQUIRE(e.best_lambda < 1.0);
  }
}

TEST_CASE("lambda_prev preconditions") {
  const Vector ll = Vector::Zero(2);
  const Vector w = Vector::Constant(2, 0.5);
  REQUIRE_THROWS_AS(solve_next_lambda(ll, w, 1.0, TemperConfig{}, 1.5), SmcError);
  REQUIRE_THROWS_AS(solve_next_lambda(ll, w, -0.1, TemperConfig{}, 1.5), SmcError);
}
