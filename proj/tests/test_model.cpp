#include "qnsmc/model.hpp"

#include "qnsmc/rng.hpp"
#include "qnsmc/targets.hpp"
#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace qnsmc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Evaluation make_eval(double lp, double ll, const Vector& glp, const Vector& gll) {
  Evaluation ev;
  ev.log_prior = lp;
  ev.log_lik = ll;
  ev.grad_log_prior = glp;
  ev.grad_log_lik = gll;
  return ev;
}

}  // namespace

TEST_CASE("tempered_potential endpoints and arithmetic") {
  const Vector g1 = Vector::Constant(2, 0.5);
  const Vector g2 = Vector::Constant(2, -1.5);
  const Evaluation ev = make_eval(-0.5, -2.0, g1, g2);

  REQUIRE_THAT(tempered_potential(ev, 0.0), WithinRel(0.5, 1e-15));
  REQUIRE_THAT(tempered_potential(ev, 1.0), WithinRel(2.5, 1e-15));
  REQUIRE_THAT(tempered_potential(ev, 0.5), WithinRel(1.5, 1e-15));

  SECTION("-inf log-densities propagate to +inf potential") {
    const Evaluation zero = make_eval(-1.0, kNegInf, g1, g2);
    REQUIRE(tempered_potential(zero, 0.5) == std::numeric_limits<double>::infinity());
    // lambda = 0 never touches the likelihood term
    REQUIRE_THAT(tempered_potential(zero, 0.0), WithinRel(1.0, 1e-15));
  }
}

TEST_CASE("tempered_gradient endpoints") {
  Vector glp(2), gll(2);
  glp << 1.0, -2.0;
  gll << 0.25, 4.0;
  const Evaluation ev = make_eval(-1.0, -2.0, glp, gll);

  REQUIRE(tempered_gradient(ev, 0.0) == -glp);
  REQUIRE(tempered_gradient(ev, 1.0) == Vector(-glp - gll));

  SECTION("non-finite gradient components raise") {
    Evaluation bad = ev;
    bad.grad_log_lik[1] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(tempered_gradient(bad, 0.5), EvaluationError);
  }
}

TEST_CASE("tempered_gradient matches finite differences of tempered_potential") {
  const AnisotropicGaussian target(6);
  const TemperedModel model = target.model();
  RngStream rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector x = 2.0 * rng.normal_vector(6);
    const double lambda = rng.uniform();
    const Evaluation ev = model.evaluate(x);
    const Vector grad = tempered_gradient(ev, lambda);
    const Vector fd = oracles::finite_difference_gradient(
        [&](const Vector& p) { return tempered_potential(model.evaluate(p), lambda); }, x);
    REQUIRE((grad - fd).norm() <= 1e-4 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("tempered_potential is affine in lambda") {
  const AnisotropicGaussian target(4);
  const TemperedModel model = target.model();
  RngStream rng(7);
  const Vector x = rng.normal_vector(4);
  const Evaluation ev = model.evaluate(x);
  const double u0 = tempered_potential(ev, 0.0);
  const double u1 = tempered_potential(ev, 1.0);
  for (double lambda : {0.0, 0.25, 0.5, 1.0}) {
    REQUIRE_THAT(tempered_potential(ev, lambda),
                 WithinRel((1.0 - lambda) * u0 + lambda * u1, 1e-12));
  }
}

TEST_CASE("evaluation counter is instrumented") {
  const ConjugateGaussian target;
  const TemperedModel model = target.model();
  REQUIRE(model.evaluation_count() == 0);
  model.evaluate(Vector::Zero(1));
  model.evaluate(Vector::Ones(1));
  REQUIRE(model.evaluation_count() == 2);
}
