#include "qnsmc/math.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace qnsmc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("log_sum_exp basics") {
  Vector v(3);
  v << 0.0, -1.0, -2.0;
  const double expected = std::log(1.0 + std::exp(-1.0) + std::exp(-2.0));
  REQUIRE_THAT(log_sum_exp(v), WithinRel(expected, 1e-14));

  SECTION("invariant to shifts") {
    Vector shifted = v.array() + 1234.5;
    REQUIRE_THAT(log_sum_exp(shifted), WithinRel(expected + 1234.5, 1e-12));
  }

  SECTION("huge negative arguments do not underflow the result") {
    Vector w(2);
    w << -100000.0, -100001.0;
    REQUIRE_THAT(log_sum_exp(w), WithinAbs(-100000.0 + std::log(1 + std::exp(-1.0)), 1e-9));
  }

  SECTION("all -inf gives -inf") {
    Vector w = Vector::Constant(4, kNegInf);
    REQUIRE(log_sum_exp(w) == kNegInf);
  }

  SECTION("empty gives -inf") {
    Vector w(0);
    REQUIRE(log_sum_exp(w) == kNegInf);
  }
}

TEST_CASE("log1p_exp stable at both tails") {
  REQUIRE_THAT(log1p_exp(0.0), WithinRel(std::log(2.0), 1e-15));
  REQUIRE_THAT(log1p_exp(800.0), WithinRel(800.0, 1e-12));
  REQUIRE_THAT(log1p_exp(-800.0), WithinAbs(0.0, 1e-300));
  REQUIRE_THAT(log1p_exp(3.0), WithinRel(std::log1p(std::exp(3.0)), 1e-14));
}
