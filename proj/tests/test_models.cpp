#include <cmath>

#include "doctest.h"
#include "filippov/models.hpp"
#include "filippov/solver.hpp"
#include "filippov/variational.hpp"

using namespace filippov;

TEST_CASE("oscillator family structure") {
  const auto sys = thompson_hunt(-1.0, 0.28);

  // visible fold-fold at the origin
  const auto lie = lie_derivatives(sys, 0.0, Side::Upper, kAlphaZero);
  CHECK(lie.zh == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(lie.z2h == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sys.upper({0, 0}, kAlphaZero).x == doctest::Approx(1.0));

  // symmetric partner: lower abscissa component is -1-y
  for (const double y : {-0.7, 0.0, 0.4})
    CHECK(sys.lower({0.2, y}, kAlphaZero).x == doctest::Approx(-1.0 - y).epsilon(1e-12));

  // unfolding derivatives at the origin
  CHECK(sys.upper.partial_alpha({0, 0}, kAlphaZero, 0).y == doctest::Approx(1.0));
  CHECK(std::abs(sys.upper.partial_alpha({0, 0}, kAlphaZero, 1).y) <= 1e-12);
}

TEST_CASE("circle fold hypotheses") {
  const auto sys = circle_system();
  const Vec2 v = sys.upper({0, 0}, kAlphaZero);
  CHECK(v.x == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(v.y == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(sys.upper.partial_x({0, 0}, kAlphaZero).y == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("figure-eight locus of the oscillator family") {
  const double theta = find_theta(-1.0);
  CHECK(theta == doctest::Approx(0.2812467707224322).epsilon(1e-8));
  CHECK(std::abs(cycle_offset(thompson_hunt(-1.0, theta))) <= 1e-9);

  const auto sys = thompson_hunt(-1.0, theta);
  CHECK(std::abs(fold_offset(sys)) <= 1e-10);

  // independent closure check by direct integration from the origin
  const auto gcd = grazing_cycle(sys);
  CHECK(std::abs(gcd.eval(gcd.T0)[1]) <= 1e-8);

  // hyperbolic and stable grazing cycle, kappa2 > 0, transversal unfolding
  const auto flo = floquet(gcd);
  CHECK(flo.lambda0 < 1.0);
  CHECK(flo.lambda0 > 0.0);
  const auto mel = melnikov_kappas(gcd);
  CHECK(mel.kappa2 > 0.0);
  CHECK(std::abs(transversality(mel.kappa1, mel.kappa2, sys)) > 1e-6);
}

TEST_CASE("theta is smooth: difference quotients stable under halving") {
  for (const double a : {-1.0, -0.6}) {
    const double h = 0.05;
    const double d1 = (find_theta(a + h) - find_theta(a - h)) / (2 * h);
    const double d2 = (find_theta(a + h / 2) - find_theta(a - h / 2)) / h;
    CHECK(d2 == doctest::Approx(d1).epsilon(0.01));
  }
}

TEST_CASE("locus finder failure reporting") {
  // a rigid scan range with no grazing root: the scan table is attached
  CHECK_THROWS_AS(find_theta(-1.0, {}, 2.0, 5.0, 8), NoBracket);
}
