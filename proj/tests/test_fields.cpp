#include <doctest.h>

#include <cmath>

#include "filippov/field.hpp"
#include "filippov/models.hpp"

using namespace filippov;

TEST_CASE("eval_side on builtin systems") {
  const auto par = parabola_system();
  auto v = eval_side(par, {0.5, 0.0}, Side::Upper, kAlphaZero);
  CHECK(v.x == doctest::Approx(1.0));
  CHECK(v.y == doctest::Approx(1.0));

  v = eval_side(par, {0.5, 0.0}, Side::Lower, kAlphaZero);
  CHECK(v.x == doctest::Approx(-1.0));
  CHECK(v.y == doctest::Approx(1.0));

  const auto cir = circle_system();
  v = eval_side(cir, {0.0, 0.0}, Side::Upper, kAlphaZero);
  CHECK(v.x == doctest::Approx(1.0));
  CHECK(v.y == doctest::Approx(0.0));
}

TEST_CASE("symmetrize reflects evaluation and partials") {
  SmoothField up;
  up.eval = [](Vec2 p, const Alpha& a) -> Vec2 {
    return {1.0 + 0.3 * p.y, 2.0 * p.x + a[0] + 0.5 * a[1] * p.y};
  };
  const auto sys = symmetrize(up);
  REQUIRE(sys.symmetric);

  const Alpha a{0.2, -0.4};
  for (double x : {-0.7, 0.0, 1.3}) {
    for (double y : {-0.5, 0.1, 0.8}) {
      const Vec2 zp = sys.upper({-x, -y}, a);
      const Vec2 zm = sys.lower({x, y}, a);
      CHECK(zm.x == doctest::Approx(-zp.x).epsilon(1e-12));
      CHECK(zm.y == doctest::Approx(-zp.y).epsilon(1e-12));
    }
  }
}

TEST_CASE("chain-rule partials of the lower field match finite differences") {
  const auto sys = thompson_hunt(-1.0, 0.28);
  const Alpha a{0.03, -0.05};
  const Vec2 probes[] = {{0.2, -0.4}, {-0.6, 0.3}, {0.05, -0.9}};
  for (const Vec2& p : probes) {
    SmoothField numeric;
    numeric.eval = sys.lower.eval;  // no analytic partials: forces FD
    const Vec2 ax = sys.lower.dx(p, a), nx = numeric.partial_x(p, a);
    const Vec2 ay = sys.lower.dy(p, a), ny = numeric.partial_y(p, a);
    CHECK(ax.y == doctest::Approx(nx.y).epsilon(1e-6));
    CHECK(ay.x == doctest::Approx(ny.x).epsilon(1e-6));
    CHECK(ay.y == doctest::Approx(ny.y).epsilon(1e-6));
    for (int i = 0; i < 2; ++i) {
      const Vec2 aa = (i == 0 ? sys.lower.da1 : sys.lower.da2)(p, a);
      const Vec2 na = numeric.partial_alpha(p, a, i);
      CHECK(aa.x == doctest::Approx(na.x).epsilon(1e-6));
      CHECK(aa.y == doctest::Approx(na.y).epsilon(1e-6));
    }
  }
}

TEST_CASE("lie derivatives") {
  const auto par = parabola_system();
  auto d = lie_derivatives(par, 0.0, Side::Upper, kAlphaZero);
  CHECK(d.zh == doctest::Approx(0.0));
  CHECK(d.z2h == doctest::Approx(2.0));
  d = lie_derivatives(par, 0.0, Side::Lower, kAlphaZero);
  CHECK(d.zh == doctest::Approx(0.0));
  CHECK(d.z2h == doctest::Approx(-2.0));

  const auto cir = circle_system();
  d = lie_derivatives(cir, 0.0, Side::Upper, kAlphaZero);
  CHECK(d.zh == doctest::Approx(0.0));
  CHECK(d.z2h == doctest::Approx(1.0));
}

TEST_CASE("translate_x shifts the fold") {
  const auto par = translate_x(parabola_system(), 0.25);
  // g(x) = 2(x + 0.25) upstairs: fold now at x = -0.25
  CHECK(eval_side(par, {-0.25, 0.0}, Side::Upper, kAlphaZero).y ==
        doctest::Approx(0.0));
}

TEST_CASE("thompson_hunt origin data") {
  const auto sys = thompson_hunt(-1.0, 0.28);
  const auto d = lie_derivatives(sys, 0.0, Side::Upper, kAlphaZero);
  CHECK(d.zh == doctest::Approx(0.0));
  CHECK(d.z2h == doctest::Approx(1.0));
  CHECK(eval_side(sys, {0.0, 0.0}, Side::Upper, kAlphaZero).x == doctest::Approx(1.0));
  // g_{alpha1}(0,0;0) = 1, g_{alpha2}(0,0;0) = 0
  CHECK(sys.upper.da1({0, 0}, kAlphaZero).y == doctest::Approx(1.0));
  CHECK(sys.upper.da2({0, 0}, kAlphaZero).y == doctest::Approx(0.0));
}
