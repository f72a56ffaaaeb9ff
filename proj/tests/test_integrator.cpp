#include <doctest.h>

#include <cmath>

#include "filippov/hybrid.hpp"
#include "filippov/models.hpp"

using namespace filippov;

TEST_CASE("dopri5 accuracy on the exponential") {
  struct Rhs {
    void operator()(double, const State<1>& y, State<1>& d) const { d[0] = y[0]; }
  };
  Dopri5<1, Rhs> s(Rhs{}, 0.0, State<1>{1.0});
  while (s.advance(1.0)) {
  }
  CHECK(s.y()[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-10));
}

TEST_CASE("dense output matches the solution inside a step") {
  struct Rhs {
    void operator()(double t, const State<1>&, State<1>& d) const { d[0] = std::cos(t); }
  };
  OdeOptions opt;
  opt.rel_tol = 1e-8;
  opt.abs_tol = 1e-10;
  Dopri5<1, Rhs> s(Rhs{}, 0.0, State<1>{0.0}, opt);
  while (s.advance(3.0)) {
    const auto& st = s.current();
    for (int i = 1; i < 5; ++i) {
      const double t = st.t0 + (st.t1 - st.t0) * i / 5;
      CHECK(st.eval_component(t, 0) == doctest::Approx(std::sin(t)).epsilon(1e-7));
    }
  }
}

TEST_CASE("single upper arc follows the parabola") {
  const auto par = parabola_system();
  const auto traj = flow(par, {-1.0, 1.0}, Side::Upper, 0.9);
  REQUIRE(traj.arcs.size() == 1);
  const auto& arc = traj.arcs[0];
  CHECK(arc.kind == ArcKind::Upper);
  CHECK(arc.exit_event == EventKind::TimeOut);
  for (const auto& [t, q] : arc.samples)
    CHECK(std::abs(q.y - q.x * q.x) <= 1e-9);  // first integral y - x^2
}

TEST_CASE("graze at a visible fold continues in the zone") {
  const auto par = parabola_system();
  const auto traj = flow(par, {-1.0, 1.0}, Side::Upper, 2.5);
  bool grazed = false;
  double t_graze = 0.0;
  for (const auto& arc : traj.arcs) {
    CHECK(arc.kind == ArcKind::Upper);
    if (arc.exit_event == EventKind::Grazing) {
      grazed = true;
      t_graze = arc.t_end();
    }
  }
  CHECK(grazed);
  CHECK(t_graze == doctest::Approx(1.0).epsilon(1e-6));
  const Point end = traj.end_point();
  CHECK(end.x == doctest::Approx(1.5).epsilon(1e-8));
  CHECK(end.y == doctest::Approx(2.25).epsilon(1e-7));
}

TEST_CASE("boundary hit then sliding") {
  SmoothField u, l;
  u.eval = [](Vec2, const Alpha&) -> Vec2 { return {1.0, -1.0}; };
  l.eval = [](Vec2, const Alpha&) -> Vec2 { return {1.0, 1.0}; };
  const FilippovSystem sys{u, l, false};
  const auto traj = flow(sys, {0.0, 0.5}, Side::Upper, 2.0);
  REQUIRE(traj.arcs.size() == 2);
  CHECK(traj.arcs[0].kind == ArcKind::Upper);
  CHECK(traj.arcs[0].exit_event == EventKind::SlidingEntry);
  CHECK(traj.arcs[0].p_end().x == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(traj.arcs[1].kind == ArcKind::Sliding);
  CHECK(traj.arcs[1].exit_event == EventKind::TimeOut);
  // sliding velocity 1: ends at x = 0.5 + 1.5
  CHECK(traj.end_point().x == doctest::Approx(2.0).epsilon(1e-9));
  for (const auto& [t, q] : traj.arcs[1].samples) CHECK(std::abs(q.y) <= 1e-12);
}

TEST_CASE("sliding exits at the visible fold") {
  // beta-form Thompson-Hunt, beta1 > 0: stable sliding on (-2 beta1, 0),
  // midpoint pseudo-saddle at -beta1. Start sliding right of the saddle:
  // the slide exits at the upper fold x = 0 into the upper zone.
  const double beta1 = 0.1;
  const Alpha al{-beta1, 0.0};
  const auto sys = translate_x(thompson_hunt(-1.0, 0.28), beta1);
  const auto traj = flow(sys, {-0.3 * beta1, 0.0}, Side::Upper, 1.0, al);
  REQUIRE(traj.arcs.size() >= 2);
  CHECK(traj.arcs[0].kind == ArcKind::Sliding);
  CHECK(traj.arcs[0].exit_event == EventKind::FoldExit);
  CHECK(traj.arcs[0].p_end().x == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(traj.arcs[1].kind == ArcKind::Upper);
}

TEST_CASE("sliding stops at the pseudo-equilibrium") {
  // attracting pseudo-node: Z+ = (-x, -1), Z- = (-x, 1) gives Zs = (-x, 0)
  SmoothField u, l;
  u.eval = [](Vec2 p, const Alpha&) -> Vec2 { return {-p.x, -1.0}; };
  l.eval = [](Vec2 p, const Alpha&) -> Vec2 { return {-p.x, 1.0}; };
  const FilippovSystem sys{u, l, false};
  const auto traj = flow(sys, {0.5, 0.0}, Side::Upper, 100.0);
  CHECK(traj.arcs.back().exit_event == EventKind::EquilibriumStop);
  CHECK(std::abs(traj.end_point().x) <= 1e-6);
}

TEST_CASE("event idempotence") {
  SmoothField u, l;
  u.eval = [](Vec2, const Alpha&) -> Vec2 { return {1.0, -1.0}; };
  l.eval = [](Vec2, const Alpha&) -> Vec2 { return {1.0, -1.0}; };
  const FilippovSystem sys{u, l, false};  // crossing everywhere (both g < 0)
  const auto traj = flow(sys, {0.0, 0.5}, Side::Upper, 1.0);
  REQUIRE(traj.arcs.size() == 2);
  const Point hit = traj.arcs[0].p_end();
  // restart exactly from the located event: the same event must not re-fire
  const auto traj2 = flow(sys, hit, Side::Lower, 0.4);
  REQUIRE(traj2.arcs.size() == 1);
  CHECK(traj2.arcs[0].kind == ArcKind::Lower);
  CHECK(traj2.arcs[0].exit_event == EventKind::TimeOut);
}

TEST_CASE("Z2 trajectory symmetry") {
  const auto sys = thompson_hunt(-1.0, 0.28);
  const Point p0{0.3, 0.4};
  const auto a = flow(sys, p0, Side::Upper, 1.5);
  const auto b = flow(sys, {-p0.x, -p0.y}, Side::Lower, 1.5);
  const Point pa = a.end_point(), pb = b.end_point();
  CHECK(pb.x == doctest::Approx(-pa.x).epsilon(1e-9));
  CHECK(pb.y == doctest::Approx(-pa.y).epsilon(1e-9));
}

TEST_CASE("hit_section on the circle system") {
  const auto cir = circle_system();
  // forward from the top: full revolution back to the top in 2*pi
  Section top;
  top.vertical = true;
  top.c = 0.0;
  top.lo = 1.0;
  auto r = hit_section(cir, {0.0, 2.0}, Side::Upper, top, true);
  CHECK(r.t == doctest::Approx(2 * M_PI).epsilon(1e-8));
  CHECK(r.p.y == doctest::Approx(2.0).epsilon(1e-8));

  // from the origin to the horizontal section y = 2: half revolution
  Section horiz;
  horiz.vertical = false;
  horiz.c = 2.0;
  // the touch is tangential: its location is conditioned like a square root,
  // so accuracy is ~sqrt(integration error)
  r = hit_section(cir, {0.0, 0.0}, Side::Upper, horiz, true);
  CHECK(r.t == doctest::Approx(M_PI).epsilon(1e-4));
  CHECK(std::abs(r.p.x) < 1e-4);

  // parabola from (-1,1) forward to y = 0: t = 1 at the origin
  const auto par = parabola_system();
  Section sigma;
  sigma.vertical = false;
  sigma.c = 0.0;
  r = hit_section(par, {-1.0, 1.0}, Side::Upper, sigma, true);
  CHECK(r.t == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.p.x == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("poincare map contraction on the circle") {
  const auto cir = circle_system();
  IntegratorOptions opts;
  auto r = poincare_map(cir, 0.0, 2.0, Side::Upper, kAlphaZero, opts, 100.0, 1.0);
  CHECK(r.y1 == doctest::Approx(2.0).epsilon(1e-8));
  // the contraction (about 3.5e-6 per turn) sits below the finite-difference
  // noise floor, so the derivative cross-check uses the divergence integral
  const double dp = poincare_derivative_div(cir, 0.0, 2.0, Side::Upper, kAlphaZero, opts,
                                            100.0, 1.0);
  CHECK(dp == doctest::Approx(std::exp(-4 * M_PI)).epsilon(1e-4));

  r = poincare_map(cir, 0.0, 2.1, Side::Upper, kAlphaZero, opts, 100.0, 1.0);
  CHECK(r.y1 > 2.0);
  CHECK(r.y1 < 2.1);
  r = poincare_map(cir, 0.0, 1.9, Side::Upper, kAlphaZero, opts, 100.0, 1.0);
  CHECK(r.y1 > 1.9);
  CHECK(r.y1 < 2.0);
}
