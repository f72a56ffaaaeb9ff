#include <cmath>

#include "doctest.h"
#include "filippov/models.hpp"
#include "filippov/variational.hpp"

using namespace filippov;

namespace {

// Checks the exact relations tying the one-sided quantities to the full-cycle
// ones. The minus side comes from an independent backward integration, so
// these are genuine cross-checks of two separate quadratures.
void check_identities(const IntrinsicQuantities& q, const FilippovSystem& sys,
                      const GrazingCycleData& gcd, double tol) {
  const double lam = q.lambda0;
  const double lp = q.lambda_pm0[0], lm = q.lambda_pm0[1];
  const double g_ab = sys.upper(gcd.section, gcd.alpha).y;
  const double f0 = sys.upper({0, 0}, gcd.alpha).x;
  const double gx0 = sys.upper.partial_x({0, 0}, gcd.alpha).y;

  CHECK(std::abs(lm - lp / lam) <= tol * std::max(1.0, std::abs(lm)));
  for (int i = 0; i < 2; ++i) {
    const double k = (i == 0) ? q.kappa1 : q.kappa2;
    const double kp = q.kappa_pm[static_cast<std::size_t>(i)][0];
    const double km = q.kappa_pm[static_cast<std::size_t>(i)][1];
    CHECK(std::abs(km - (kp - k * lm)) <= tol * std::max(1.0, std::abs(km)));
  }
  CHECK(std::abs(q.nu_pm[1] - (q.nu_pm[0] - q.nu * lm)) <= tol);
  // nu+ = nu- = -g+(a,b): follows from d/dt [lambda g] = lambda (g f_x - f g_x)
  // along the orbit together with g(O) = 0
  CHECK(std::abs(q.nu_pm[0] + g_ab) <= tol * std::max(1.0, std::abs(g_ab)));
  CHECK(std::abs(q.nu_pm[1] + g_ab) <= tol * std::max(1.0, std::abs(g_ab)));

  CHECK(std::abs(q.A1_pm[0] - q.A1_pm[1]) <= tol);
  CHECK(std::abs((q.A2_pm[0] - q.A2_pm[1]) - lm * (lam - 1.0) * f0 / g_ab) <= tol);
  CHECK(std::abs((q.B_pm[0] - q.B_pm[1]) - lm * (lam - 1.0) * gx0 / (2.0 * g_ab)) <= tol);
}

}  // namespace

TEST_CASE("circle grazing cycle geometry") {
  const auto sys = circle_system();
  const auto gcd = grazing_cycle(sys);

  CHECK(gcd.T0 == doctest::Approx(2.0 * M_PI).epsilon(1e-9));
  CHECK(std::abs(gcd.eval(gcd.T0)[1]) <= 1e-9);
  CHECK(gcd.section.x == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(gcd.section.y == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(gcd.tau_plus == doctest::Approx(M_PI / 2).epsilon(1e-7));
  CHECK(std::abs(gcd.tau_plus - gcd.tau_minus - gcd.T0) <= 1e-9);
}

TEST_CASE("circle multiplier matches exp(-4 pi)") {
  const auto sys = circle_system();
  const auto gcd = grazing_cycle(sys);
  const auto fl = floquet(gcd);
  const double exact = std::exp(-4.0 * M_PI);
  CHECK(std::abs(fl.lambda0 - exact) <= 1e-6 * exact);
  // lambda(T0) = 1 by definition
  CHECK(fl.lambda_t.back().second == doctest::Approx(1.0).epsilon(1e-12));
  // lambda(t) = exp(-2 t_rem + sin-like correction) stays positive
  for (const auto& [t, lam] : fl.lambda_t) CHECK(lam > 0.0);
}

TEST_CASE("circle melnikov integrals and identities") {
  const auto sys = circle_system();
  // strong contraction (lambda = e^{-4 pi}) makes the minus-side quadrature
  // weight large, so run this one tighter than the defaults
  IntegratorOptions tight;
  tight.rel_tol = 1e-12;
  tight.abs_tol = 1e-14;
  const auto gcd = grazing_cycle(sys, kAlphaZero, tight);
  const auto mk = melnikov_kappas(gcd);
  // nu vanishes for any grazing cycle whose tangency point is a fold
  CHECK(std::abs(mk.nu) <= 1e-8);

  const auto q = partial_coefficients(gcd, sys);
  CHECK(q.kappa1 == doctest::Approx(mk.kappa1).epsilon(1e-12));
  check_identities(q, sys, gcd, 1e-8);

  // signs for lambda(0) < 1 with g_x > 0 and g(a,b) > 0
  CHECK(q.lambda0 < 1.0);
  CHECK(q.B_pm[0] > 0.0);
  CHECK(q.B_pm[1] > 0.0);
  CHECK(q.A2_pm[0] - q.A2_pm[1] < 0.0);
  CHECK(q.B_pm[0] - q.B_pm[1] < 0.0);
}

TEST_CASE("non-grazing inputs are rejected") {
  CHECK_THROWS_AS(grazing_cycle(parabola_system(), kAlphaZero, {}, 50.0), NotGrazing);
  // fold displaced away from the origin
  auto shifted = translate_x(circle_system(), 0.5);
  CHECK_THROWS_AS(grazing_cycle(shifted), NotGrazing);
}

TEST_CASE("thompson-hunt cycle at the grazing parameter") {
  const double theta = 0.2812467707224322;
  const auto sys = thompson_hunt(-1.0, theta);
  const auto gcd = grazing_cycle(sys);

  CHECK(gcd.T0 == doctest::Approx(6.987556017670462).epsilon(1e-7));
  CHECK(gcd.section.x == doctest::Approx(0.6484716656528716).epsilon(1e-6));
  CHECK(gcd.section.y == doctest::Approx(1.6952643379778052).epsilon(1e-6));
  CHECK(std::abs(gcd.tau_plus - gcd.tau_minus - gcd.T0) <= 1e-9);

  const auto q = partial_coefficients(gcd, sys);
  CHECK(q.lambda0 == doctest::Approx(0.20912457482247687).epsilon(1e-7));
  CHECK(q.kappa2 == doctest::Approx(3.1960507923289154).epsilon(1e-6));
  CHECK(std::abs(q.kappa1) <= 1e-7);
  CHECK(std::abs(q.nu) <= 1e-7);
  CHECK(sys.upper(gcd.section, kAlphaZero).y ==
        doctest::Approx(0.973485964580825).epsilon(1e-6));
  check_identities(q, sys, gcd, 1e-8);

  // g_{alpha1} = 1, g_{alpha2} = 0 at the origin, so the transversality
  // number reduces to -kappa2
  const double tr = transversality(q.kappa1, q.kappa2, sys);
  CHECK(tr == doctest::Approx(-q.kappa2).epsilon(1e-12));
  CHECK(std::abs(tr) > 1.0);
}

TEST_CASE("beta jacobian structure for thompson-hunt") {
  const double theta = 0.2812467707224322;
  const auto sys = thompson_hunt(-1.0, theta);
  const auto gcd = grazing_cycle(sys);
  const auto q = partial_coefficients(gcd, sys);
  const auto J = beta_jacobian(q, sys);

  // g_x = 1, f = 1, g_{alpha} = (1, 0) at the origin
  CHECK(J[0][0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(J[0][1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(J[1][0]) <= 1e-6);
  CHECK(J[1][1] == doctest::Approx(q.kappa2 / (1.0 - q.lambda0)).epsilon(1e-12));

  const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
  const double expected =
      transversality(q.kappa1, q.kappa2, sys) / (1.0 * 1.0 * (1.0 - q.lambda0));
  CHECK(det == doctest::Approx(expected).epsilon(1e-9));

  IntrinsicQuantities flat = q;
  flat.lambda0 = 1.0 + 1e-9;
  CHECK_THROWS_AS(beta_jacobian(flat, sys), HyperbolicityViolated);
}

TEST_CASE("quantities stable across tolerance refinement") {
  const auto sys = circle_system();
  IntegratorOptions coarse;
  coarse.rel_tol = 1e-8;
  coarse.abs_tol = 1e-10;
  IntegratorOptions fine;
  fine.rel_tol = 1e-11;
  fine.abs_tol = 1e-13;
  const auto qc = partial_coefficients(grazing_cycle(sys, kAlphaZero, coarse), sys);
  const auto qf = partial_coefficients(grazing_cycle(sys, kAlphaZero, fine), sys);
  CHECK(std::abs(qc.kappa1 - qf.kappa1) <= 1e-7 * std::max(1.0, std::abs(qf.kappa1)));
  CHECK(std::abs(qc.kappa2 - qf.kappa2) <= 1e-7 * std::max(1.0, std::abs(qf.kappa2)));
  CHECK(std::abs(qc.lambda0 - qf.lambda0) <= 1e-7);
}
