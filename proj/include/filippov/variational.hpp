#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "filippov/errors.hpp"
#include "filippov/field.hpp"
#include "filippov/hybrid.hpp"
#include "filippov/ode.hpp"

namespace filippov {

/// The grazing cycle of the upper subsystem through the fold O = (0,0),
/// with the augmented quadrature states accumulated along it:
///   state = (x, y, u, I1, I2, I3)
///   u'  = (f_x + g_y)                       (divergence integral)
///   Ii' = w_i * exp(-u),  w1 = f g_a1 - g f_a1, w2 likewise for alpha2,
///                         w3 = g f_x - f g_x
/// so that lambda(0) = e^{u(T0)} and kappa_i = e^{u(T0)} Ii(T0), and the
/// one-sided quantities follow from the same states at tau0+ (and from an
/// independent backward run at tau0-).
struct GrazingCycleData {
  std::vector<DenseStep<6>> steps;  // forward run, t in [0, T0]
  double T0 = 0.0;
  Point section{};     // (a, b) on the cycle with g+(a,b) > 0
  double tau_plus = 0.0;
  double tau_minus = 0.0;  // < 0; from the independent section-to-O run
  // minus-side quantities from that independent run
  double lambda_minus0 = 0.0;
  std::array<double, 3> minus_integrals{};  // kappa1-, kappa2-, nu-
  Alpha alpha = kAlphaZero;

  State<6> eval(double t) const {
    t = std::clamp(t, 0.0, T0);
    std::size_t lo = 0, hi = steps.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (steps[mid].t1 < t)
        lo = mid + 1;
      else
        hi = mid;
    }
    return steps[lo].eval(t);
  }
};

struct IntrinsicQuantities {
  double lambda0 = 0.0;
  double kappa1 = 0.0, kappa2 = 0.0, nu = 0.0;
  std::array<double, 2> lambda_pm0{};            // lambda+(0), lambda-(0)
  std::array<std::array<double, 2>, 2> kappa_pm{};  // [i][0]=kappa_i+, [i][1]=kappa_i-
  std::array<double, 2> nu_pm{};
  std::array<double, 2> A1_pm{}, A2_pm{}, B_pm{};
};

namespace detail {

struct AugRhs {
  const SmoothField* fld;
  const Alpha* alpha;

  void operator()(double, const State<6>& y, State<6>& d) const {
    const Vec2 p{y[0], y[1]};
    const Vec2 v = (*fld)(p, *alpha);
    const Vec2 vx = fld->partial_x(p, *alpha);
    const Vec2 vy = fld->partial_y(p, *alpha);
    const Vec2 va1 = fld->partial_alpha(p, *alpha, 0);
    const Vec2 va2 = fld->partial_alpha(p, *alpha, 1);
    const double emu = std::exp(-y[2]);
    d[0] = v.x;
    d[1] = v.y;
    d[2] = vx.x + vy.y;
    d[3] = (v.x * va1.y - v.y * va1.x) * emu;
    d[4] = (v.x * va2.y - v.y * va2.x) * emu;
    d[5] = (v.y * vx.x - v.x * vx.y) * emu;
  }
};

}  // namespace detail

/// Integrates the upper subsystem from O forward until the cycle closes,
/// keeping the augmented quadrature states. The section point (a,b) is the
/// sample at phase T0/4 after O when g+ > 0 there (the maximal-y point
/// itself is degenerate, g = 0); otherwise the sampled point maximizing g+.
inline GrazingCycleData grazing_cycle(const FilippovSystem& sys,
                                      const Alpha& alpha = kAlphaZero,
                                      const IntegratorOptions& opts = {},
                                      double t_budget = 200.0) {
  const LieData fold = lie_derivatives(sys, 0.0, Side::Upper, alpha);
  if (std::abs(fold.zh) > 1e-9)
    throw NotGrazing("grazing_cycle: g+(0,0) = " + std::to_string(fold.zh) +
                     ", fold not at O");
  if (fold.z2h <= 0) throw NotGrazing("grazing_cycle: fold at O is not visible");

  GrazingCycleData gcd;
  gcd.alpha = alpha;

  detail::AugRhs rhs{&sys.upper, &alpha};
  OdeOptions oopt{opts.rel_tol, opts.abs_tol, opts.max_step};
  Dopri5<6, detail::AugRhs> stepper(rhs, 0.0, State<6>{0, 0, 0, 0, 0, 0}, oopt);

  bool armed = false;
  double max_y = 0.0;
  double T0 = -1.0;
  while (T0 < 0 && stepper.advance(t_budget)) {
    const auto& st = stepper.current();
    max_y = std::max(max_y, std::max(st.y0[1], st.y1[1]));
    const int n = 16;
    double ta = st.t0, fa = st.eval_component(ta, 0);
    for (int i = 1; i <= n; ++i) {
      const double tb = st.t0 + (st.t1 - st.t0) * i / n;
      const double fb = st.eval_component(tb, 0);
      if (!armed) {
        if (std::abs(fb) > 2 * opts.event_tol) armed = true;
      } else if (fa < 0 && fb >= 0) {
        const double th = locate_zero(
            st, [](const DenseStep<6>& s, double tt) { return s.eval_component(tt, 0); },
            ta, tb);
        if (st.eval_component(th, 1) < 0.3 * max_y) {
          T0 = th;
          break;
        }
      }
      ta = tb;
      fa = fb;
    }
    gcd.steps.push_back(st);
  }
  if (T0 < 0)
    throw NotGrazing("grazing_cycle: no return to O within t=" + std::to_string(t_budget));

  const State<6> end = gcd.eval(T0);
  if (std::abs(end[1]) > 1e-9)
    throw NotGrazing("grazing_cycle: cycle through O does not close, y(T0) = " +
                     std::to_string(end[1]));
  gcd.T0 = T0;
  // drop stored steps beyond T0 (keep the one containing it)
  while (gcd.steps.size() > 1 && gcd.steps[gcd.steps.size() - 2].t1 >= T0)
    gcd.steps.pop_back();

  // section point
  double tau = T0 / 4;
  {
    State<6> s = gcd.eval(tau);
    double g = sys.upper({s[0], s[1]}, alpha).y;
    if (g <= 0) {
      for (const auto& st : gcd.steps) {
        const double gg = sys.upper({st.y1[0], st.y1[1]}, alpha).y;
        if (gg > g && st.t1 < T0) {
          g = gg;
          tau = st.t1;
        }
      }
      s = gcd.eval(tau);
    }
    if (g <= 0) throw NotGrazing("grazing_cycle: no section point with g+ > 0");
    gcd.tau_plus = tau;
    gcd.section = Point{s[0], s[1]};
  }

  // Independent run for the minus side. Backward integration from O is
  // numerically unstable (the cycle attracts forward), so instead flow
  // forward from the section point (a,b) until the orbit reaches O after
  // time S = -tau0-. With u, Ii reset at (a,b) the change of variables
  // t = tau0- + s gives lambda-(0) = e^{-u(S)} and kappa_i- = -Ii(S).
  {
    Dopri5<6, detail::AugRhs> run(
        rhs, 0.0, State<6>{gcd.section.x, gcd.section.y, 0, 0, 0, 0}, oopt);
    double S = -1.0;
    State<6> at_o{};
    bool armed = std::abs(gcd.section.x) > 2 * opts.event_tol;
    while (S < 0 && run.advance(t_budget)) {
      const auto& st = run.current();
      const int n = 16;
      double ta = st.t0, fa = st.eval_component(ta, 0);
      for (int i = 1; i <= n; ++i) {
        const double tb = st.t0 + (st.t1 - st.t0) * i / n;
        const double fb = st.eval_component(tb, 0);
        if (!armed) {
          if (std::abs(fb) > 2 * opts.event_tol) armed = true;
        } else if (fa < 0 && fb >= 0) {
          const double th = locate_zero(
              st,
              [](const DenseStep<6>& s, double tt) { return s.eval_component(tt, 0); },
              ta, tb);
          if (st.eval_component(th, 1) < 0.3 * max_y) {
            S = th;
            at_o = st.eval(th);
            break;
          }
        }
        ta = tb;
        fa = fb;
      }
    }
    if (S < 0) throw NotGrazing("grazing_cycle: section orbit does not reach O");
    if (std::abs(at_o[1]) > 1e-8)
      throw NotGrazing("grazing_cycle: section orbit misses O");
    gcd.tau_minus = -S;
    gcd.lambda_minus0 = std::exp(-at_o[2]);
    gcd.minus_integrals = {-at_o[3], -at_o[4], -at_o[5]};
  }
  if (std::abs(gcd.tau_plus - gcd.tau_minus - gcd.T0) > 1e-8)
    throw NumericalError("grazing_cycle: tau0+ != tau0- + T0 beyond tolerance");
  return gcd;
}

struct FloquetData {
  double lambda0 = 0.0;
  std::vector<std::pair<double, double>> lambda_t;  // (t, lambda(t)) on step ends
};

/// lambda(t) = exp(int_t^{T0} div) from the stored divergence integral u(t).
inline FloquetData floquet(const GrazingCycleData& gcd) {
  FloquetData out;
  const double uT = gcd.eval(gcd.T0)[2];
  out.lambda0 = std::exp(uT);
  out.lambda_t.emplace_back(0.0, out.lambda0);
  for (const auto& st : gcd.steps) {
    const double t = std::min(st.t1, gcd.T0);
    out.lambda_t.emplace_back(t, std::exp(uT - gcd.eval(t)[2]));
    if (st.t1 >= gcd.T0) break;
  }
  return out;
}

struct Melnikov {
  double kappa1 = 0.0, kappa2 = 0.0, nu = 0.0;
};

inline Melnikov melnikov_kappas(const GrazingCycleData& gcd) {
  const State<6> end = gcd.eval(gcd.T0);
  const double lam0 = std::exp(end[2]);
  return {lam0 * end[3], lam0 * end[4], lam0 * end[5]};
}

/// kappa1 g_{alpha2}(0,0;0) - kappa2 g_{alpha1}(0,0;0).
inline double transversality(double kappa1, double kappa2, const FilippovSystem& sys,
                             const Alpha& alpha = kAlphaZero) {
  const Vec2 ga1 = sys.upper.partial_alpha({0, 0}, alpha, 0);
  const Vec2 ga2 = sys.upper.partial_alpha({0, 0}, alpha, 1);
  return kappa1 * ga2.y - kappa2 * ga1.y;
}

/// One-sided quantities and the displacement-map coefficients of the
/// quadratic expansions. The minus side comes from the independent backward
/// run stored in GrazingCycleData, so the identity suite
/// (kappa_i- = kappa_i+ - kappa_i lambda-(0), etc.) is a genuine check.
inline IntrinsicQuantities partial_coefficients(const GrazingCycleData& gcd,
                                                const FilippovSystem& sys) {
  IntrinsicQuantities q;
  const State<6> end = gcd.eval(gcd.T0);
  q.lambda0 = std::exp(end[2]);
  q.kappa1 = q.lambda0 * end[3];
  q.kappa2 = q.lambda0 * end[4];
  q.nu = q.lambda0 * end[5];

  const State<6> plus = gcd.eval(gcd.tau_plus);
  const double lp0 = std::exp(plus[2]);  // lambda+(0)
  const double lm0 = gcd.lambda_minus0;
  q.lambda_pm0 = {lp0, lm0};
  q.kappa_pm[0] = {lp0 * plus[3], gcd.minus_integrals[0]};
  q.kappa_pm[1] = {lp0 * plus[4], gcd.minus_integrals[1]};
  q.nu_pm = {lp0 * plus[5], gcd.minus_integrals[2]};

  const Alpha& al = gcd.alpha;
  const double g_ab = sys.upper(gcd.section, al).y;
  const double f0 = sys.upper({0, 0}, al).x;
  const double gx0 = sys.upper.partial_x({0, 0}, al).y;
  const double ga1 = sys.upper.partial_alpha({0, 0}, al, 0).y;
  const double ga2 = sys.upper.partial_alpha({0, 0}, al, 1).y;
  const double det = q.kappa1 * ga2 - q.kappa2 * ga1;
  if (std::abs(det) < 1e-14)
    throw NumericalError("partial_coefficients: transversality determinant degenerate");
  if (std::abs(g_ab) < 1e-14)
    throw NumericalError("partial_coefficients: g+(a,b) degenerate");

  for (int s = 0; s < 2; ++s) {
    const double k1s = q.kappa_pm[0][static_cast<std::size_t>(s)];
    const double k2s = q.kappa_pm[1][static_cast<std::size_t>(s)];
    const double nus = q.nu_pm[static_cast<std::size_t>(s)];
    const double lps = q.lambda_pm0[static_cast<std::size_t>(s)];
    q.A1_pm[static_cast<std::size_t>(s)] =
        nus / g_ab -
        (k1s * (q.nu * ga2 + q.kappa2 * gx0) - k2s * (q.nu * ga1 + q.kappa1 * gx0)) /
            (g_ab * det);
    q.A2_pm[static_cast<std::size_t>(s)] =
        (k2s * ga1 - k1s * ga2) * f0 * (1.0 - q.lambda0) / (g_ab * det);
    q.B_pm[static_cast<std::size_t>(s)] = gx0 * lps / (2.0 * g_ab);
  }
  return q;
}

/// d(phi1, phi2)/d(alpha) at alpha = 0 (first-order linearization of the
/// fold-offset and cycle-offset maps).
inline std::array<std::array<double, 2>, 2> beta_jacobian(const IntrinsicQuantities& q,
                                                          const FilippovSystem& sys,
                                                          const Alpha& alpha = kAlphaZero) {
  if (std::abs(q.lambda0 - 1.0) < 1e-6)
    throw HyperbolicityViolated("beta_jacobian: lambda(0) too close to 1");
  const double f0 = sys.upper({0, 0}, alpha).x;
  const double gx0 = sys.upper.partial_x({0, 0}, alpha).y;
  const double ga1 = sys.upper.partial_alpha({0, 0}, alpha, 0).y;
  const double ga2 = sys.upper.partial_alpha({0, 0}, alpha, 1).y;
  const double denom = f0 * (1.0 - q.lambda0);
  return {{{-ga1 / gx0, -ga2 / gx0},
           {(q.nu * ga1 / gx0 + q.kappa1) / denom, (q.nu * ga2 / gx0 + q.kappa2) / denom}}};
}

}  // namespace filippov
