#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "filippov/boundary.hpp"
#include "filippov/errors.hpp"
#include "filippov/field.hpp"
#include "filippov/hybrid.hpp"
#include "filippov/ode.hpp"
#include "filippov/variational.hpp"

namespace filippov {

/// Abscissa of the unique Z+ fold near the origin: Newton root of g+(x,0;a).
inline double fold_offset(const FilippovSystem& sys, const Alpha& alpha = kAlphaZero) {
  double x = 0.0;
  for (int it = 0; it < 50; ++it) {
    const double g = sys.upper({x, 0.0}, alpha).y;
    if (std::abs(g) <= 1e-12) return x;
    const double gx = sys.upper.partial_x({x, 0.0}, alpha).y;
    if (std::abs(gx) < 1e-14) throw NoConvergence("fold_offset: g_x vanished");
    x -= g / gx;
  }
  throw NoConvergence("fold_offset: no convergence after 50 iterations");
}

namespace detail {

/// y at the first crossing of the vertical line x = c with dx/dt > 0, for the
/// one-sided smooth flow started at (c, y0). An anticlockwise rotary orbit
/// crosses the line falling at the top and rising at the bottom, so this is
/// the bottom-branch return map.
inline double rising_return(const SmoothField& fld, const Alpha& alpha, double c, double y0,
                            const IntegratorOptions& opts, double t_budget) {
  struct Rhs {
    const SmoothField* f;
    const Alpha* a;
    void operator()(double, const State<2>& y, State<2>& d) const {
      const Vec2 v = (*f)({y[0], y[1]}, *a);
      d[0] = v.x;
      d[1] = v.y;
    }
  };
  OdeOptions oopt{opts.rel_tol, opts.abs_tol, opts.max_step};
  Dopri5<2, Rhs> stepper(Rhs{&fld, &alpha}, 0.0, State<2>{c, y0}, oopt);
  bool armed = false;
  while (stepper.advance(t_budget)) {
    const auto& st = stepper.current();
    const int n = 16;
    double ta = st.t0, fa = st.eval_component(ta, 0) - c;
    for (int i = 1; i <= n; ++i) {
      const double tb = st.t0 + (st.t1 - st.t0) * i / n;
      const double fb = st.eval_component(tb, 0) - c;
      if (!armed) {
        if (std::abs(fb) > 2 * opts.event_tol) armed = true;
      } else if (fa < 0 && fb >= 0) {
        const double th = locate_zero(
            st, [c](const DenseStep<2>& s, double tt) { return s.eval_component(tt, 0) - c; },
            ta, tb);
        return st.eval_component(th, 1);
      }
      ta = tb;
      fa = fb;
    }
  }
  throw NoReturn("rising_return: no return within t=" + std::to_string(t_budget));
}

}  // namespace detail

/// Signed offset beta2 of the Z+ limit cycle from Sigma, measured on the
/// vertical section through the fold: the fixed point of the bottom-branch
/// return map, solved by damped Newton from the continuation seed. Positive
/// iff the cycle lies strictly above Sigma.
inline double cycle_offset(const FilippovSystem& sys, const Alpha& alpha = kAlphaZero,
                           const IntegratorOptions& opts = {}, double seed = 0.0,
                           double t_budget = 200.0) {
  const double c = fold_offset(sys, alpha);
  auto F = [&](double y) {
    try {
      return detail::rising_return(sys.upper, alpha, c, y, opts, t_budget) - y;
    } catch (const NoReturn&) {
      throw NoCycle("cycle_offset: orbit does not return to the section");
    }
  };
  double y = seed;
  double f = F(y);
  for (int it = 0; it < 50; ++it) {
    if (std::abs(f) <= 1e-12) return y;
    const double h = 1e-7 * std::max(1.0, std::abs(y));
    const double fp = (F(y + h) - F(y - h)) / (2 * h);
    if (!std::isfinite(fp) || std::abs(fp) < 1e-10)
      throw NoCycle("cycle_offset: degenerate return-map derivative");
    double step = -f / fp;
    bool accepted = false;
    for (int k = 0; k < 30; ++k) {
      const double yn = y + step;
      const double fn = F(yn);
      if (std::abs(fn) < std::abs(f)) {
        y = yn;
        f = fn;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) throw NoCycle("cycle_offset: damped Newton stalled");
  }
  throw NoCycle("cycle_offset: no convergence after 50 iterations");
}

/// A system translated to beta-form (Z+ fold at the origin, Z- fold at
/// (-2*beta1, 0)) together with the fixed geometric data of the unperturbed
/// grazing cycle that the transition maps need.
struct BetaSystem {
  FilippovSystem sys;  // beta-form
  Alpha alpha = kAlphaZero;
  std::array<double, 2> beta{};
  Point section{};    // (a, b) of Gamma_0, in the translated frame
  double delta = 0;   // half-width of the section segment Pi
  double eps1 = 0;    // displacement-domain radius
  double diameter = 0;
  double T0 = 0;
  IntegratorOptions opts{};
};

enum class MapSide { Plus, Minus };

/// Transition map D+/D-: abscissa of the first hit on the section segment
/// Pi = {(x, b) : |x - a| < delta} by the forward (plus) or backward (minus)
/// Z+ orbit from (x, 0).
inline double transition_map(const BetaSystem& bs, double x, MapSide side) {
  Section sec;
  sec.vertical = false;
  sec.c = bs.section.y;
  sec.lo = bs.section.x - bs.delta;
  sec.hi = bs.section.x + bs.delta;
  const auto hit = hit_section(bs.sys, {x, 0.0}, Side::Upper, sec, side == MapSide::Plus,
                               bs.alpha, bs.opts, 5.0 * bs.T0);
  return hit.p.x;
}

/// Fixed geometric data of the unperturbed grazing cycle, reusable across
/// many perturbed parameter points.
struct BetaGeometry {
  Point section{};  // (a, b), original frame
  double delta = 0;
  double eps1_max = 0;
  double diameter = 0;
  double T0 = 0;
};

inline BetaGeometry beta_geometry(const GrazingCycleData& gcd) {
  BetaGeometry geo;
  geo.section = gcd.section;
  geo.T0 = gcd.T0;

  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  std::vector<double> hits;  // cycle crossings of y = b other than (a,b)
  {
    double tprev = 0.0;
    double yprev = -gcd.section.y;  // y(0) - b
    for (const auto& st : gcd.steps) {
      const double t = std::min(st.t1, gcd.T0);
      const State<6> s = gcd.eval(t);
      xmin = std::min(xmin, s[0]);
      xmax = std::max(xmax, s[0]);
      ymin = std::min(ymin, s[1]);
      ymax = std::max(ymax, s[1]);
      const double yv = s[1] - gcd.section.y;
      if ((yprev > 0) != (yv > 0)) {
        // locate the crossing coarsely by bisection on the stored cycle
        double ta = tprev, tb = t;
        for (int i = 0; i < 60; ++i) {
          const double tm = 0.5 * (ta + tb);
          if ((gcd.eval(tm)[1] - gcd.section.y > 0) == (yprev > 0))
            ta = tm;
          else
            tb = tm;
        }
        const double xc = gcd.eval(0.5 * (ta + tb))[0];
        if (std::abs(xc - gcd.section.x) > 1e-6) hits.push_back(xc);
      }
      tprev = t;
      yprev = yv;
      if (st.t1 >= gcd.T0) break;
    }
  }
  geo.diameter = std::max(xmax - xmin, ymax - ymin);
  geo.eps1_max = 0.3 * geo.diameter;
  geo.delta = 0.45 * geo.diameter;
  for (const double xc : hits)
    geo.delta = std::min(geo.delta, 0.45 * std::abs(xc - gcd.section.x));
  return geo;
}

/// Beta-form system at one alpha, reusing precomputed cycle geometry.
inline BetaSystem beta_system_from(const FilippovSystem& sys, const Alpha& alpha,
                                   const BetaGeometry& geo, const IntegratorOptions& opts = {},
                                   double beta2_seed = 0.0) {
  BetaSystem bs;
  bs.alpha = alpha;
  bs.opts = opts;
  bs.T0 = geo.T0;
  bs.beta = {fold_offset(sys, alpha), cycle_offset(sys, alpha, opts, beta2_seed)};
  bs.sys = translate_x(sys, bs.beta[0]);
  bs.section = {geo.section.x - bs.beta[0], geo.section.y};
  bs.diameter = geo.diameter;
  bs.delta = geo.delta;
  bs.eps1 = geo.eps1_max;

  // shrink eps1 until both transition maps evaluate at the domain edges: the
  // backward orbit blows up for starts too far from a strongly attracting
  // cycle, so the usable displacement domain can be narrower than 0.3*diam
  const double floor_eps = 1e-3 * bs.diameter;
  while (bs.eps1 > floor_eps) {
    try {
      transition_map(bs, bs.eps1, MapSide::Plus);
      transition_map(bs, -bs.eps1 - 2.0 * bs.beta[0], MapSide::Minus);
      break;
    } catch (const NumericalError&) {
      bs.eps1 *= 0.6;
    }
  }
  if (bs.eps1 <= floor_eps)
    throw NumericalError("beta_system_from: no usable displacement domain");
  return bs;
}

inline BetaSystem make_beta_system(const FilippovSystem& sys, const Alpha& alpha,
                                   const IntegratorOptions& opts = {}) {
  const GrazingCycleData gcd = grazing_cycle(sys, kAlphaZero, opts);
  return beta_system_from(sys, alpha, beta_geometry(gcd), opts);
}

inline double displacement_value(const BetaSystem& bs, double x) {
  return transition_map(bs, x, MapSide::Plus) -
         transition_map(bs, -2.0 * bs.beta[0] - x, MapSide::Minus);
}

struct DisplacementSample {
  double x = 0;
  double value = 0;
  double derivative = 0;
};

inline DisplacementSample displacement(const BetaSystem& bs, double x) {
  DisplacementSample out;
  out.x = x;
  out.value = displacement_value(bs, x);
  const double h = 1e-6 * std::max(1.0, std::abs(x));
  out.derivative = (displacement_value(bs, x + h) - displacement_value(bs, x - h)) / (2 * h);
  return out;
}

struct CrossingCycleInfo {
  double x = 0;          // root of D in the open domain
  int multiplicity = 1;  // 2 when |D'| sits below the double-root band
  bool stable = false;   // D' < 0 (calibrated on the circle system)
  double value = 0;
  double derivative = 0;
};

/// All zeros of D(.;beta) in the open interval (max{-2*beta1,0}, eps1):
/// 400-point scan, bisection, then the derivative/stability data. A
/// no-sign-change near-tangency is reported as one multiplicity-two root.
/// `endpoint_zero` marks the left endpoint as a structural zero of D (the
/// grazing and critical-crossing cases); its residual then calibrates the
/// numerical noise floor so near-endpoint noise roots are rejected.
inline std::vector<CrossingCycleInfo> crossing_cycles(const BetaSystem& bs,
                                                      bool endpoint_zero = false) {
  const double left = std::max(-2.0 * bs.beta[0], 0.0);
  const double right = bs.eps1;
  const int N = 400;
  const double span = right - left;
  const double endpoint_band = 1e-6 * span;  // endpoint zeros belong to the
                                             // critical-crossing case

  std::vector<double> xs(N + 1), vs(N + 1);
  for (int i = 0; i <= N; ++i) {
    xs[static_cast<std::size_t>(i)] = left + span * i / N;
    vs[static_cast<std::size_t>(i)] = displacement_value(bs, xs[static_cast<std::size_t>(i)]);
  }

  // an endpoint zero of D is the critical-crossing / grazing case, not an
  // interior root: skip the prefix where |D| has not yet risen above noise
  double zero_tol = 1e-9 * std::max(1.0, bs.diameter);
  if (endpoint_zero) zero_tol = std::max(zero_tol, 3.0 * std::abs(vs[0]));
  int i0 = 0;
  while (i0 <= N && std::abs(vs[static_cast<std::size_t>(i0)]) <= zero_tol) ++i0;

  std::vector<CrossingCycleInfo> out;
  auto push_root = [&](double x, bool force_mult2) {
    if (x - left <= endpoint_band) return;
    CrossingCycleInfo info;
    const DisplacementSample d = displacement(bs, x);
    info.x = x;
    info.value = d.value;
    info.derivative = d.derivative;
    if (force_mult2) {
      info.multiplicity = 2;
    } else {
      // second difference for the double-root band
      const double h = 1e-4 * std::max(1.0, std::abs(x));
      const double ddpp =
          (displacement_value(bs, x + h) - 2 * d.value + displacement_value(bs, x - h)) / (h * h);
      const double mu_tol = 1e-7 * std::max(1.0, std::abs(ddpp));
      info.multiplicity = (std::abs(d.derivative) < mu_tol && std::abs(ddpp) > 1e-6) ? 2 : 1;
    }
    info.stable = d.derivative < 0;
    out.push_back(info);
  };

  for (int i = std::max(i0 + 1, 1); i <= N; ++i) {
    const double va = vs[static_cast<std::size_t>(i - 1)];
    const double vb = vs[static_cast<std::size_t>(i)];
    if ((va > 0) == (vb > 0)) continue;
    double a = xs[static_cast<std::size_t>(i - 1)], b = xs[static_cast<std::size_t>(i)];
    double fa = va;
    for (int it = 0; it < 100; ++it) {
      const double m = 0.5 * (a + b);
      if (m == a || m == b) break;
      const double fm = displacement_value(bs, m);
      if (fm == 0.0) {
        a = b = m;
        break;
      }
      if ((fm > 0) == (fa > 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    push_root(0.5 * (a + b), false);
  }

  // tangency: an interior |D| local minimum that reaches (numerically) zero
  // without a sign change
  if (out.empty()) {
    int imin = -1;
    for (int i = std::max(i0 + 1, 1); i < N; ++i) {
      const double f0 = std::abs(vs[static_cast<std::size_t>(i - 1)]);
      const double f1 = std::abs(vs[static_cast<std::size_t>(i)]);
      const double f2 = std::abs(vs[static_cast<std::size_t>(i + 1)]);
      if (f1 <= f0 && f1 <= f2 && (imin < 0 || f1 < std::abs(vs[static_cast<std::size_t>(imin)])))
        imin = i;
    }
    if (imin > 0) {
      double a = xs[static_cast<std::size_t>(imin - 1)], b = xs[static_cast<std::size_t>(imin + 1)];
      for (int it = 0; it < 60; ++it) {
        const double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
        if (std::abs(displacement_value(bs, m1)) < std::abs(displacement_value(bs, m2)))
          b = m2;
        else
          a = m1;
      }
      const double xm = 0.5 * (a + b);
      // a vanishing interior minimum with no sign change is a double root
      if (std::abs(displacement_value(bs, xm)) <= 1e-9 * std::max(1.0, bs.diameter))
        push_root(xm, true);
    }
  }
  return out;
}

struct BoundaryFunctions {
  double P = 0;       // D+(-b1) - D-(0), the homoclinic function for b1 < 0
  double Q = 0;       // D+(0) - D-(-b1), the homoclinic function for b1 > 0
  double D_left = 0;  // D at the left end max{-2*b1, 0} of the domain
};

inline BoundaryFunctions boundary_functions(const BetaSystem& bs) {
  const double b1 = bs.beta[0];
  BoundaryFunctions bf;
  bf.P = transition_map(bs, -b1, MapSide::Plus) - transition_map(bs, 0.0, MapSide::Minus);
  bf.Q = transition_map(bs, 0.0, MapSide::Plus) - transition_map(bs, -b1, MapSide::Minus);
  bf.D_left = displacement_value(bs, std::max(-2.0 * b1, 0.0));
  return bf;
}

struct PortraitEntry {
  std::string stability;
  Point rep{};
  double closure_gap = 0;  // certification residual from direct integration
  int multiplicity = 1;
};

struct PortraitInventory {
  std::vector<PortraitEntry> standard_cycles;
  std::vector<PortraitEntry> crossing_cycles;
  std::vector<PortraitEntry> critical_crossing;
  std::vector<PortraitEntry> sliding_cycles_one_zonal;
  std::vector<PortraitEntry> sliding_cycles_two_zonal;
  std::vector<PortraitEntry> sliding_homoclinics;
  std::vector<PortraitEntry> grazing_cycles;
};

struct ClassifyOptions {
  double edge_tol = 1e-9;  // zero band for beta2, P, Q and the endpoint value
  double cert_tol = 1e-7;  // max closure gap accepted by certification
  bool certify = true;
};

namespace detail {

/// Smallest distance from a later arc junction of the hybrid orbit to its
/// start point: a closed orbit through `start` yields a near-zero gap.
inline double closure_gap(const FilippovSystem& sys, const Alpha& alpha, Point start,
                          double t_max, double t_min, const IntegratorOptions& opts) {
  const auto traj = flow(sys, start, Side::Upper, t_max, alpha, opts);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < traj.arcs.size(); ++i) {
    if (traj.arcs[i].t_start() < t_min) continue;
    best = std::min(best, (traj.arcs[i].p_start() - start).norm());
  }
  // a trajectory that stops at a pseudo-equilibrium exactly on `start`
  if (!traj.arcs.empty() && traj.arcs.back().exit_event == EventKind::EquilibriumStop)
    best = std::min(best, (traj.end_point() - start).norm());
  return best;
}

}  // namespace detail

/// Full inventory at one parameter point per the displacement-map sign logic,
/// with every detected object certified by direct hybrid integration. Objects
/// on the unstable-sliding side (beta1 < 0) are certified in reversed time,
/// where their sliding segments become attracting.
inline PortraitInventory classify_portrait(const BetaSystem& bs,
                                           const ClassifyOptions& copts = {}) {
  PortraitInventory inv;
  const double b1 = bs.beta[0], b2 = bs.beta[1];
  const double left = std::max(-2.0 * b1, 0.0);
  const double et = copts.edge_tol;
  const BoundaryFunctions bf = boundary_functions(bs);
  const FilippovSystem rev = reverse_time(bs.sys);
  const double t_min = 0.1 * bs.T0;

  auto certify = [&](const char* what, double gap) {
    if (copts.certify && !(gap <= copts.cert_tol))
      throw InconsistentDetection(std::string("classify_portrait: ") + what +
                                  " failed certification, closure gap " + std::to_string(gap));
    return gap;
  };

  // standard / grazing cycles from the sign of beta2
  if (std::abs(b2) <= et) {
    double gap = 0;
    try {
      const auto gcd = grazing_cycle(bs.sys, bs.alpha, bs.opts);
      gap = std::abs(gcd.eval(gcd.T0)[1]);
    } catch (const NotGrazing&) {
      gap = std::numeric_limits<double>::infinity();
    }
    certify("grazing cycle", gap);
    inv.grazing_cycles.push_back({"internally-stable", {0, 0}, gap, 1});
    inv.grazing_cycles.push_back({"internally-stable", {-2 * b1, 0}, gap, 1});
  } else if (b2 > et) {
    const double res =
        std::abs(detail::rising_return(bs.sys.upper, bs.alpha, 0.0, b2, bs.opts, 5 * bs.T0) - b2);
    certify("standard cycle", res);
    inv.standard_cycles.push_back({"stable", {0, b2}, res, 1});
    inv.standard_cycles.push_back({"stable", {-2 * b1, -b2}, res, 1});
  }

  // crossing cycles from the zeros of D
  // D is structurally zero at the left endpoint only for the fold-fold
  // figure-eight (beta = 0) and on the critical-crossing locus
  const bool endpoint_zero = (std::abs(b1) <= et && std::abs(b2) <= et) ||
                             (std::abs(b1) > et && std::abs(bf.D_left) <= et);
  for (const auto& cc : crossing_cycles(bs, endpoint_zero)) {
    // an unstable cycle attracts in reversed time, so certify it there
    const FilippovSystem& csys = (cc.multiplicity == 1 && !cc.stable) ? rev : bs.sys;
    const double gap =
        detail::closure_gap(csys, bs.alpha, {cc.x, 0.0}, 2.6 * bs.T0, t_min, bs.opts);
    certify("crossing cycle", gap);
    const std::string label =
        cc.multiplicity == 2 ? "multiplicity-two" : (cc.stable ? "stable" : "unstable");
    inv.crossing_cycles.push_back({label, {cc.x, 0.0}, gap, cc.multiplicity});
  }

  // critical crossing cycle: D vanishing at the left endpoint (a fold)
  if (std::abs(b1) > et && std::abs(bf.D_left) <= et) {
    const double h = 1e-6 * std::max(1.0, left);
    const double dprime =
        (displacement_value(bs, left + h) - displacement_value(bs, left - h)) / (2 * h);
    const double gap =
        detail::closure_gap(bs.sys, bs.alpha, {left, 0.0}, 2.6 * bs.T0, t_min, bs.opts);
    certify("critical crossing cycle", gap);
    inv.critical_crossing.push_back(
        {dprime < 0 ? "externally-stable" : "externally-unstable", {left, 0.0}, gap, 1});
  }

  // sliding cycles and homoclinics from the sign logic on (P, Q, D_left)
  const bool plus_side = b1 > et && b2 < -et;    // stable sliding segment
  const bool minus_side = b1 < -et && b2 > et;   // unstable sliding segment
  if (plus_side || minus_side) {
    const double W = plus_side ? bf.Q : -bf.P;   // W < 0 <=> one-zonal cycles
    const FilippovSystem& csys = plus_side ? bs.sys : rev;
    const std::string stab = plus_side ? "stable" : "unstable";
    if (std::abs(W) <= et) {
      // orbit from the fold lands exactly on the pseudo-saddle
      const auto traj = flow(csys, {0.0, 0.0}, Side::Upper, 4.0 * bs.T0, bs.alpha, bs.opts);
      double gap = std::numeric_limits<double>::infinity();
      if (!traj.arcs.empty() && traj.arcs.back().exit_event == EventKind::EquilibriumStop)
        gap = (traj.end_point() - Point{-b1, 0.0}).norm();
      certify("sliding homoclinic", gap);
      inv.sliding_homoclinics.push_back({stab, {0, 0}, gap, 1});
      inv.sliding_homoclinics.push_back({stab, {-2 * b1, 0}, gap, 1});
    } else if (W < 0) {
      const double gap =
          detail::closure_gap(csys, bs.alpha, {0.0, 0.0}, 3.0 * bs.T0, t_min, bs.opts);
      certify("one-zonal sliding cycle", gap);
      inv.sliding_cycles_one_zonal.push_back({stab, {0, 0}, gap, 1});
      inv.sliding_cycles_one_zonal.push_back({stab, {-2 * b1, 0}, gap, 1});
    } else if ((plus_side && bf.D_left < -et) || (minus_side && bf.D_left > et)) {
      const double gap =
          detail::closure_gap(csys, bs.alpha, {0.0, 0.0}, 4.5 * bs.T0, t_min, bs.opts);
      certify("two-zonal sliding cycle", gap);
      inv.sliding_cycles_two_zonal.push_back({stab, {0, 0}, gap, 1});
    }
  }
  return inv;
}

}  // namespace filippov
