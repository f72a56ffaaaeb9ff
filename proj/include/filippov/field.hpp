#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <utility>

#include "filippov/errors.hpp"
#include "filippov/geometry.hpp"

namespace filippov {

/// Parameter pair alpha = (alpha1, alpha2). One-parameter studies fix alpha2 = 0.
using Alpha = std::array<double, 2>;
inline constexpr Alpha kAlphaZero{0.0, 0.0};

enum class Side { Upper, Lower };

inline Side opposite(Side s) { return s == Side::Upper ? Side::Lower : Side::Upper; }

/// A C^2 planar vector field (f, g) depending on the parameter pair alpha.
///
/// `eval` is required; the partial-derivative callbacks are optional. When a
/// partial is absent it is computed by central finite differences with step
/// 1e-6 * max(1, |coordinate|). Fields are pure functions of (point, alpha):
/// the same inputs give bitwise-identical outputs.
struct SmoothField {
  using EvalFn = std::function<Vec2(Vec2, const Alpha&)>;

  EvalFn eval;
  EvalFn dx;   ///< d(f,g)/dx, analytic (optional)
  EvalFn dy;   ///< d(f,g)/dy, analytic (optional)
  EvalFn da1;  ///< d(f,g)/dalpha1, analytic (optional)
  EvalFn da2;  ///< d(f,g)/dalpha2, analytic (optional)

  Vec2 operator()(Vec2 p, const Alpha& a) const { return eval(p, a); }

  static double fd_step(double coord) { return 1e-6 * std::max(1.0, std::abs(coord)); }

  Vec2 partial_x(Vec2 p, const Alpha& a) const {
    if (dx) return dx(p, a);
    const double h = fd_step(p.x);
    const Vec2 vp = eval({p.x + h, p.y}, a), vm = eval({p.x - h, p.y}, a);
    return {(vp.x - vm.x) / (2 * h), (vp.y - vm.y) / (2 * h)};
  }
  Vec2 partial_y(Vec2 p, const Alpha& a) const {
    if (dy) return dy(p, a);
    const double h = fd_step(p.y);
    const Vec2 vp = eval({p.x, p.y + h}, a), vm = eval({p.x, p.y - h}, a);
    return {(vp.x - vm.x) / (2 * h), (vp.y - vm.y) / (2 * h)};
  }
  Vec2 partial_alpha(Vec2 p, const Alpha& a, int i) const {
    if (i == 0 && da1) return da1(p, a);
    if (i == 1 && da2) return da2(p, a);
    const double h = fd_step(a[static_cast<std::size_t>(i)]);
    Alpha ap = a, am = a;
    ap[static_cast<std::size_t>(i)] += h;
    am[static_cast<std::size_t>(i)] -= h;
    const Vec2 vp = eval(p, ap), vm = eval(p, am);
    return {(vp.x - vm.x) / (2 * h), (vp.y - vm.y) / (2 * h)};
  }
};

/// Ordered pair (Z+, Z-) across the boundary h(x,y) = y.
struct FilippovSystem {
  SmoothField upper;  ///< Z+ on y > 0
  SmoothField lower;  ///< Z- on y < 0
  bool symmetric = false;

  const SmoothField& side(Side s) const { return s == Side::Upper ? upper : lower; }
};

/// Z-(x,y;alpha) = -Z+(-x,-y;alpha). Partials of the lower field follow by
/// chain rule (sign flips), never by re-differencing.
inline FilippovSystem symmetrize(SmoothField upper) {
  auto reflect_eval = [](const SmoothField::EvalFn& fn, double sign) -> SmoothField::EvalFn {
    if (!fn) return nullptr;
    return [fn, sign](Vec2 p, const Alpha& a) -> Vec2 {
      const Vec2 v = fn({-p.x, -p.y}, a);
      return {sign * v.x, sign * v.y};
    };
  };
  SmoothField lower;
  lower.eval = reflect_eval(upper.eval, -1.0);
  // d/dx [-F(-x,-y)] = Fx(-x,-y); same for d/dy; d/dalpha keeps the minus.
  lower.dx = reflect_eval(upper.dx, +1.0);
  lower.dy = reflect_eval(upper.dy, +1.0);
  lower.da1 = reflect_eval(upper.da1, -1.0);
  lower.da2 = reflect_eval(upper.da2, -1.0);
  return FilippovSystem{std::move(upper), std::move(lower), true};
}

inline Vec2 eval_side(const FilippovSystem& sys, Vec2 p, Side s, const Alpha& a) {
  if (!p.finite()) throw NumericalError("eval_side: non-finite point");
  const Vec2 v = sys.side(s)(p, a);
  if (!v.finite()) throw NumericalError("eval_side: non-finite field value");
  return v;
}

/// Lie derivatives of h = y along one side at (x0, 0):
///   Zh  = g,   Z^2 h = f*g_x + g*g_y.
struct LieData {
  double zh = 0.0;
  double z2h = 0.0;
};

inline LieData lie_derivatives(const FilippovSystem& sys, double x0, Side s, const Alpha& a) {
  const SmoothField& fld = sys.side(s);
  const Vec2 p{x0, 0.0};
  const Vec2 v = fld(p, a);
  const Vec2 vx = fld.partial_x(p, a);
  const Vec2 vy = fld.partial_y(p, a);
  const double z2h = v.x * vx.y + v.y * vy.y;
  if (!std::isfinite(v.y) || !std::isfinite(z2h))
    throw NumericalError("lie_derivatives: non-finite partials");
  return {v.y, z2h};
}

/// Coordinate translation x -> x + shift applied to a field (the field seen in
/// the shifted frame).
inline SmoothField translate_x(const SmoothField& fld, double shift) {
  auto wrap = [shift](const SmoothField::EvalFn& fn) -> SmoothField::EvalFn {
    if (!fn) return nullptr;
    return [fn, shift](Vec2 p, const Alpha& a) { return fn({p.x + shift, p.y}, a); };
  };
  SmoothField out;
  out.eval = wrap(fld.eval);
  out.dx = wrap(fld.dx);
  out.dy = wrap(fld.dy);
  out.da1 = wrap(fld.da1);
  out.da2 = wrap(fld.da2);
  return out;
}

inline FilippovSystem translate_x(const FilippovSystem& sys, double shift) {
  return FilippovSystem{translate_x(sys.upper, shift), translate_x(sys.lower, shift),
                        sys.symmetric};
}

/// Time reversal (both fields negated). Turns unstable sliding segments into
/// stable ones, which lets forward hybrid integration follow orbits that are
/// only reachable backward in time.
inline FilippovSystem reverse_time(const FilippovSystem& sys) {
  auto negate = [](const SmoothField& fld) {
    auto wrap = [](const SmoothField::EvalFn& fn) -> SmoothField::EvalFn {
      if (!fn) return nullptr;
      return [fn](Vec2 p, const Alpha& a) { return -fn(p, a); };
    };
    SmoothField out;
    out.eval = wrap(fld.eval);
    out.dx = wrap(fld.dx);
    out.dy = wrap(fld.dy);
    out.da1 = wrap(fld.da1);
    out.da2 = wrap(fld.da2);
    return out;
  };
  return FilippovSystem{negate(sys.upper), negate(sys.lower), sys.symmetric};
}

}  // namespace filippov
