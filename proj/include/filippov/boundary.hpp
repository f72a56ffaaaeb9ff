#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "filippov/errors.hpp"
#include "filippov/field.hpp"

namespace filippov {

inline constexpr double kTangencyTol = 1e-10;   // absolute, on Zh
inline constexpr double kDegenerateTol = 1e-8;  // on Z^2h at a tangency

enum class BoundaryKind {
  Crossing,
  SlidingStable,
  SlidingUnstable,
  Tangency,
  BoundaryEquilibrium,
};

inline const char* to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::Crossing: return "crossing";
    case BoundaryKind::SlidingStable: return "sliding_stable";
    case BoundaryKind::SlidingUnstable: return "sliding_unstable";
    case BoundaryKind::Tangency: return "tangency";
    case BoundaryKind::BoundaryEquilibrium: return "boundary_equilibrium";
  }
  return "?";
}

struct TangencySideInfo {
  bool tangent = false;
  bool is_fold = false;
  bool visible = false;
};

struct BoundaryClass {
  BoundaryKind kind;
  double zph = 0.0, zmh = 0.0;  // Z+h, Z-h at the point
  TangencySideInfo upper, lower;
};

struct TangencyRecord {
  double x;
  bool upper_tangent = false, lower_tangent = false;
  bool upper_fold = false, lower_fold = false;
  bool upper_visible = false, lower_visible = false;

  const char* side_label() const {
    if (upper_tangent && lower_tangent) return "both";
    return upper_tangent ? "upper" : "lower";
  }
};

enum class PseudoStability { PseudoSaddle, PseudoNode };

// The pseudo-saddle naming follows the symmetric midpoint case: the object is
// saddle-like when the along-boundary attraction and the transverse
// (into-boundary) attraction disagree. A full 2D eigenvalue classification of
// the Filippov convexification is not expanded into more types here.
struct PseudoEquilibrium {
  double x;
  PseudoStability stability;
  double slope;  // d(sliding velocity)/dx at the zero
};

inline BoundaryClass classify_point(const FilippovSystem& sys, double x0,
                                    const Alpha& alpha = kAlphaZero) {
  if (!std::isfinite(x0)) throw NumericalError("classify_point: non-finite x0");
  const LieData up = lie_derivatives(sys, x0, Side::Upper, alpha);
  const LieData lo = lie_derivatives(sys, x0, Side::Lower, alpha);

  BoundaryClass out{};
  out.zph = up.zh;
  out.zmh = lo.zh;

  const bool tan_up = std::abs(up.zh) < kTangencyTol;
  const bool tan_lo = std::abs(lo.zh) < kTangencyTol;
  if (tan_up || tan_lo) {
    if (tan_up && std::abs(up.z2h) < kDegenerateTol)
      throw AmbiguousClassification("degenerate upper tangency at x=" + std::to_string(x0));
    if (tan_lo && std::abs(lo.z2h) < kDegenerateTol)
      throw AmbiguousClassification("degenerate lower tangency at x=" + std::to_string(x0));
    out.kind = BoundaryKind::Tangency;
    out.upper = {tan_up, tan_up, tan_up && up.z2h > 0};
    out.lower = {tan_lo, tan_lo, tan_lo && lo.z2h < 0};
    return out;
  }

  if (up.zh * lo.zh > 0)
    out.kind = BoundaryKind::Crossing;
  else if (up.zh < 0 && lo.zh > 0)
    out.kind = BoundaryKind::SlidingStable;
  else
    out.kind = BoundaryKind::SlidingUnstable;
  return out;
}

/// x-component of the Filippov sliding field Z^s = mu Z- + (1-mu) Z+,
/// mu = Z+h / (Z+h - Z-h).
inline double sliding_velocity(const FilippovSystem& sys, double x0,
                               const Alpha& alpha = kAlphaZero) {
  const Point p{x0, 0.0};
  const Vec2 zp = eval_side(sys, p, Side::Upper, alpha);
  const Vec2 zm = eval_side(sys, p, Side::Lower, alpha);
  const double denom = zp.y - zm.y;
  if (std::abs(denom) < 1e-14)
    throw DivisionDegenerate("sliding_velocity: Z+h - Z-h degenerate at x=" +
                             std::to_string(x0));
  const double mu = zp.y / denom;
  return mu * zm.x + (1.0 - mu) * zp.x;
}

namespace detail {

// Bracketed bisection + Newton polish of g(x,0)=0 to |g| <= 1e-12.
template <class G>
std::optional<double> polish_root(G g, double xa, double xb) {
  double fa = g(xa), fb = g(xb);
  if (fa == 0.0) return xa;
  if (fb == 0.0) return xb;
  if ((fa > 0) == (fb > 0)) return std::nullopt;
  for (int it = 0; it < 200; ++it) {
    const double xm = 0.5 * (xa + xb);
    const double fm = g(xm);
    if (fm == 0.0 || xm == xa || xm == xb) {
      xa = xb = xm;
      break;
    }
    if ((fm > 0) == (fa > 0)) {
      xa = xm;
      fa = fm;
    } else {
      xb = xm;
      fb = fm;
    }
    if (xb - xa < 1e-14 * std::max(1.0, std::abs(xm))) break;
  }
  double x = 0.5 * (xa + xb);
  for (int it = 0; it < 50 && std::abs(g(x)) > 1e-12; ++it) {
    const double h = 1e-7 * std::max(1.0, std::abs(x));
    const double d = (g(x + h) - g(x - h)) / (2 * h);
    if (d == 0.0) break;
    x -= g(x) / d;
  }
  return x;
}

inline void push_unique(std::vector<double>& v, double r, double tol) {
  for (double q : v)
    if (std::abs(q - r) < tol) return;
  v.push_back(r);
}

}  // namespace detail

/// All tangencies (zeros of g on either side) inside `interval`, found by a
/// 400-point scan with bracketing and Newton polish.
inline std::vector<TangencyRecord> find_tangencies(const FilippovSystem& sys,
                                                   double lo, double hi,
                                                   const Alpha& alpha = kAlphaZero) {
  const auto g_of = [&](Side s) {
    return [&sys, &alpha, s](double x) {
      return eval_side(sys, {x, 0.0}, s, alpha).y;
    };
  };
  constexpr int kScan = 400;
  std::vector<double> roots[2];
  for (int si = 0; si < 2; ++si) {
    const Side side = si == 0 ? Side::Upper : Side::Lower;
    auto g = g_of(side);
    double xprev = lo, fprev = g(lo);
    for (int i = 1; i <= kScan; ++i) {
      const double x = lo + (hi - lo) * i / kScan;
      const double f = g(x);
      if (fprev == 0.0 || (fprev > 0) != (f > 0)) {
        if (auto r = detail::polish_root(g, xprev, x))
          detail::push_unique(roots[si], *r, 1e-9);
      }
      xprev = x;
      fprev = f;
    }
    if (fprev == 0.0) detail::push_unique(roots[si], xprev, 1e-9);
  }

  std::vector<TangencyRecord> out;
  auto near = [](double a, double b) { return std::abs(a - b) < 1e-9; };
  auto add = [&](double x, Side side) {
    for (auto& r : out)
      if (near(r.x, x)) {
        (side == Side::Upper ? r.upper_tangent : r.lower_tangent) = true;
        return;
      }
    TangencyRecord r{};
    r.x = x;
    (side == Side::Upper ? r.upper_tangent : r.lower_tangent) = true;
    out.push_back(r);
  };
  for (double x : roots[0]) add(x, Side::Upper);
  for (double x : roots[1]) add(x, Side::Lower);

  for (auto& r : out) {
    if (r.upper_tangent) {
      const LieData d = lie_derivatives(sys, r.x, Side::Upper, alpha);
      r.upper_fold = std::abs(d.z2h) >= kDegenerateTol;
      r.upper_visible = d.z2h > 0;
    }
    if (r.lower_tangent) {
      const LieData d = lie_derivatives(sys, r.x, Side::Lower, alpha);
      r.lower_fold = std::abs(d.z2h) >= kDegenerateTol;
      r.lower_visible = d.z2h < 0;
    }
  }
  std::sort(out.begin(), out.end(),
            [](const TangencyRecord& a, const TangencyRecord& b) { return a.x < b.x; });
  return out;
}

/// Zeros of the sliding velocity strictly inside a maximal sliding segment.
inline std::vector<PseudoEquilibrium> pseudo_equilibria(const FilippovSystem& sys,
                                                        double seg_lo, double seg_hi,
                                                        const Alpha& alpha = kAlphaZero) {
  const double pad = 1e-9 * std::max(1.0, seg_hi - seg_lo);
  const double lo = seg_lo + pad, hi = seg_hi - pad;
  if (!(hi > lo)) return {};

  const bool stable_segment =
      classify_point(sys, 0.5 * (lo + hi), alpha).kind == BoundaryKind::SlidingStable;
  auto v = [&](double x) { return sliding_velocity(sys, x, alpha); };

  std::vector<double> roots;
  constexpr int kScan = 400;
  double xprev = lo, fprev = v(lo);
  for (int i = 1; i <= kScan; ++i) {
    const double x = lo + (hi - lo) * i / kScan;
    const double f = v(x);
    if (fprev == 0.0 || (fprev > 0) != (f > 0)) {
      if (auto r = detail::polish_root(v, xprev, x)) detail::push_unique(roots, *r, 1e-9);
    }
    xprev = x;
    fprev = f;
  }

  std::vector<PseudoEquilibrium> out;
  for (double r : roots) {
    const double h = 1e-6 * std::max(1.0, std::abs(r));
    const double slope = (v(r + h) - v(r - h)) / (2 * h);
    const bool attracts_along = slope < 0;
    const bool saddle = attracts_along != stable_segment;
    out.push_back(
        {r, saddle ? PseudoStability::PseudoSaddle : PseudoStability::PseudoNode, slope});
  }
  return out;
}

}  // namespace filippov
