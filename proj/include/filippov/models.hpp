#pragma once

#include <cmath>
#include <atomic>
#include <sstream>
#include <thread>
#include <string>
#include <vector>

#include "filippov/field.hpp"
#include "filippov/solver.hpp"

namespace filippov {

/// Analytic test system: the upper zone carries the normal-form limit cycle
/// of radius 1 centered at (0,1),
///   x' = -(y-1) + x (1 - x^2 - (y-1)^2)
///   y' =  x + (y-1)(1 - x^2 - (y-1)^2)
/// which grazes the boundary at the origin. In polar coordinates about the
/// center the angular speed is 1 and r' = r(1-r^2), so the period is 2*pi and
/// the divergence along the cycle is 2-4r^2 = -2, giving the Floquet quantity
/// lambda(0) = exp(-4*pi). Parameters enter additively: alpha1 shifts g,
/// alpha2 shifts g proportionally to x (a deliberately generic unfolding).
inline FilippovSystem circle_system() {
  SmoothField up;
  up.eval = [](Vec2 p, const Alpha& a) -> Vec2 {
    const double Y = p.y - 1.0;
    const double s = 1.0 - p.x * p.x - Y * Y;
    return {-Y + p.x * s, p.x + Y * s + a[0] + a[1] * p.x};
  };
  up.dx = [](Vec2 p, const Alpha& a) -> Vec2 {
    const double Y = p.y - 1.0;
    const double s = 1.0 - p.x * p.x - Y * Y;
    return {s - 2.0 * p.x * p.x, 1.0 - 2.0 * p.x * Y + a[1]};
  };
  up.dy = [](Vec2 p, const Alpha&) -> Vec2 {
    const double Y = p.y - 1.0;
    const double s = 1.0 - p.x * p.x - Y * Y;
    return {-1.0 - 2.0 * p.x * Y, s - 2.0 * Y * Y};
  };
  up.da1 = [](Vec2, const Alpha&) -> Vec2 { return {0.0, 1.0}; };
  up.da2 = [](Vec2 p, const Alpha&) -> Vec2 { return {0.0, p.x}; };
  return symmetrize(up);
}

/// Z+ = (1, 2x): a visible fold-fold at the origin, exact orbits y = x^2 + c,
/// no closed orbit. Parameter-independent.
inline FilippovSystem parabola_system() {
  SmoothField up;
  up.eval = [](Vec2 p, const Alpha&) -> Vec2 { return {1.0, 2.0 * p.x}; };
  up.dx = [](Vec2, const Alpha&) -> Vec2 { return {0.0, 2.0}; };
  up.dy = [](Vec2, const Alpha&) -> Vec2 { return {0.0, 0.0}; };
  up.da1 = [](Vec2, const Alpha&) -> Vec2 { return {0.0, 0.0}; };
  up.da2 = [](Vec2, const Alpha&) -> Vec2 { return {0.0, 0.0}; };
  return symmetrize(up);
}

/// Thompson-Hunt oscillator in y-boundary form:
///   upper: ( 1-y,  x - (a y + b y^3) + alpha1 + alpha2 (y - y^2) )
/// with the Z2-reflected lower field. g_{alpha1}(0,0;0)=1, g_{alpha2}(0,0;0)=0.
inline FilippovSystem thompson_hunt(double a, double b) {
  SmoothField up;
  up.eval = [a, b](Vec2 p, const Alpha& al) -> Vec2 {
    return {1.0 - p.y,
            p.x - (a * p.y + b * p.y * p.y * p.y) + al[0] + al[1] * (p.y - p.y * p.y)};
  };
  up.dx = [](Vec2, const Alpha&) -> Vec2 { return {0.0, 1.0}; };
  up.dy = [a, b](Vec2 p, const Alpha& al) -> Vec2 {
    return {-1.0, -(a + 3.0 * b * p.y * p.y) + al[1] * (1.0 - 2.0 * p.y)};
  };
  up.da1 = [](Vec2, const Alpha&) -> Vec2 { return {0.0, 1.0}; };
  up.da2 = [](Vec2 p, const Alpha&) -> Vec2 { return {0.0, p.y - p.y * p.y}; };
  return symmetrize(up);
}

/// The grazing locus b = theta(a) of the oscillator family: the root of
/// b -> cycle_offset(thompson_hunt(a, b)) found by a coarse scan over
/// [0.1, 5.0] followed by secant refinement to |offset| <= 1e-9. At the root
/// the upper subsystem has a limit cycle grazing Sigma at O.
inline double find_theta(double a, const IntegratorOptions& opts = {},
                         double b_lo = 0.1, double b_hi = 5.0, int scan_points = 50) {
  auto offset = [&](double b) { return cycle_offset(thompson_hunt(a, b), kAlphaZero, opts); };

  // scan phase: the offset evaluations are independent, run them in parallel
  std::vector<double> bs(static_cast<std::size_t>(scan_points));
  std::vector<double> vals(static_cast<std::size_t>(scan_points));
  std::vector<char> ok(static_cast<std::size_t>(scan_points), 0);
  for (int i = 0; i < scan_points; ++i)
    bs[static_cast<std::size_t>(i)] = b_lo + (b_hi - b_lo) * i / (scan_points - 1);
  {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int i = next.fetch_add(1); i < scan_points; i = next.fetch_add(1)) {
        try {
          vals[static_cast<std::size_t>(i)] = offset(bs[static_cast<std::size_t>(i)]);
          ok[static_cast<std::size_t>(i)] = 1;
        } catch (const NoCycle&) {
          // no limit cycle at this b (e.g. past the Hopf point)
        }
      }
    };
    const unsigned n =
        std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                           static_cast<unsigned>(scan_points));
    std::vector<std::thread> pool;
    for (unsigned k = 0; k + 1 < n; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }

  double lo = 0.0, hi = 0.0, flo = 0.0, fhi = 0.0;
  bool bracketed = false;
  for (int i = 1; i < scan_points && !bracketed; ++i) {
    if (!ok[static_cast<std::size_t>(i - 1)] || !ok[static_cast<std::size_t>(i)]) continue;
    const double vp = vals[static_cast<std::size_t>(i - 1)];
    const double v = vals[static_cast<std::size_t>(i)];
    if ((vp > 0) != (v > 0)) {
      lo = bs[static_cast<std::size_t>(i - 1)];
      hi = bs[static_cast<std::size_t>(i)];
      flo = vp;
      fhi = v;
      bracketed = true;
    }
  }
  // the sign change can hide in a sliver next to a b where the offset stops
  // being defined (cycle detached from the section line, or gone at a Hopf
  // point): bisect each valid/invalid scan boundary looking for it
  for (int i = 1; i < scan_points && !bracketed; ++i) {
    const bool okp = ok[static_cast<std::size_t>(i - 1)], okc = ok[static_cast<std::size_t>(i)];
    if (okp == okc) continue;
    double b_valid = okp ? bs[static_cast<std::size_t>(i - 1)] : bs[static_cast<std::size_t>(i)];
    double v_valid = okp ? vals[static_cast<std::size_t>(i - 1)] : vals[static_cast<std::size_t>(i)];
    double b_invalid = okp ? bs[static_cast<std::size_t>(i)] : bs[static_cast<std::size_t>(i - 1)];
    for (int it = 0; it < 60 && std::abs(b_invalid - b_valid) > 1e-13; ++it) {
      const double m = 0.5 * (b_valid + b_invalid);
      double v;
      try {
        v = offset(m);
      } catch (const NoCycle&) {
        b_invalid = m;
        continue;
      }
      if ((v > 0) != (v_valid > 0)) {
        lo = std::min(b_valid, m);
        hi = std::max(b_valid, m);
        flo = lo == m ? v : v_valid;
        fhi = hi == m ? v : v_valid;
        bracketed = true;
        break;
      }
      b_valid = m;
      v_valid = v;
    }
  }

  if (!bracketed) {
    std::ostringstream scan_table;
    for (int i = 0; i < scan_points; ++i) {
      scan_table << bs[static_cast<std::size_t>(i)] << " ";
      if (ok[static_cast<std::size_t>(i)])
        scan_table << vals[static_cast<std::size_t>(i)] << "\n";
      else
        scan_table << "-\n";
    }
    throw NoBracket("find_theta: cycle offset does not change sign over the scan:\n" +
                    scan_table.str());
  }

  // secant with bisection fallback inside the bracket
  for (int it = 0; it < 80; ++it) {
    double m = hi - fhi * (hi - lo) / (fhi - flo);
    if (!(m > lo && m < hi)) m = 0.5 * (lo + hi);
    const double fm = offset(m);
    if (std::abs(fm) <= 1e-9) return m;
    if ((fm > 0) == (flo > 0)) {
      lo = m;
      flo = fm;
    } else {
      hi = m;
      fhi = fm;
    }
  }
  throw NoConvergence("find_theta: refinement did not reach |offset| <= 1e-9");
}

}  // namespace filippov
