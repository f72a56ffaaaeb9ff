#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "filippov/boundary.hpp"
#include "filippov/errors.hpp"
#include "filippov/field.hpp"
#include "filippov/ode.hpp"

namespace filippov {

struct IntegratorOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double event_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  int max_events = 1000;
};

enum class ArcKind { Upper, Lower, Sliding };
enum class EventKind {
  None,
  BoundaryHit,
  SlidingEntry,
  FoldExit,
  SectionHit,
  TimeOut,
  Grazing,
  EquilibriumStop,  // pseudo-equilibrium reached inside a sliding segment
};

inline const char* to_string(ArcKind k) {
  switch (k) {
    case ArcKind::Upper: return "upper";
    case ArcKind::Lower: return "lower";
    case ArcKind::Sliding: return "sliding";
  }
  return "?";
}

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::None: return "none";
    case EventKind::BoundaryHit: return "boundary_hit";
    case EventKind::SlidingEntry: return "sliding_entry";
    case EventKind::FoldExit: return "fold_exit";
    case EventKind::SectionHit: return "section_hit";
    case EventKind::TimeOut: return "time_out";
    case EventKind::Grazing: return "grazing";
    case EventKind::EquilibriumStop: return "equilibrium_stop";
  }
  return "?";
}

struct Arc {
  ArcKind kind;
  std::vector<std::pair<double, Point>> samples;
  EventKind entry_event = EventKind::None;
  EventKind exit_event = EventKind::None;

  double t_start() const { return samples.front().first; }
  double t_end() const { return samples.back().first; }
  Point p_start() const { return samples.front().second; }
  Point p_end() const { return samples.back().second; }
};

struct HybridTrajectory {
  std::vector<Arc> arcs;
  double total_time = 0.0;

  Point end_point() const { return arcs.back().p_end(); }
  double end_time() const { return arcs.back().t_end(); }
};

namespace detail {

template <class F>
struct Rhs2 {
  F f;
  void operator()(double t, const State<2>& y, State<2>& dydt) const {
    const Vec2 v = f(t, Vec2{y[0], y[1]});
    dydt[0] = v.x;
    dydt[1] = v.y;
  }
};

}  // namespace detail

/// Event-driven integration of the Filippov flow from `start`.
///
/// Standard arcs run the one-sided smooth flow with a zero-crossing event on
/// h = y (armed only after |y| has exceeded 2*event_tol, so restarting from a
/// located event does not re-fire it). A boundary hit is classified: crossing
/// switches zones, a sliding hit enters a sliding arc, and a tangential hit
/// with the quadratic term pushing back into the zone is recorded as a
/// Grazing event and the arc continues.
///
/// Sliding arcs integrate x' = Zs_x on y = 0 with exit events g+ = 0 / g- = 0
/// (fold endpoints). Exit resumes a standard arc on the side whose fold is
/// visible there. A sliding arc whose velocity stays below 1e-12 for a full
/// step stops at the pseudo-equilibrium (EquilibriumStop).
inline HybridTrajectory flow(const FilippovSystem& sys, Point start, Side side_hint,
                             double t_max, const Alpha& alpha = kAlphaZero,
                             const IntegratorOptions& opts = {}) {
  HybridTrajectory traj;
  traj.total_time = t_max;

  double t = 0.0;
  Point p = start;
  Side side = side_hint;
  bool sliding = false;
  EventKind entry = EventKind::None;

  if (std::abs(p.y) <= 2 * opts.event_tol) {
    const auto bc = classify_point(sys, p.x, alpha);
    if (bc.kind == BoundaryKind::SlidingStable || bc.kind == BoundaryKind::SlidingUnstable)
      sliding = true;
    else if (bc.kind == BoundaryKind::Crossing)
      side = bc.zph > 0 ? Side::Upper : Side::Lower;
    // tangency: keep the hint
  } else {
    side = p.y > 0 ? Side::Upper : Side::Lower;
  }

  int events = 0;
  while (t < t_max - 1e-14 * std::max(1.0, t_max)) {
    if (++events > opts.max_events)
      throw MaxEventsExceeded("flow: more than " + std::to_string(opts.max_events) +
                              " events");
    if (!sliding) {
      // ---- standard arc in one zone ----
      Arc arc;
      arc.kind = side == Side::Upper ? ArcKind::Upper : ArcKind::Lower;
      arc.entry_event = entry;
      arc.samples.emplace_back(t, p);

      auto rhs = detail::Rhs2{[&sys, side, &alpha](double, Vec2 q) {
        return eval_side(sys, q, side, alpha);
      }};
      OdeOptions oopt{opts.rel_tol, opts.abs_tol, opts.max_step};
      Dopri5<2, decltype(rhs)> stepper(rhs, t, State<2>{p.x, p.y}, oopt);

      bool armed = std::abs(p.y) > 2 * opts.event_tol;
      const double into = side == Side::Upper ? 1.0 : -1.0;  // sign of y inside zone
      bool arc_done = false;

      bool have_prev = false;
      DenseStep<2> prev{};
      bool prev_dec = false;

      while (!arc_done && stepper.advance(t_max)) {
        const auto& st = stepper.current();
        // arm once the trajectory is clearly off the boundary
        double t_lo = st.t0;
        if (!armed) {
          const int n = 8;
          for (int i = 1; i <= n; ++i) {
            const double tt = st.t0 + (st.t1 - st.t0) * i / n;
            if (std::abs(st.eval_component(tt, 1)) > 2 * opts.event_tol) {
              armed = true;
              t_lo = tt;
              break;
            }
          }
          if (!armed) {
            arc.samples.emplace_back(st.t1, Point{st.y1[0], st.y1[1]});
            continue;
          }
        }
        // scan for a sign change of y (sub-sampled: a graze can dip and
        // return within one step)
        const double y_lo_sign = into;  // armed side of the boundary
        const double graze_band = std::max(1e-9, 10 * opts.event_tol);
        double t_hit = -1.0;
        double t_graze = -1.0;
        const int n = 16;
        std::array<double, n + 1> ts, fs;
        for (int i = 0; i <= n; ++i) {
          ts[static_cast<std::size_t>(i)] = t_lo + (st.t1 - t_lo) * i / n;
          fs[static_cast<std::size_t>(i)] =
              st.eval_component(ts[static_cast<std::size_t>(i)], 1) * into;
        }
        auto refine_min = [&](const DenseStep<2>& s, double a, double b) {
          for (int it = 0; it < 100; ++it) {
            const double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
            if (s.eval_component(m1, 1) * into < s.eval_component(m2, 1) * into)
              b = m2;
            else
              a = m1;
          }
          return 0.5 * (a + b);
        };
        const DenseStep<2>* gstep = &st;
        // a minimum of y*into sitting at the step boundary is invisible to
        // the per-step triple scan: refine both adjacent subintervals
        if (have_prev && prev_dec && t_lo == st.t0 && fs[0] > 0 && fs[1] >= fs[0]) {
          const double pa = prev.t0 + (prev.t1 - prev.t0) * (n - 1) / n;
          const double ta2 = refine_min(prev, pa, prev.t1);
          const double tb2 = refine_min(st, ts[0], ts[1]);
          const double fa2 = prev.eval_component(ta2, 1) * into;
          const double fb2 = st.eval_component(tb2, 1) * into;
          const bool use_prev = fa2 < fb2;
          const DenseStep<2>& sb = use_prev ? prev : st;
          const double tm = use_prev ? ta2 : tb2;
          const double fm = std::min(fa2, fb2);
          if (fm <= -graze_band) {
            t_hit = locate_zero(
                sb, [&](const DenseStep<2>& s, double tt) { return s.eval_component(tt, 1) * y_lo_sign; },
                use_prev ? pa : ts[0], tm);
            gstep = &sb;
          } else if (fm <= graze_band) {
            t_graze = tm;
            gstep = &sb;
          }
        }
        for (int i = 1; i <= n && t_hit < 0 && t_graze < 0; ++i) {
          const double fa = fs[static_cast<std::size_t>(i - 1)];
          const double fb = fs[static_cast<std::size_t>(i)];
          if (fa > 0 && fb <= 0) {
            t_hit = locate_zero(
                st, [&](const DenseStep<2>& s, double tt) { return s.eval_component(tt, 1) * y_lo_sign; },
                ts[static_cast<std::size_t>(i - 1)], ts[static_cast<std::size_t>(i)]);
            break;
          }
          // approach-and-turn: a local minimum of y*into inside the step may
          // hide a tangent touch (or a dip too narrow for the grid above)
          if (i >= 2 && fs[static_cast<std::size_t>(i - 1)] <= fs[static_cast<std::size_t>(i - 2)] &&
              fs[static_cast<std::size_t>(i - 1)] <= fb) {
            double a = ts[static_cast<std::size_t>(i - 2)], b = ts[static_cast<std::size_t>(i)];
            for (int it = 0; it < 100; ++it) {
              const double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
              if (st.eval_component(m1, 1) * into < st.eval_component(m2, 1) * into)
                b = m2;
              else
                a = m1;
            }
            const double tm = 0.5 * (a + b);
            const double fm = st.eval_component(tm, 1) * into;
            if (fm <= -graze_band) {
              t_hit = locate_zero(
                  st, [&](const DenseStep<2>& s, double tt) { return s.eval_component(tt, 1) * y_lo_sign; },
                  ts[static_cast<std::size_t>(i - 2)], tm);
              break;
            }
            if (fm <= graze_band && tm > st.t0 && tm < st.t1) t_graze = tm;
          }
        }
        if (t_hit < 0 && t_graze >= 0) {
          const double xg = gstep->eval_component(t_graze, 0);
          const LieData dg = lie_derivatives(sys, xg, side, alpha);
          const bool vis = side == Side::Upper ? dg.z2h > 0 : dg.z2h < 0;
          if (std::abs(dg.zh) <= std::max(graze_band, 1e-6) && vis) {
            arc.samples.emplace_back(t_graze, Point{xg, 0.0});
            t = t_graze;
            p = Point{xg, 0.0};
            arc.exit_event = EventKind::Grazing;
            entry = EventKind::Grazing;
            arc_done = true;
            break;
          }
        }
        if (t_hit < 0) {
          have_prev = true;
          prev = st;
          prev_dec = fs[n] <= fs[n - 1];
          arc.samples.emplace_back(st.t1, Point{st.y1[0], st.y1[1]});
          continue;
        }

        const Point hit{gstep->eval_component(t_hit, 0), 0.0};
        // a hit within the graze band of a visible fold of our own side is a
        // tangent touch: continue in the zone (the exact tangency is never
        // resolved to better than event accuracy)
        const LieData own = lie_derivatives(sys, hit.x, side, alpha);
        const bool own_visible = side == Side::Upper ? own.z2h > 0 : own.z2h < 0;
        if (std::abs(own.zh) <= graze_band && own_visible) {
          arc.samples.emplace_back(t_hit, hit);
          t = t_hit;
          p = hit;
          arc.exit_event = EventKind::Grazing;
          entry = EventKind::Grazing;
          arc_done = true;
          // restart a fresh arc on the same side (re-seeds the stepper
          // exactly at the event point, keeping the guard-band logic)
          break;
        }
        const auto bc = classify_point(sys, hit.x, alpha);
        if (bc.kind == BoundaryKind::Tangency) {
          // tangency of the other side while we cross transversally: switch
          arc.samples.emplace_back(t_hit, hit);
          t = t_hit;
          p = hit;
          arc.exit_event = EventKind::BoundaryHit;
          entry = EventKind::BoundaryHit;
          side = opposite(side);
          arc_done = true;
          break;
        }
        arc.samples.emplace_back(t_hit, hit);
        t = t_hit;
        p = hit;
        arc_done = true;
        if (bc.kind == BoundaryKind::Crossing) {
          arc.exit_event = EventKind::BoundaryHit;
          entry = EventKind::BoundaryHit;
          side = opposite(side);
        } else if (bc.kind == BoundaryKind::SlidingStable) {
          arc.exit_event = EventKind::SlidingEntry;
          entry = EventKind::SlidingEntry;
          sliding = true;
        } else {
          // unstable sliding set reached exactly: forward Filippov solutions
          // leave immediately; continue on the side we came from is not
          // consistent, so follow the sliding solution (it exists) as well
          arc.exit_event = EventKind::SlidingEntry;
          entry = EventKind::SlidingEntry;
          sliding = true;
        }
      }
      if (!arc_done) {
        // ran to t_max
        t = stepper.t();
        p = Point{stepper.y()[0], stepper.y()[1]};
        if (arc.samples.back().first < t) arc.samples.emplace_back(t, p);
        arc.exit_event = EventKind::TimeOut;
        traj.arcs.push_back(std::move(arc));
        return traj;
      }
      traj.arcs.push_back(std::move(arc));
      continue;
    }

    // ---- sliding arc on y = 0 ----
    Arc arc;
    arc.kind = ArcKind::Sliding;
    arc.entry_event = entry;
    arc.samples.emplace_back(t, p);

    auto rhs1 = [&sys, &alpha](double, const State<1>& y, State<1>& d) {
      d[0] = sliding_velocity(sys, y[0], alpha);
    };
    struct Rhs1W {
      decltype(rhs1)* f;
      void operator()(double t, const State<1>& y, State<1>& d) const { (*f)(t, y, d); }
    };
    OdeOptions oopt{opts.rel_tol, opts.abs_tol, opts.max_step};
    Dopri5<1, Rhs1W> stepper(Rhs1W{&rhs1}, t, State<1>{p.x}, oopt);

    const std::function<double(double)> gplus = [&](double x) {
      return eval_side(sys, {x, 0}, Side::Upper, alpha).y;
    };
    const std::function<double(double)> gminus = [&](double x) {
      return eval_side(sys, {x, 0}, Side::Lower, alpha).y;
    };

    bool arc_done = false;
    while (!arc_done && stepper.advance(t_max)) {
      const auto& st = stepper.current();
      // pseudo-equilibrium stop: velocity below threshold for the full step
      {
        bool tiny = true;
        for (int i = 0; i <= 4 && tiny; ++i) {
          const double tt = st.t0 + (st.t1 - st.t0) * i / 4;
          tiny = std::abs(sliding_velocity(sys, st.eval_component(tt, 0), alpha)) < 1e-12;
        }
        if (tiny) {
          t = st.t1;
          p = Point{st.y1[0], 0.0};
          arc.samples.emplace_back(t, p);
          arc.exit_event = EventKind::EquilibriumStop;
          traj.arcs.push_back(std::move(arc));
          return traj;
        }
      }
      // fold-exit events: zero of g+ or g- along the slide
      double t_hit = -1.0;
      Side exit_side = Side::Upper;
      for (int which = 0; which < 2; ++which) {
        const auto& g = which == 0 ? gplus : gminus;
        const double f0 = g(st.eval_component(st.t0, 0));
        const double f1 = g(st.eval_component(st.t1, 0));
        if (f0 == 0.0) continue;  // just exited there
        if ((f0 > 0) != (f1 > 0) || f1 == 0.0) {
          const double th = locate_zero(
              st,
              [&](const DenseStep<1>& s, double tt) { return g(s.eval_component(tt, 0)); },
              st.t0, st.t1);
          if (t_hit < 0 || th < t_hit) {
            t_hit = th;
            exit_side = which == 0 ? Side::Upper : Side::Lower;
          }
        }
      }
      if (t_hit >= 0) {
        const double xh = st.eval_component(t_hit, 0);
        t = t_hit;
        p = Point{xh, 0.0};
        arc.samples.emplace_back(t, p);
        arc.exit_event = EventKind::FoldExit;
        // eject into the zone whose fold is visible at the exit point
        const LieData d = lie_derivatives(sys, xh, exit_side, alpha);
        const bool visible = exit_side == Side::Upper ? d.z2h > 0 : d.z2h < 0;
        side = visible ? exit_side : opposite(exit_side);
        entry = EventKind::FoldExit;
        sliding = false;
        arc_done = true;
        break;
      }
      arc.samples.emplace_back(st.t1, Point{st.y1[0], 0.0});
    }
    if (!arc_done) {
      t = stepper.t();
      p = Point{stepper.y()[0], 0.0};
      if (arc.samples.back().first < t) arc.samples.emplace_back(t, p);
      arc.exit_event = EventKind::TimeOut;
      traj.arcs.push_back(std::move(arc));
      return traj;
    }
    traj.arcs.push_back(std::move(arc));
  }
  return traj;
}

struct Section {
  bool vertical = true;  // vertical: x = c; horizontal: y = c
  double c = 0.0;
  // optional bracket on the free coordinate (y for vertical, x for horizontal)
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

struct SectionHitResult {
  double t = 0.0;
  Point p{};
};

/// First transversal intersection of the one-sided smooth flow with the
/// section, in the given time direction. Throws NoHit if the flow does not
/// reach it within the time budget.
inline SectionHitResult hit_section(const FilippovSystem& sys, Point start, Side side,
                                    const Section& sec, bool forward,
                                    const Alpha& alpha = kAlphaZero,
                                    const IntegratorOptions& opts = {},
                                    double t_budget = 100.0) {
  auto rhs = detail::Rhs2{[&sys, side, &alpha, forward](double, Vec2 q) {
    const Vec2 v = eval_side(sys, q, side, alpha);
    return forward ? v : -v;
  }};
  OdeOptions oopt{opts.rel_tol, opts.abs_tol, opts.max_step};
  Dopri5<2, decltype(rhs)> stepper(rhs, 0.0, State<2>{start.x, start.y}, oopt);

  const int comp = sec.vertical ? 0 : 1;
  const int free_comp = 1 - comp;
  auto in_bracket = [&](double v) { return v >= sec.lo && v <= sec.hi; };

  const double f_start =
      (sec.vertical ? start.x : start.y) - sec.c;
  bool armed = std::abs(f_start) > 2 * opts.event_tol ||
               !in_bracket(sec.vertical ? start.y : start.x);

  const double touch_tol = std::max(10 * opts.event_tol, 1e-9);
  constexpr int n = 16;
  auto refine_min = [&](const DenseStep<2>& s, double a, double b) {
    for (int it = 0; it < 100; ++it) {
      const double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
      if (std::abs(s.eval_component(m1, comp) - sec.c) <
          std::abs(s.eval_component(m2, comp) - sec.c))
        b = m2;
      else
        a = m1;
    }
    return 0.5 * (a + b);
  };
  bool have_prev = false;
  DenseStep<2> prev{};
  double prev_tail_f = 0.0;  // |f| at the second-to-last sample of prev step
  bool prev_decreasing = false;
  while (stepper.advance(t_budget)) {
    const auto& st = stepper.current();
    std::array<double, n + 1> ts, fs;
    for (int i = 0; i <= n; ++i) {
      ts[static_cast<std::size_t>(i)] = st.t0 + (st.t1 - st.t0) * i / n;
      fs[static_cast<std::size_t>(i)] =
          st.eval_component(ts[static_cast<std::size_t>(i)], comp) - sec.c;
    }
    // |f| minimum sitting right at a step boundary: refine the last
    // subinterval of the previous step and the first of this one
    if (armed && have_prev && prev_decreasing && std::abs(fs[1]) >= std::abs(fs[0]) &&
        (fs[0] > 0) == (fs[1] > 0)) {
      const double ta = refine_min(prev, prev.t0 + (prev.t1 - prev.t0) * (n - 1) / n, prev.t1);
      const double tb = refine_min(st, ts[0], ts[1]);
      const double va = std::abs(prev.eval_component(ta, comp) - sec.c);
      const double vb = std::abs(st.eval_component(tb, comp) - sec.c);
      const DenseStep<2>& sbest = va < vb ? prev : st;
      const double th = va < vb ? ta : tb;
      if (std::min(va, vb) <= touch_tol) {
        const double other = sbest.eval_component(th, free_comp);
        if (in_bracket(other)) {
          Point ph;
          ph.x = sec.vertical ? sec.c : other;
          ph.y = sec.vertical ? other : sec.c;
          return {forward ? th : -th, ph};
        }
      }
    }
    have_prev = true;
    prev = st;
    prev_tail_f = std::abs(fs[n - 1]);
    prev_decreasing = std::abs(fs[n]) <= prev_tail_f;
    for (int i = 1; i <= n; ++i) {
      const double fa = fs[static_cast<std::size_t>(i - 1)];
      const double fb = fs[static_cast<std::size_t>(i)];
      if (!armed) {
        if (std::abs(fb) > 2 * opts.event_tol) armed = true;
        continue;
      }
      if (fa == 0.0 || (fa > 0) != (fb > 0)) {
        const double th = locate_zero(
            st,
            [&](const DenseStep<2>& s, double tt) { return s.eval_component(tt, comp) - sec.c; },
            ts[static_cast<std::size_t>(i - 1)], ts[static_cast<std::size_t>(i)]);
        const double other = st.eval_component(th, free_comp);
        if (in_bracket(other)) {
          Point ph;
          ph.x = sec.vertical ? sec.c : other;
          ph.y = sec.vertical ? other : sec.c;
          return {forward ? th : -th, ph};
        }
        continue;
      }
      // tangential touch: |section fn| attains a near-zero interior minimum
      // without a sign change; bracket it by the sampled local minimum
      if (i >= 2) {
        const double f0 = std::abs(fs[static_cast<std::size_t>(i - 2)]);
        const double f1 = std::abs(fs[static_cast<std::size_t>(i - 1)]);
        const double f2 = std::abs(fb);
        if (f1 <= f0 && f1 <= f2) {
          const double th =
              refine_min(st, ts[static_cast<std::size_t>(i - 2)], ts[static_cast<std::size_t>(i)]);
          if (std::abs(st.eval_component(th, comp) - sec.c) <= touch_tol) {
            const double other = st.eval_component(th, free_comp);
            if (in_bracket(other)) {
              Point ph;
              ph.x = sec.vertical ? sec.c : other;
              ph.y = sec.vertical ? other : sec.c;
              return {forward ? th : -th, ph};
            }
          }
        }
      }
    }
  }
  throw NoHit("hit_section: section not reached within t=" + std::to_string(t_budget));
}

struct PoincareResult {
  double y1 = 0.0;
  double dy1_dy0 = 0.0;
};

/// First-return map on a vertical section for the one-sided smooth flow.
/// The derivative is a central finite difference; `t_budget` bounds one
/// return time. `branch_lo`/`branch_hi` select the section branch counted as
/// a return (a closed orbit crosses a full vertical line twice).
inline PoincareResult poincare_map(const FilippovSystem& sys, double section_x, double y0,
                                   Side side, const Alpha& alpha = kAlphaZero,
                                   const IntegratorOptions& opts = {},
                                   double t_budget = 100.0,
                                   double branch_lo = -std::numeric_limits<double>::infinity(),
                                   double branch_hi = std::numeric_limits<double>::infinity()) {
  Section sec;
  sec.vertical = true;
  sec.c = section_x;
  sec.lo = branch_lo;
  sec.hi = branch_hi;
  auto ret = [&](double y) {
    SectionHitResult r;
    try {
      r = hit_section(sys, {section_x, y}, side, sec, true, alpha, opts, t_budget);
    } catch (const NoHit&) {
      throw NoReturn("poincare_map: no return to the section");
    }
    return r.p.y;
  };
  const double h = 1e-6 * std::max(1.0, std::abs(y0));
  PoincareResult out;
  out.y1 = ret(y0);
  out.dy1_dy0 = (ret(y0 + h) - ret(y0 - h)) / (2 * h);
  return out;
}

/// Poincare-map derivative through the divergence integral: for a planar flow
/// and a vertical section, dP/dy = exp(int div) * f(start)/f(end). Immune to
/// the finite-difference noise floor, so it serves as a cross-check (and is
/// the accurate choice for very strong contraction).
inline double poincare_derivative_div(const FilippovSystem& sys, double section_x,
                                      double y0, Side side,
                                      const Alpha& alpha = kAlphaZero,
                                      const IntegratorOptions& opts = {},
                                      double t_budget = 100.0,
                                      double branch_lo = -std::numeric_limits<double>::infinity(),
                                      double branch_hi = std::numeric_limits<double>::infinity()) {
  const SmoothField& fld = sys.side(side);
  struct Rhs {
    const SmoothField* fld;
    const Alpha* alpha;
    void operator()(double, const State<3>& y, State<3>& d) const {
      const Vec2 p{y[0], y[1]};
      const Vec2 v = (*fld)(p, *alpha);
      d[0] = v.x;
      d[1] = v.y;
      d[2] = fld->partial_x(p, *alpha).x + fld->partial_y(p, *alpha).y;
    }
  };
  OdeOptions oopt{opts.rel_tol, opts.abs_tol, opts.max_step};
  Dopri5<3, Rhs> stepper(Rhs{&fld, &alpha}, 0.0, State<3>{section_x, y0, 0.0}, oopt);

  bool armed = false;
  while (stepper.advance(t_budget)) {
    const auto& st = stepper.current();
    const int n = 16;
    double ta = st.t0, fa = st.eval_component(ta, 0) - section_x;
    for (int i = 1; i <= n; ++i) {
      const double tb = st.t0 + (st.t1 - st.t0) * i / n;
      const double fb = st.eval_component(tb, 0) - section_x;
      if (!armed) {
        if (std::abs(fb) > 2 * opts.event_tol) armed = true;
      } else if (fa == 0.0 || (fa > 0) != (fb > 0)) {
        const double th = locate_zero(
            st, [&](const DenseStep<3>& s, double tt) { return s.eval_component(tt, 0) - section_x; },
            ta, tb);
        const double yh = st.eval_component(th, 1);
        if (yh >= branch_lo && yh <= branch_hi) {
          const double u = st.eval_component(th, 2);
          const Vec2 v0 = fld({section_x, y0}, alpha);
          const Vec2 v1 = fld({section_x, yh}, alpha);
          if (std::abs(v1.x) < 1e-14)
            throw NumericalError("poincare_derivative_div: section not transversal");
          return std::exp(u) * v0.x / v1.x;
        }
      }
      ta = tb;
      fa = fb;
    }
  }
  throw NoReturn("poincare_derivative_div: no return to the section");
}

}  // namespace filippov
