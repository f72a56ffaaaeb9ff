#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "filippov/errors.hpp"

namespace filippov {

template <int N>
using State = std::array<double, N>;

struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 5'000'000;
};

/// One accepted Dormand-Prince step with its quartic interpolant.
template <int N>
struct DenseStep {
  double t0 = 0.0, t1 = 0.0;
  State<N> y0{}, y1{};
  State<N> r1{}, r2{}, r3{}, r4{}, r5{};

  double h() const { return t1 - t0; }

  State<N> eval(double t) const {
    const double th = (t - t0) / (t1 - t0);
    const double th1 = 1.0 - th;
    State<N> out;
    for (int i = 0; i < N; ++i)
      out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
    return out;
  }
  double eval_component(double t, int i) const {
    const double th = (t - t0) / (t1 - t0);
    const double th1 = 1.0 - th;
    return r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
  }
};

/// Embedded Dormand-Prince 5(4) stepper with dense output.
///
/// `advance(t_bound)` takes one accepted step toward t_bound (forward or
/// backward depending on the sign of t_bound - t) and exposes the dense
/// interpolant of that step. The final step is clamped to land on t_bound.
template <int N, class RHS>
class Dopri5 {
 public:
  Dopri5(RHS rhs, double t0, const State<N>& y0, OdeOptions opt = {})
      : rhs_(std::move(rhs)), opt_(opt), t_(t0), y_(y0) {
    rhs_(t_, y_, k_[0]);
    h_ = 0.0;  // chosen on first advance
  }

  double t() const { return t_; }
  const State<N>& y() const { return y_; }
  const DenseStep<N>& current() const { return step_; }

  /// Advance one accepted step, not past t_bound. Returns false when already
  /// at t_bound.
  bool advance(double t_bound) {
    const double dir = (t_bound > t_) ? 1.0 : -1.0;
    double remaining = std::abs(t_bound - t_);
    if (remaining <= 0.0) return false;
    if (h_ == 0.0 || (h_ > 0) != (dir > 0)) h_ = dir * initial_step(remaining);

    for (int attempt = 0; attempt < 400; ++attempt) {
      if (++steps_taken_ > opt_.max_steps)
        throw NumericalError("ode: step budget exceeded");
      double h = h_;
      if (std::abs(h) > opt_.max_step) h = dir * opt_.max_step;
      if (std::abs(h) > remaining) h = t_bound - t_;
      if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t_)) && std::abs(h) < remaining)
        throw StepSizeUnderflow("ode: step size underflow");

      const double err = try_step(h);
      if (err <= 1.0) {
        make_dense(h);
        t_ += h;
        y_ = ynew_;
        k_[0] = k_[6];  // FSAL
        const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
        h_ = h * fac;
        return true;
      }
      h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
    }
    throw NumericalError("ode: repeated step rejection");
  }

 private:
  double initial_step(double remaining) const {
    // Hairer-style h0 = 0.01 * |y|/|y'| in tolerance-scaled norms; the error
    // controller corrects any misestimate within a few steps.
    double d0 = 0.0, d1 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double s = opt_.abs_tol + opt_.rel_tol * std::abs(y_[i]);
      d0 += (y_[i] / s) * (y_[i] / s);
      d1 += (k_[0][i] / s) * (k_[0][i] / s);
    }
    d0 = std::sqrt(d0 / N);
    d1 = std::sqrt(d1 / N);
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::max(h, 1e-10);
    return std::min({h, remaining, opt_.max_step});
  }

  // Returns the scaled error norm of the attempted step; fills ynew_, k_[1..6].
  double try_step(double h) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    State<N> tmp;
    for (int i = 0; i < N; ++i) tmp[i] = y_[i] + h * a21 * k_[0][i];
    rhs_(t_ + c2 * h, tmp, k_[1]);
    for (int i = 0; i < N; ++i) tmp[i] = y_[i] + h * (a31 * k_[0][i] + a32 * k_[1][i]);
    rhs_(t_ + c3 * h, tmp, k_[2]);
    for (int i = 0; i < N; ++i)
      tmp[i] = y_[i] + h * (a41 * k_[0][i] + a42 * k_[1][i] + a43 * k_[2][i]);
    rhs_(t_ + c4 * h, tmp, k_[3]);
    for (int i = 0; i < N; ++i)
      tmp[i] = y_[i] + h * (a51 * k_[0][i] + a52 * k_[1][i] + a53 * k_[2][i] + a54 * k_[3][i]);
    rhs_(t_ + c5 * h, tmp, k_[4]);
    for (int i = 0; i < N; ++i)
      tmp[i] = y_[i] + h * (a61 * k_[0][i] + a62 * k_[1][i] + a63 * k_[2][i] +
                            a64 * k_[3][i] + a65 * k_[4][i]);
    rhs_(t_ + h, tmp, k_[5]);
    for (int i = 0; i < N; ++i)
      ynew_[i] = y_[i] + h * (a71 * k_[0][i] + a73 * k_[2][i] + a74 * k_[3][i] +
                              a75 * k_[4][i] + a76 * k_[5][i]);
    rhs_(t_ + h, ynew_, k_[6]);

    double err = 0.0;
    for (int i = 0; i < N; ++i) {
      const double e = h * (e1 * k_[0][i] + e3 * k_[2][i] + e4 * k_[3][i] +
                            e5 * k_[4][i] + e6 * k_[5][i] + e7 * k_[6][i]);
      const double s =
          opt_.abs_tol + opt_.rel_tol * std::max(std::abs(y_[i]), std::abs(ynew_[i]));
      err = std::max(err, std::abs(e) / s);
      if (!std::isfinite(ynew_[i])) return std::numeric_limits<double>::infinity();
    }
    return err;
  }

  void make_dense(double h) {
    static constexpr double d1 = -12715105075.0 / 11282082432.0;
    static constexpr double d3 = 87487479700.0 / 32700410799.0;
    static constexpr double d4 = -10690763975.0 / 1880347072.0;
    static constexpr double d5 = 701980252875.0 / 199316789632.0;
    static constexpr double d6 = -1453857185.0 / 822651844.0;
    static constexpr double d7 = 69997945.0 / 29380423.0;
    step_.t0 = t_;
    step_.t1 = t_ + h;
    step_.y0 = y_;
    step_.y1 = ynew_;
    for (int i = 0; i < N; ++i) {
      const double ydiff = ynew_[i] - y_[i];
      const double bspl = h * k_[0][i] - ydiff;
      step_.r1[i] = y_[i];
      step_.r2[i] = ydiff;
      step_.r3[i] = bspl;
      step_.r4[i] = ydiff - h * k_[6][i] - bspl;
      step_.r5[i] = h * (d1 * k_[0][i] + d3 * k_[2][i] + d4 * k_[3][i] + d5 * k_[4][i] +
                         d6 * k_[5][i] + d7 * k_[6][i]);
    }
  }

  RHS rhs_;
  OdeOptions opt_;
  double t_, h_ = 0.0;
  State<N> y_, ynew_{};
  std::array<State<N>, 7> k_{};
  DenseStep<N> step_{};
  long steps_taken_ = 0;
};

/// Bisection for a root of phi(t) inside a dense step, given a sign change
/// between ta and tb. Resolves t to ~1 ulp of the interval.
template <int N, class Phi>
double locate_zero(const DenseStep<N>& s, Phi phi, double ta, double tb) {
  double fa = phi(s, ta);
  if (fa == 0.0) return ta;
  for (int it = 0; it < 200; ++it) {
    const double tm = 0.5 * (ta + tb);
    if (tm == ta || tm == tb) return tm;
    const double fm = phi(s, tm);
    if (fm == 0.0) return tm;
    if ((fm > 0) == (fa > 0)) {
      ta = tm;
      fa = fm;
    } else {
      tb = tm;
    }
  }
  return 0.5 * (ta + tb);
}

}  // namespace filippov
