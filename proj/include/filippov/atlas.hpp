#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "filippov/errors.hpp"
#include "filippov/field.hpp"
#include "filippov/solver.hpp"
#include "filippov/variational.hpp"

namespace filippov {

enum class CurveKind { Psi1, Psi2, Psi3, Psi4, Psi5, Beta1Axis, Beta2Axis };

inline const char* curve_name(CurveKind k) {
  switch (k) {
    case CurveKind::Psi1: return "psi1";
    case CurveKind::Psi2: return "psi2";
    case CurveKind::Psi3: return "psi3";
    case CurveKind::Psi4: return "psi4";
    case CurveKind::Psi5: return "psi5";
    case CurveKind::Beta1Axis: return "beta1_axis";
    case CurveKind::Beta2Axis: return "beta2_axis";
  }
  return "?";
}

/// Quadratic coefficients c in psi = c*beta1^2 + O(beta1^3) from the origin
/// data and lambda(0) only.
inline std::map<CurveKind, double> predicted_coefficients(const FilippovSystem& sys,
                                                          double lambda0,
                                                          const Alpha& alpha = kAlphaZero) {
  if (!(lambda0 > 0.0 && lambda0 < 1.0))
    throw NumericalError("predicted_coefficients: needs 0 < lambda(0) < 1");
  const double f0 = sys.upper({0, 0}, alpha).x;
  const double gx = sys.upper.partial_x({0, 0}, alpha).y;
  const double l1 = lambda0 - 1.0;
  return {
      {CurveKind::Psi1, 2.0 * lambda0 * gx / (l1 * l1 * f0)},
      {CurveKind::Psi2, -2.0 * lambda0 * gx / (l1 * f0)},
      {CurveKind::Psi3, 2.0 * gx / (l1 * f0)},
      {CurveKind::Psi4, -lambda0 * gx / (2.0 * l1 * f0)},
      {CurveKind::Psi5, gx / (2.0 * l1 * f0)},
  };
}

/// Everything boundary tracing needs but only has to compute once.
struct AtlasContext {
  FilippovSystem sys;
  BetaGeometry geo;
  IntrinsicQuantities q;
  std::array<std::array<double, 2>, 2> jac{};   // d(beta)/d(alpha) at 0
  std::array<std::array<double, 2>, 2> jinv{};  // its inverse
  std::map<CurveKind, double> predicted;
  IntegratorOptions opts{};
};

inline AtlasContext make_atlas_context(const FilippovSystem& sys,
                                       const IntegratorOptions& opts = {}) {
  AtlasContext ctx;
  ctx.sys = sys;
  ctx.opts = opts;
  const GrazingCycleData gcd = grazing_cycle(sys, kAlphaZero, opts);
  ctx.geo = beta_geometry(gcd);
  ctx.q = partial_coefficients(gcd, sys);
  ctx.jac = beta_jacobian(ctx.q, sys);
  const double det = ctx.jac[0][0] * ctx.jac[1][1] - ctx.jac[0][1] * ctx.jac[1][0];
  if (std::abs(det) < 1e-14) throw IllConditioned("make_atlas_context: singular beta Jacobian");
  ctx.jinv = {{{ctx.jac[1][1] / det, -ctx.jac[0][1] / det},
               {-ctx.jac[1][0] / det, ctx.jac[0][0] / det}}};
  ctx.predicted = predicted_coefficients(sys, ctx.q.lambda0);
  return ctx;
}

/// Newton inverse of alpha -> (phi1, phi2)(alpha), using the linearization at
/// the origin as the iteration matrix (exact there, contraction nearby).
inline Alpha beta_to_alpha(const AtlasContext& ctx, const std::array<double, 2>& beta,
                           const Alpha& seed = kAlphaZero, double tol = 1e-10) {
  Alpha a = seed;
  if (a[0] == 0.0 && a[1] == 0.0) {
    a[0] = ctx.jinv[0][0] * beta[0] + ctx.jinv[0][1] * beta[1];
    a[1] = ctx.jinv[1][0] * beta[0] + ctx.jinv[1][1] * beta[1];
  }
  for (int it = 0; it < 50; ++it) {
    const double r0 = fold_offset(ctx.sys, a) - beta[0];
    const double r1 = cycle_offset(ctx.sys, a, ctx.opts, beta[1]) - beta[1];
    if (std::abs(r0) <= tol && std::abs(r1) <= tol) return a;
    a[0] -= ctx.jinv[0][0] * r0 + ctx.jinv[0][1] * r1;
    a[1] -= ctx.jinv[1][0] * r0 + ctx.jinv[1][1] * r1;
  }
  throw NoConvergence("beta_to_alpha: residual did not reach tolerance");
}

inline Alpha beta_to_alpha(const FilippovSystem& sys, const std::array<double, 2>& beta,
                           const IntegratorOptions& opts = {}) {
  return beta_to_alpha(make_atlas_context(sys, opts), beta);
}

/// Beta-form system at a target beta (inverse reparameterization + translation).
inline BetaSystem beta_system_at(const AtlasContext& ctx, const std::array<double, 2>& beta,
                                 const Alpha& seed = kAlphaZero) {
  const Alpha a = beta_to_alpha(ctx, beta, seed);
  return beta_system_from(ctx.sys, a, ctx.geo, ctx.opts, beta[1]);
}

inline BetaSystem to_beta_form(const FilippovSystem& sys, const Alpha& alpha,
                               const IntegratorOptions& opts = {}) {
  return make_beta_system(sys, alpha, opts);
}

namespace detail {

/// Maximum of the concave displacement map over the open domain: scan plus
/// ternary refinement. Crosses zero exactly when the two crossing-cycle
/// roots coalesce.
inline double displacement_max(const BetaSystem& bs) {
  const double left = std::max(-2.0 * bs.beta[0], 0.0);
  const int N = 48;
  const double span = bs.eps1 - left;
  int ibest = 1;
  double vbest = -std::numeric_limits<double>::infinity();
  for (int i = 1; i < N; ++i) {
    const double v = displacement_value(bs, left + span * i / N);
    if (v > vbest) {
      vbest = v;
      ibest = i;
    }
  }
  double a = left + span * (ibest - 1) / N, b = left + span * (ibest + 1) / N;
  for (int it = 0; it < 50 && b - a > 1e-12; ++it) {
    const double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
    if (displacement_value(bs, m1) < displacement_value(bs, m2))
      a = m1;
    else
      b = m2;
  }
  return displacement_value(bs, 0.5 * (a + b));
}

/// Scalar whose sign change in beta2 defines the curve `kind` at fixed beta1.
/// `seed` warm-starts the alpha inversion across nearby evaluations.
inline double curve_event(const AtlasContext& ctx, CurveKind kind,
                          const std::array<double, 2>& beta, Alpha* seed = nullptr) {
  const Alpha a = beta_to_alpha(ctx, beta, seed ? *seed : kAlphaZero);
  if (seed) *seed = a;
  const BetaSystem bs = beta_system_from(ctx.sys, a, ctx.geo, ctx.opts, beta[1]);
  switch (kind) {
    case CurveKind::Psi1: return displacement_max(bs);
    case CurveKind::Psi2: return displacement_value(bs, -2.0 * beta[0]);
    case CurveKind::Psi3: return displacement_value(bs, 0.0);
    case CurveKind::Psi4:
      return transition_map(bs, -beta[0], MapSide::Plus) -
             transition_map(bs, 0.0, MapSide::Minus);
    case CurveKind::Psi5:
      return transition_map(bs, 0.0, MapSide::Plus) -
             transition_map(bs, -beta[0], MapSide::Minus);
    default: throw Error("curve_event: not a psi curve");
  }
}

}  // namespace detail

struct BoundaryCurve {
  CurveKind kind{};
  std::vector<std::array<double, 2>> samples;  // (beta1, beta2)
  std::vector<double> skipped;                 // beta1 grid points w/o bracket
  double fitted_coeff = std::numeric_limits<double>::quiet_NaN();
  double predicted_coeff = std::numeric_limits<double>::quiet_NaN();
};

/// Bisection in beta2 on the defining event of `kind` at one beta1, bracketed
/// around the predicted quadratic and widened multiplicatively.
inline double solve_boundary_point(const AtlasContext& ctx, CurveKind kind, double b1) {
  const double pred = ctx.predicted.at(kind) * b1 * b1;
  static constexpr double mults[] = {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0,
                                     2.0,      4.0,     8.0,     16.0};
  double lo = 0, hi = 0, flo = 0;
  bool bracketed = false;
  double prev_b = 0, prev_f = 0;
  bool have_prev = false;
  Alpha seed = kAlphaZero;
  for (const double m : mults) {
    const double b2 = pred * m;
    const double f = detail::curve_event(ctx, kind, {b1, b2}, &seed);
    if (have_prev && (prev_f > 0) != (f > 0)) {
      lo = prev_b;
      hi = b2;
      flo = prev_f;
      bracketed = true;
      break;
    }
    prev_b = b2;
    prev_f = f;
    have_prev = true;
  }
  if (!bracketed)
    throw EventNotBracketed(std::string("solve_boundary_point: no sign change for ") +
                            curve_name(kind) + " at beta1=" + std::to_string(b1));
  while (std::abs(hi - lo) > 1e-12) {
    const double m = 0.5 * (lo + hi);
    const double f = detail::curve_event(ctx, kind, {b1, m}, &seed);
    if ((f > 0) == (flo > 0)) {
      lo = m;
      flo = f;
    } else {
      hi = m;
    }
  }
  return 0.5 * (lo + hi);
}

/// Least-squares c in beta2 = c*beta1^2 over the 6 innermost samples.
inline double fit_quadratic(const BoundaryCurve& curve) {
  if (curve.samples.size() < 6)
    throw IllConditioned("fit_quadratic: fewer than 6 samples");
  double amin = std::numeric_limits<double>::infinity(), amax = 0;
  for (const auto& s : curve.samples) {
    amin = std::min(amin, std::abs(s[0]));
    amax = std::max(amax, std::abs(s[0]));
  }
  if (amax < 9.99 * amin)
    throw IllConditioned("fit_quadratic: |beta1| span below a decade");
  auto inner = curve.samples;
  std::sort(inner.begin(), inner.end(),
            [](const auto& a, const auto& b) { return std::abs(a[0]) < std::abs(b[0]); });
  inner.resize(6);
  double num = 0, den = 0;
  for (const auto& s : inner) {
    num += s[1] * s[0] * s[0];
    den += s[0] * s[0] * s[0] * s[0];
  }
  return num / den;
}

/// Fit beta2 = c1*beta1 + c2*beta1^2 + c3*beta1^3 on the 6 innermost samples
/// and return (c1, c2); the cubic term soaks up the O(beta1^3) remainder so
/// c1 reflects genuine linear content (quadratic-tangency check).
inline std::array<double, 2> fit_linear_quadratic(const BoundaryCurve& curve) {
  if (curve.samples.size() < 6)
    throw IllConditioned("fit_linear_quadratic: fewer than 6 samples");
  auto inner = curve.samples;
  std::sort(inner.begin(), inner.end(),
            [](const auto& a, const auto& b) { return std::abs(a[0]) < std::abs(b[0]); });
  inner.resize(6);
  const double scale = std::abs(inner.back()[0]);
  double A[3][3] = {};
  double r[3] = {};
  for (const auto& s : inner) {
    const double x = s[0] / scale;
    const double basis[3] = {x, x * x, x * x * x};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) A[i][j] += basis[i] * basis[j];
      r[i] += s[1] * basis[i];
    }
  }
  // Gaussian elimination with partial pivoting on the 3x3 normal system
  int perm[3] = {0, 1, 2};
  for (int k = 0; k < 3; ++k) {
    int p = k;
    for (int i = k + 1; i < 3; ++i)
      if (std::abs(A[perm[i]][k]) > std::abs(A[perm[p]][k])) p = i;
    std::swap(perm[k], perm[p]);
    if (std::abs(A[perm[k]][k]) < 1e-14)
      throw IllConditioned("fit_linear_quadratic: singular normal matrix");
    for (int i = k + 1; i < 3; ++i) {
      const double m = A[perm[i]][k] / A[perm[k]][k];
      for (int j = k; j < 3; ++j) A[perm[i]][j] -= m * A[perm[k]][j];
      r[perm[i]] -= m * r[perm[k]];
    }
  }
  double c[3];
  for (int k = 2; k >= 0; --k) {
    double s = r[perm[k]];
    for (int j = k + 1; j < 3; ++j) s -= A[perm[k]][j] * c[j];
    c[k] = s / A[perm[k]][k];
  }
  return {c[0] / scale, c[1] / (scale * scale)};
}

/// Default log-spaced |beta1| grid scaled by the cycle diameter, signed for
/// the side the kind lives on.
inline std::vector<double> default_beta1_grid(const AtlasContext& ctx, CurveKind kind,
                                              int points = 12, double lo_frac = 1e-3,
                                              double hi_frac = 5e-2) {
  const double sgn = (kind == CurveKind::Psi3 || kind == CurveKind::Psi5) ? 1.0 : -1.0;
  const double lo = lo_frac * ctx.geo.diameter, hi = hi_frac * ctx.geo.diameter;
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] =
        sgn * lo * std::pow(hi / lo, points == 1 ? 0.0 : double(i) / (points - 1));
  return grid;
}

inline BoundaryCurve trace_boundary(const AtlasContext& ctx, CurveKind kind,
                                    const std::vector<double>& b1_grid, unsigned jobs = 0) {
  BoundaryCurve curve;
  curve.kind = kind;
  curve.predicted_coeff = ctx.predicted.at(kind);

  const int n = static_cast<int>(b1_grid.size());
  std::vector<double> b2(static_cast<std::size_t>(n),
                         std::numeric_limits<double>::quiet_NaN());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        b2[static_cast<std::size_t>(i)] =
            solve_boundary_point(ctx, kind, b1_grid[static_cast<std::size_t>(i)]);
      } catch (const NumericalError&) {
        // grid point skipped, reported below
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(std::max(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned k = 0; k + 1 < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (int i = 0; i < n; ++i) {
    if (std::isnan(b2[static_cast<std::size_t>(i)]))
      curve.skipped.push_back(b1_grid[static_cast<std::size_t>(i)]);
    else
      curve.samples.push_back({b1_grid[static_cast<std::size_t>(i)],
                               b2[static_cast<std::size_t>(i)]});
  }
  try {
    curve.fitted_coeff = fit_quadratic(curve);
  } catch (const IllConditioned&) {
    // too many skips: fitted_coeff stays NaN
  }
  return curve;
}

inline BoundaryCurve trace_boundary(const FilippovSystem& sys, CurveKind kind,
                                    const std::vector<double>& b1_grid,
                                    const IntegratorOptions& opts = {}, unsigned jobs = 0) {
  return trace_boundary(make_atlas_context(sys, opts), kind, b1_grid, jobs);
}

// -------- diagram assembly --------

struct RegionResult {
  std::string label;
  std::array<double, 2> beta{};
  PortraitInventory inventory;
};

struct BifurcationDiagram {
  double lambda0 = 0;
  std::vector<BoundaryCurve> curves;
  std::vector<RegionResult> regions;
};

namespace detail {

struct ExpectedCensus {
  int standard = 0;
  int crossing_stable = 0, crossing_unstable = 0, crossing_mult2 = 0;
  int critical = 0;
  int one_zonal = 0, two_zonal = 0, homoclinic = 0, grazing = 0;
  const char* sliding_stability = "";
};

inline ExpectedCensus expected_census(const std::string& label) {
  ExpectedCensus e;
  if (label == "1") {
    e.grazing = 2;
  } else if (label == "2a") {
    e.standard = 2;
  } else if (label == "2b") {
    e.crossing_stable = 1;
  } else if (label == "3a") {
    e.standard = 2;
  } else if (label == "3b") {
    e.grazing = 2;
  } else if (label == "3c") {
    e.one_zonal = 2;
    e.sliding_stability = "stable";
  } else if (label == "3d") {
    e.homoclinic = 2;
    e.sliding_stability = "stable";
  } else if (label == "3e") {
    e.two_zonal = 1;
    e.sliding_stability = "stable";
  } else if (label == "3f") {
    e.critical = 1;
  } else if (label == "3g") {
    e.crossing_stable = 1;
  } else if (label == "4a") {
    e.standard = 2;
  } else if (label == "4b") {
    e.standard = 2;
    e.crossing_mult2 = 1;
  } else if (label == "4c") {
    e.standard = 2;
    e.crossing_stable = 1;
    e.crossing_unstable = 1;
  } else if (label == "4d") {
    e.standard = 2;
    e.critical = 1;
    e.crossing_stable = 1;
  } else if (label == "4e") {
    e.standard = 2;
    e.two_zonal = 1;
    e.crossing_stable = 1;
    e.sliding_stability = "unstable";
  } else if (label == "4f") {
    e.standard = 2;
    e.homoclinic = 2;
    e.crossing_stable = 1;
    e.sliding_stability = "unstable";
  } else if (label == "4g") {
    e.standard = 2;
    e.one_zonal = 2;
    e.crossing_stable = 1;
    e.sliding_stability = "unstable";
  } else if (label == "4h") {
    e.grazing = 2;
    e.crossing_stable = 1;
  } else if (label == "4i") {
    e.crossing_stable = 1;
  } else {
    throw Error("expected_census: unknown label " + label);
  }
  return e;
}

inline void check_census(const std::string& label, const PortraitInventory& inv,
                         std::ostringstream& mismatches) {
  const ExpectedCensus e = expected_census(label);
  auto count = [](const std::vector<PortraitEntry>& v, const char* stab) {
    int n = 0;
    for (const auto& p : v)
      if (stab == nullptr || p.stability == stab) ++n;
    return n;
  };
  auto expect = [&](const char* what, int got, int want) {
    if (got != want)
      mismatches << "region " << label << ": " << what << " got " << got << " want " << want
                 << "\n";
  };
  expect("standard", count(inv.standard_cycles, nullptr), e.standard);
  expect("crossing/stable", count(inv.crossing_cycles, "stable"), e.crossing_stable);
  expect("crossing/unstable", count(inv.crossing_cycles, "unstable"), e.crossing_unstable);
  expect("crossing/mult2", count(inv.crossing_cycles, "multiplicity-two"), e.crossing_mult2);
  expect("critical", count(inv.critical_crossing, nullptr), e.critical);
  expect("grazing", count(inv.grazing_cycles, nullptr), e.grazing);
  const char* ss = e.sliding_stability[0] ? e.sliding_stability : nullptr;
  expect("one-zonal", count(inv.sliding_cycles_one_zonal, ss), e.one_zonal);
  expect("two-zonal", count(inv.sliding_cycles_two_zonal, ss), e.two_zonal);
  expect("homoclinic", count(inv.sliding_homoclinics, ss), e.homoclinic);
}

}  // namespace detail

struct DiagramOptions {
  int grid_points = 12;
  double lo_frac = 1e-3;
  double hi_frac = 5e-2;
  IntegratorOptions opts{};
  ClassifyOptions copts{};
  unsigned jobs = 0;
};

/// Traces the five psi curves, samples each of the nine open regions between
/// them, classifies the portraits, and cross-checks the inventories.
inline BifurcationDiagram build_diagram(const FilippovSystem& sys,
                                        const DiagramOptions& dopts = {}) {
  const AtlasContext ctx = make_atlas_context(sys, dopts.opts);
  if (!(ctx.q.lambda0 < 1.0)) throw NumericalError("build_diagram: needs lambda(0) < 1");

  BifurcationDiagram diag;
  diag.lambda0 = ctx.q.lambda0;
  for (const CurveKind k : {CurveKind::Psi1, CurveKind::Psi2, CurveKind::Psi3, CurveKind::Psi4,
                            CurveKind::Psi5})
    diag.curves.push_back(trace_boundary(
        ctx, k, default_beta1_grid(ctx, k, dopts.grid_points, dopts.lo_frac, dopts.hi_frac),
        dopts.jobs));

  // placement heuristic only; when a fit is unavailable (too many skipped
  // grid points) the asymptotic prediction is the best remaining estimate
  auto fitted = [&](CurveKind k) {
    for (const auto& c : diag.curves)
      if (c.kind == k)
        return std::isnan(c.fitted_coeff) ? c.predicted_coeff : c.fitted_coeff;
    throw Error("build_diagram: missing curve");
  };

  // region samples at the geometric-mean beta1 of the grid, placed between
  // the fitted adjacent curves (half the inner curve next to the axis, a
  // multiple of the outer curve for the unbounded regions)
  const double b1m = std::sqrt(dopts.lo_frac * dopts.hi_frac) * ctx.geo.diameter;
  const double p1 = fitted(CurveKind::Psi1) * b1m * b1m;
  const double p2 = fitted(CurveKind::Psi2) * b1m * b1m;
  const double p3 = fitted(CurveKind::Psi3) * b1m * b1m;
  const double p4 = fitted(CurveKind::Psi4) * b1m * b1m;
  const double p5 = fitted(CurveKind::Psi5) * b1m * b1m;
  const std::vector<std::pair<std::string, std::array<double, 2>>> spots = {
      {"3a", {b1m, -p3}},
      {"3c", {b1m, 0.5 * p5}},
      {"3e", {b1m, -std::sqrt(p3 * p5)}},
      {"3g", {b1m, 3.0 * p3}},
      {"4a", {-b1m, 3.0 * p1}},
      {"4c", {-b1m, std::sqrt(p1 * p2)}},
      {"4e", {-b1m, std::sqrt(p2 * p4)}},
      {"4g", {-b1m, 0.5 * p4}},
      {"4i", {-b1m, -p4}},
  };

  std::ostringstream mismatches;
  for (const auto& [label, beta] : spots) {
    RegionResult rr;
    rr.label = label;
    rr.beta = beta;
    try {
      rr.inventory = classify_portrait(beta_system_at(ctx, beta), dopts.copts);
      detail::check_census(label, rr.inventory, mismatches);
    } catch (const NumericalError& e) {
      mismatches << "region " << label << ": classification failed: " << e.what() << "\n";
    }
    diag.regions.push_back(std::move(rr));
  }
  if (!mismatches.str().empty())
    throw RegionMismatch("build_diagram: inventory disagrees with the census:\n" +
                         mismatches.str());
  return diag;
}

}  // namespace filippov
