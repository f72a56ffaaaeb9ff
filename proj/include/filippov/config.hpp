#pragma once

#include <array>
#include <cctype>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "filippov/errors.hpp"
#include "filippov/field.hpp"
#include "filippov/hybrid.hpp"
#include "filippov/io.hpp"
#include "filippov/models.hpp"
#include "filippov/solver.hpp"

namespace filippov {

// ---------------------------------------------------------------------------
// Inline polynomial systems
//
// A field component is a whitespace-separated list of terms, each
//   COEF | COEF*x | COEF*y | COEF*x^I | COEF*y^J | COEF*x^I*y^J
// e.g. "1 -1*y" is 1 - y and "1*x -1*y^3" is x - y^3. Parameter dependence is
// linear: separate term lists multiply alpha1 and alpha2. The lower field is
// always the Z2-symmetric partner.
// ---------------------------------------------------------------------------

struct PolyTerm {
  double coef = 0.0;
  int px = 0, py = 0;
};

struct Poly {
  std::vector<PolyTerm> terms;

  double eval(double x, double y) const {
    double s = 0.0;
    for (const auto& t : terms) s += t.coef * ipow(x, t.px) * ipow(y, t.py);
    return s;
  }
  Poly dx() const {
    Poly d;
    for (const auto& t : terms)
      if (t.px > 0) d.terms.push_back({t.coef * t.px, t.px - 1, t.py});
    return d;
  }
  Poly dy() const {
    Poly d;
    for (const auto& t : terms)
      if (t.py > 0) d.terms.push_back({t.coef * t.py, t.px, t.py - 1});
    return d;
  }

  static double ipow(double v, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= v;
    return r;
  }
};

namespace detail {

inline double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ConfigError(what + ": not a number: '" + s + "'");
  return v;
}

inline int parse_int(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw ConfigError(what + ": not an integer: '" + s + "'");
  return static_cast<int>(v);
}

inline bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(what + ": not a boolean: '" + s + "'");
}

inline PolyTerm parse_poly_term(const std::string& tok, const std::string& what) {
  PolyTerm t;
  std::size_t pos = 0;
  char* end = nullptr;
  t.coef = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str()) throw ConfigError(what + ": term must start with a coefficient: '" + tok + "'");
  pos = static_cast<std::size_t>(end - tok.c_str());
  while (pos < tok.size()) {
    if (tok[pos] != '*') throw ConfigError(what + ": expected '*' in term '" + tok + "'");
    ++pos;
    if (pos >= tok.size() || (tok[pos] != 'x' && tok[pos] != 'y'))
      throw ConfigError(what + ": expected x or y in term '" + tok + "'");
    const bool is_x = tok[pos] == 'x';
    ++pos;
    int p = 1;
    if (pos < tok.size() && tok[pos] == '^') {
      ++pos;
      std::size_t used = 0;
      try {
        p = std::stoi(tok.substr(pos), &used);
      } catch (...) {
        throw ConfigError(what + ": bad exponent in term '" + tok + "'");
      }
      if (p < 0) throw ConfigError(what + ": negative exponent in term '" + tok + "'");
      pos += used;
    }
    (is_x ? t.px : t.py) += p;
  }
  return t;
}

inline Poly parse_poly(const std::string& text, const std::string& what) {
  Poly p;
  std::istringstream iss(text);
  std::string tok;
  while (iss >> tok) p.terms.push_back(parse_poly_term(tok, what));
  return p;
}

}  // namespace detail

/// Upper field (f, g) with linear parameter unfolding, Z2-symmetric partner.
inline FilippovSystem polynomial_system(const Poly& f, const Poly& g, const Poly& f_a1,
                                        const Poly& g_a1, const Poly& f_a2,
                                        const Poly& g_a2) {
  struct Parts {
    Poly f, g, fx, gx, fy, gy;
  };
  auto mk = [](const Poly& pf, const Poly& pg) {
    return Parts{pf, pg, pf.dx(), pg.dx(), pf.dy(), pg.dy()};
  };
  const auto base = mk(f, g), p1 = mk(f_a1, g_a1), p2 = mk(f_a2, g_a2);

  SmoothField up;
  up.eval = [base, p1, p2](Vec2 p, const Alpha& a) -> Vec2 {
    return {base.f.eval(p.x, p.y) + a[0] * p1.f.eval(p.x, p.y) + a[1] * p2.f.eval(p.x, p.y),
            base.g.eval(p.x, p.y) + a[0] * p1.g.eval(p.x, p.y) + a[1] * p2.g.eval(p.x, p.y)};
  };
  up.dx = [base, p1, p2](Vec2 p, const Alpha& a) -> Vec2 {
    return {base.fx.eval(p.x, p.y) + a[0] * p1.fx.eval(p.x, p.y) + a[1] * p2.fx.eval(p.x, p.y),
            base.gx.eval(p.x, p.y) + a[0] * p1.gx.eval(p.x, p.y) + a[1] * p2.gx.eval(p.x, p.y)};
  };
  up.dy = [base, p1, p2](Vec2 p, const Alpha& a) -> Vec2 {
    return {base.fy.eval(p.x, p.y) + a[0] * p1.fy.eval(p.x, p.y) + a[1] * p2.fy.eval(p.x, p.y),
            base.gy.eval(p.x, p.y) + a[0] * p1.gy.eval(p.x, p.y) + a[1] * p2.gy.eval(p.x, p.y)};
  };
  up.da1 = [p1](Vec2 p, const Alpha&) -> Vec2 {
    return {p1.f.eval(p.x, p.y), p1.g.eval(p.x, p.y)};
  };
  up.da2 = [p2](Vec2 p, const Alpha&) -> Vec2 {
    return {p2.f.eval(p.x, p.y), p2.g.eval(p.x, p.y)};
  };
  return symmetrize(std::move(up));
}

// ---------------------------------------------------------------------------
// Run configuration: flat key = value with [section] headers.
// ---------------------------------------------------------------------------

struct RunConfig {
  // [system]
  std::string system_id = "thompson_hunt";  // thompson_hunt | circle | parabola | polynomial
  double sys_a = -1.0;
  double sys_b = 0.2812467707224322;  // grazing value theta(-1)
  std::string f_plus, g_plus, f_plus_alpha1, g_plus_alpha1, f_plus_alpha2, g_plus_alpha2;
  std::array<double, 2> alpha{0.0, 0.0};
  std::string beta1, beta2;  // empty = not set; when set, overrides alpha
  // [integrator]
  IntegratorOptions opts{};
  // [classify]
  ClassifyOptions copts{};
  // [diagram]
  int grid_points = 12;
  double lo_frac = 1e-3;
  double hi_frac = 5e-2;
  std::string curve = "psi1";
  // [simulate]
  double x0 = -1.0, y0 = 1.0;
  double t_max = 2.0;
  std::string side = "auto";  // auto | upper | lower
  // [tangencies]
  double seg_lo = -2.0, seg_hi = 2.0;
  // [run]
  std::string output_dir = ".";
  unsigned jobs = 0;
  bool emit_trajectories = false;

  bool beta_set() const { return !beta1.empty() || !beta2.empty(); }
  std::array<double, 2> beta_values() const {
    if (beta1.empty() || beta2.empty())
      throw ConfigError("system.beta1 and system.beta2 must be set together");
    return {detail::parse_double(beta1, "system.beta1"),
            detail::parse_double(beta2, "system.beta2")};
  }
};

/// Ordered (key, value) view of a config; drives --print-config, the embedded
/// provenance block in every output, and unknown-key rejection.
inline std::vector<std::pair<std::string, std::string>> config_kv(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> kv;
  auto add = [&kv](const std::string& k, std::string v) { kv.emplace_back(k, std::move(v)); };
  add("system.id", c.system_id);
  add("system.a", fmt_double(c.sys_a));
  add("system.b", fmt_double(c.sys_b));
  add("system.f_plus", c.f_plus);
  add("system.g_plus", c.g_plus);
  add("system.f_plus_alpha1", c.f_plus_alpha1);
  add("system.g_plus_alpha1", c.g_plus_alpha1);
  add("system.f_plus_alpha2", c.f_plus_alpha2);
  add("system.g_plus_alpha2", c.g_plus_alpha2);
  add("system.alpha1", fmt_double(c.alpha[0]));
  add("system.alpha2", fmt_double(c.alpha[1]));
  add("system.beta1", c.beta1);
  add("system.beta2", c.beta2);
  add("integrator.rel_tol", fmt_double(c.opts.rel_tol));
  add("integrator.abs_tol", fmt_double(c.opts.abs_tol));
  add("integrator.event_tol", fmt_double(c.opts.event_tol));
  add("classify.edge_tol", fmt_double(c.copts.edge_tol));
  add("classify.cert_tol", fmt_double(c.copts.cert_tol));
  add("classify.certify", c.copts.certify ? "true" : "false");
  add("diagram.grid_points", std::to_string(c.grid_points));
  add("diagram.lo_frac", fmt_double(c.lo_frac));
  add("diagram.hi_frac", fmt_double(c.hi_frac));
  add("diagram.curve", c.curve);
  add("simulate.x0", fmt_double(c.x0));
  add("simulate.y0", fmt_double(c.y0));
  add("simulate.t_max", fmt_double(c.t_max));
  add("simulate.side", c.side);
  add("tangencies.lo", fmt_double(c.seg_lo));
  add("tangencies.hi", fmt_double(c.seg_hi));
  add("run.output_dir", c.output_dir);
  add("run.jobs", std::to_string(c.jobs));
  add("run.emit_trajectories", c.emit_trajectories ? "true" : "false");
  return kv;
}

inline void config_apply(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  if (key == "system.id") {
    if (value != "thompson_hunt" && value != "circle" && value != "parabola" &&
        value != "polynomial")
      throw ConfigError("system.id: unknown system '" + value + "'");
    c.system_id = value;
  } else if (key == "system.a")
    c.sys_a = parse_double(value, key);
  else if (key == "system.b")
    c.sys_b = parse_double(value, key);
  else if (key == "system.f_plus")
    c.f_plus = value;
  else if (key == "system.g_plus")
    c.g_plus = value;
  else if (key == "system.f_plus_alpha1")
    c.f_plus_alpha1 = value;
  else if (key == "system.g_plus_alpha1")
    c.g_plus_alpha1 = value;
  else if (key == "system.f_plus_alpha2")
    c.f_plus_alpha2 = value;
  else if (key == "system.g_plus_alpha2")
    c.g_plus_alpha2 = value;
  else if (key == "system.alpha1")
    c.alpha[0] = parse_double(value, key);
  else if (key == "system.alpha2")
    c.alpha[1] = parse_double(value, key);
  else if (key == "system.beta1")
    c.beta1 = value;
  else if (key == "system.beta2")
    c.beta2 = value;
  else if (key == "integrator.rel_tol")
    c.opts.rel_tol = parse_double(value, key);
  else if (key == "integrator.abs_tol")
    c.opts.abs_tol = parse_double(value, key);
  else if (key == "integrator.event_tol")
    c.opts.event_tol = parse_double(value, key);
  else if (key == "classify.edge_tol")
    c.copts.edge_tol = parse_double(value, key);
  else if (key == "classify.cert_tol")
    c.copts.cert_tol = parse_double(value, key);
  else if (key == "classify.certify")
    c.copts.certify = parse_bool(value, key);
  else if (key == "diagram.grid_points")
    c.grid_points = parse_int(value, key);
  else if (key == "diagram.lo_frac")
    c.lo_frac = parse_double(value, key);
  else if (key == "diagram.hi_frac")
    c.hi_frac = parse_double(value, key);
  else if (key == "diagram.curve")
    c.curve = value;
  else if (key == "simulate.x0")
    c.x0 = parse_double(value, key);
  else if (key == "simulate.y0")
    c.y0 = parse_double(value, key);
  else if (key == "simulate.t_max")
    c.t_max = parse_double(value, key);
  else if (key == "simulate.side") {
    if (value != "auto" && value != "upper" && value != "lower")
      throw ConfigError("simulate.side: expected auto|upper|lower, got '" + value + "'");
    c.side = value;
  } else if (key == "tangencies.lo")
    c.seg_lo = parse_double(value, key);
  else if (key == "tangencies.hi")
    c.seg_hi = parse_double(value, key);
  else if (key == "run.output_dir")
    c.output_dir = value;
  else if (key == "run.jobs") {
    const int j = parse_int(value, key);
    if (j < 0) throw ConfigError("run.jobs: must be >= 0");
    c.jobs = static_cast<unsigned>(j);
  } else if (key == "run.emit_trajectories")
    c.emit_trajectories = parse_bool(value, key);
  else
    throw ConfigError("unknown config key: '" + key + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace detail

/// Parses `key = value` lines grouped under [section] headers into the config.
/// Unknown keys are rejected, so a typo cannot silently fall back to defaults.
inline void config_parse_text(RunConfig& c, const std::string& text) {
  std::istringstream iss(text);
  std::string line, section;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(iss, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      section = detail::trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    if (++seen[key] > 1)
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key +
                        "'");
    config_apply(c, key, value);
  }
}

inline std::string print_config(const RunConfig& c) {
  std::string out;
  std::string section;
  for (const auto& [k, v] : config_kv(c)) {
    const std::size_t dot = k.find('.');
    const std::string sec = k.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += k.substr(dot + 1) + " = " + v + "\n";
  }
  return out;
}

inline json config_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : config_kv(c)) {
    const std::size_t dot = k.find('.');
    j[k.substr(0, dot)][k.substr(dot + 1)] = v;
  }
  return j;
}

inline FilippovSystem build_system(const RunConfig& c) {
  if (c.system_id == "thompson_hunt") return thompson_hunt(c.sys_a, c.sys_b);
  if (c.system_id == "circle") return circle_system();
  if (c.system_id == "parabola") return parabola_system();
  if (c.system_id == "polynomial") {
    if (c.f_plus.empty() || c.g_plus.empty())
      throw ConfigError("system.id = polynomial requires system.f_plus and system.g_plus");
    return polynomial_system(detail::parse_poly(c.f_plus, "system.f_plus"),
                             detail::parse_poly(c.g_plus, "system.g_plus"),
                             detail::parse_poly(c.f_plus_alpha1, "system.f_plus_alpha1"),
                             detail::parse_poly(c.g_plus_alpha1, "system.g_plus_alpha1"),
                             detail::parse_poly(c.f_plus_alpha2, "system.f_plus_alpha2"),
                             detail::parse_poly(c.g_plus_alpha2, "system.g_plus_alpha2"));
  }
  throw ConfigError("unknown system id: '" + c.system_id + "'");
}

}  // namespace filippov
