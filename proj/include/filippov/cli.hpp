#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "filippov/atlas.hpp"
#include "filippov/boundary.hpp"
#include "filippov/config.hpp"
#include "filippov/io.hpp"

#include "CLI11.hpp"

namespace filippov {
namespace cli {

inline json provenance(const RunConfig& cfg) {
  json j = json::object();
  j["tool_version"] = kToolVersion;
  j["config"] = config_json(cfg);
  return j;
}

inline std::vector<std::string> config_comments(const RunConfig& cfg) {
  std::vector<std::string> out;
  out.push_back(std::string("tool_version = ") + kToolVersion);
  for (const auto& [k, v] : config_kv(cfg)) out.push_back(k + " = " + v);
  return out;
}

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

inline json point_json(Point p) { return json::array({p.x, p.y}); }

// --------------------------------------------------------------- simulate --

inline json cmd_simulate(const RunConfig& cfg) {
  const FilippovSystem sys = build_system(cfg);
  Side hint = Side::Upper;
  if (cfg.side == "lower" || (cfg.side == "auto" && cfg.y0 < 0)) hint = Side::Lower;
  const HybridTrajectory traj =
      flow(sys, {cfg.x0, cfg.y0}, hint, cfg.t_max, cfg.alpha, cfg.opts);

  CsvTable t;
  t.comments = config_comments(cfg);
  t.header = {"t", "x", "y", "arc_kind", "event"};
  json events = json::array();
  for (const Arc& arc : traj.arcs) {
    for (std::size_t i = 0; i < arc.samples.size(); ++i) {
      const auto& [tt, p] = arc.samples[i];
      std::string ev;
      if (i == 0 && arc.entry_event != EventKind::None)
        ev = to_string(arc.entry_event);
      else if (i + 1 == arc.samples.size() && arc.exit_event != EventKind::None)
        ev = to_string(arc.exit_event);
      t.add_row({fmt_double(tt), fmt_double(p.x), fmt_double(p.y), to_string(arc.kind), ev});
    }
    if (arc.exit_event != EventKind::None && arc.exit_event != EventKind::TimeOut)
      events.push_back({{"t", arc.t_end()}, {"kind", to_string(arc.exit_event)}});
  }
  const std::string path = out_path(cfg, "trajectory.csv");
  write_text_file(path, t.str());

  json j = provenance(cfg);
  j["command"] = "simulate";
  j["arcs"] = traj.arcs.size();
  j["end_time"] = traj.end_time();
  j["end_point"] = point_json(traj.end_point());
  j["events"] = events;
  j["outputs"] = json::array({path});
  return j;
}

// -------------------------------------------------------------- tangencies --

inline json cmd_tangencies(const RunConfig& cfg) {
  const FilippovSystem sys = build_system(cfg);
  if (!(cfg.seg_hi > cfg.seg_lo))
    throw ConfigError("tangencies: need tangencies.lo < tangencies.hi");
  const auto tangs = find_tangencies(sys, cfg.seg_lo, cfg.seg_hi, cfg.alpha);

  json jt = json::array();
  for (const auto& r : tangs) {
    json e = json::object();
    e["x"] = r.x;
    e["side"] = r.side_label();
    e["upper"] = {{"tangent", r.upper_tangent}, {"fold", r.upper_fold},
                  {"visible", r.upper_visible}};
    e["lower"] = {{"tangent", r.lower_tangent}, {"fold", r.lower_fold},
                  {"visible", r.lower_visible}};
    jt.push_back(e);
  }

  // split the segment at the tangencies and report pseudo-equilibria on the
  // sliding pieces together with the piece classification
  std::vector<double> cuts{cfg.seg_lo};
  for (const auto& r : tangs)
    if (r.x > cuts.back() + 1e-12 && r.x < cfg.seg_hi - 1e-12) cuts.push_back(r.x);
  cuts.push_back(cfg.seg_hi);

  json jsegs = json::array();
  json jpe = json::array();
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    const auto bc = classify_point(sys, 0.5 * (lo + hi), cfg.alpha);
    jsegs.push_back({{"lo", lo}, {"hi", hi}, {"kind", to_string(bc.kind)}});
    if (bc.kind != BoundaryKind::SlidingStable && bc.kind != BoundaryKind::SlidingUnstable)
      continue;
    for (const auto& pe : pseudo_equilibria(sys, lo, hi, cfg.alpha)) {
      jpe.push_back({{"x", pe.x},
                     {"stability", pe.stability == PseudoStability::PseudoSaddle
                                       ? "pseudo_saddle"
                                       : "pseudo_node"},
                     {"slope", pe.slope}});
    }
  }

  json j = provenance(cfg);
  j["command"] = "tangencies";
  j["tangencies"] = jt;
  j["segments"] = jsegs;
  j["pseudo_equilibria"] = jpe;
  const std::string path = out_path(cfg, "tangencies.json");
  write_text_file(path, j.dump(2) + "\n");
  j["outputs"] = json::array({path});
  return j;
}

// -------------------------------------------------------------- quantities --

inline json quantities_body(const FilippovSystem& sys, const GrazingCycleData& gcd) {
  const IntrinsicQuantities q = partial_coefficients(gcd, sys);
  const double lam = q.lambda0;
  const double lp = q.lambda_pm0[0], lm = q.lambda_pm0[1];
  const double g_ab = sys.upper(gcd.section, gcd.alpha).y;
  const double f0 = sys.upper({0, 0}, gcd.alpha).x;
  const double gx0 = sys.upper.partial_x({0, 0}, gcd.alpha).y;
  const double trans = transversality(q.kappa1, q.kappa2, sys, gcd.alpha);

  json body = json::object();
  body["cycle"] = {{"T0", gcd.T0},
                   {"section", json::array({gcd.section.x, gcd.section.y})},
                   {"tau_plus", gcd.tau_plus},
                   {"tau_minus", gcd.tau_minus},
                   {"period_residual", gcd.tau_plus - gcd.tau_minus - gcd.T0}};
  body["quantities"] = {{"lambda0", q.lambda0},
                        {"kappa1", q.kappa1},
                        {"kappa2", q.kappa2},
                        {"nu", q.nu},
                        {"lambda_plus0", lp},
                        {"lambda_minus0", lm},
                        {"kappa1_plus", q.kappa_pm[0][0]},
                        {"kappa1_minus", q.kappa_pm[0][1]},
                        {"kappa2_plus", q.kappa_pm[1][0]},
                        {"kappa2_minus", q.kappa_pm[1][1]},
                        {"nu_plus", q.nu_pm[0]},
                        {"nu_minus", q.nu_pm[1]},
                        {"A1_plus", q.A1_pm[0]},
                        {"A1_minus", q.A1_pm[1]},
                        {"A2_plus", q.A2_pm[0]},
                        {"A2_minus", q.A2_pm[1]},
                        {"B_plus", q.B_pm[0]},
                        {"B_minus", q.B_pm[1]},
                        {"transversality", trans}};
  body["identity_residuals"] = {
      {"lambda_chain", lm - lp / lam},
      {"kappa1_chain", q.kappa_pm[0][1] - (q.kappa_pm[0][0] - q.kappa1 * lm)},
      {"kappa2_chain", q.kappa_pm[1][1] - (q.kappa_pm[1][0] - q.kappa2 * lm)},
      {"nu_chain", q.nu_pm[1] - (q.nu_pm[0] - q.nu * lm)},
      {"nu_plus_closed_form", q.nu_pm[0] + g_ab},
      {"nu_minus_closed_form", q.nu_pm[1] + g_ab},
      {"A1_difference", q.A1_pm[0] - q.A1_pm[1]},
      {"A2_difference", (q.A2_pm[0] - q.A2_pm[1]) - lm * (lam - 1.0) * f0 / g_ab},
      {"B_difference", (q.B_pm[0] - q.B_pm[1]) - lm * (lam - 1.0) * gx0 / (2.0 * g_ab)}};
  body["sign_suite"] = {{"lambda0_in_unit_interval", lam > 0.0 && lam < 1.0},
                        {"B_plus_positive", q.B_pm[0] > 0.0},
                        {"B_minus_positive", q.B_pm[1] > 0.0},
                        {"A2_difference_negative", q.A2_pm[0] - q.A2_pm[1] < 0.0},
                        {"B_difference_negative", q.B_pm[0] - q.B_pm[1] < 0.0},
                        {"transversality_nonzero", std::abs(trans) > 1e-10}};
  try {
    const auto pred = predicted_coefficients(sys, q.lambda0, gcd.alpha);
    json jc = json::object();
    for (const auto& [k, v] : pred) jc[curve_name(k)] = v;
    body["psi_coefficients"] = jc;
  } catch (const NumericalError&) {
    body["psi_coefficients"] = nullptr;  // lambda(0) outside (0,1)
  }
  return body;
}

inline json cmd_quantities(const RunConfig& cfg) {
  const FilippovSystem sys = build_system(cfg);
  const GrazingCycleData gcd = grazing_cycle(sys, cfg.alpha, cfg.opts);
  json j = provenance(cfg);
  j["command"] = "quantities";
  j.update(quantities_body(sys, gcd));
  const std::string path = out_path(cfg, "quantities.json");
  write_text_file(path, j.dump(2) + "\n");
  j["outputs"] = json::array({path});
  return j;
}

// ---------------------------------------------------------------- portrait --

inline json inventory_json(const PortraitInventory& inv) {
  auto cat = [](const std::vector<PortraitEntry>& v) {
    json a = json::array();
    for (const auto& e : v)
      a.push_back({{"stability", e.stability},
                   {"representative", json::array({e.rep.x, e.rep.y})},
                   {"closure_gap", e.closure_gap},
                   {"multiplicity", e.multiplicity}});
    return a;
  };
  json j = json::object();
  j["standard_cycles"] = cat(inv.standard_cycles);
  j["crossing_cycles"] = cat(inv.crossing_cycles);
  j["critical_crossing"] = cat(inv.critical_crossing);
  j["sliding_cycles_one_zonal"] = cat(inv.sliding_cycles_one_zonal);
  j["sliding_cycles_two_zonal"] = cat(inv.sliding_cycles_two_zonal);
  j["sliding_homoclinics"] = cat(inv.sliding_homoclinics);
  j["grazing_cycles"] = cat(inv.grazing_cycles);
  return j;
}

inline json cmd_portrait(const RunConfig& cfg) {
  const FilippovSystem sys = build_system(cfg);
  BetaSystem bs;
  if (cfg.beta_set()) {
    const AtlasContext ctx = make_atlas_context(sys, cfg.opts);
    bs = beta_system_at(ctx, cfg.beta_values());
  } else {
    bs = make_beta_system(sys, cfg.alpha, cfg.opts);
  }
  const PortraitInventory inv = classify_portrait(bs, cfg.copts);

  json j = provenance(cfg);
  j["command"] = "portrait";
  j["beta"] = json::array({bs.beta[0], bs.beta[1]});
  j["inventory"] = inventory_json(inv);

  json outputs = json::array();
  if (cfg.emit_trajectories) {
    // one CSV per detected object, flown from its representative point in the
    // fold-at-origin frame for ~1.5 periods
    auto emit = [&](const char* cat, const std::vector<PortraitEntry>& v) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Point p = v[i].rep;
        const Side hint = p.y >= 0 ? Side::Upper : Side::Lower;
        const HybridTrajectory traj = flow(bs.sys, p, hint, 1.5 * bs.T0, bs.alpha, bs.opts);
        CsvTable t;
        t.comments = config_comments(cfg);
        t.header = {"t", "x", "y", "arc_kind", "event"};
        for (const Arc& arc : traj.arcs)
          for (std::size_t s = 0; s < arc.samples.size(); ++s) {
            const auto& [tt, q] = arc.samples[s];
            std::string ev;
            if (s == 0 && arc.entry_event != EventKind::None)
              ev = to_string(arc.entry_event);
            else if (s + 1 == arc.samples.size() && arc.exit_event != EventKind::None)
              ev = to_string(arc.exit_event);
            t.add_row(
                {fmt_double(tt), fmt_double(q.x), fmt_double(q.y), to_string(arc.kind), ev});
          }
        const std::string path =
            out_path(cfg, std::string("portrait_") + cat + "_" + std::to_string(i) + ".csv");
        write_text_file(path, t.str());
        outputs.push_back(path);
      }
    };
    emit("standard", inv.standard_cycles);
    emit("crossing", inv.crossing_cycles);
    emit("critical_crossing", inv.critical_crossing);
    emit("sliding_one_zonal", inv.sliding_cycles_one_zonal);
    emit("sliding_two_zonal", inv.sliding_cycles_two_zonal);
    emit("sliding_homoclinic", inv.sliding_homoclinics);
  }

  const std::string path = out_path(cfg, "portrait.json");
  write_text_file(path, j.dump(2) + "\n");
  outputs.insert(outputs.begin(), path);
  j["outputs"] = outputs;
  return j;
}

// ---------------------------------------------------------------- boundary --

inline CurveKind parse_curve(const std::string& name) {
  for (CurveKind k : {CurveKind::Psi1, CurveKind::Psi2, CurveKind::Psi3, CurveKind::Psi4,
                      CurveKind::Psi5})
    if (name == curve_name(k)) return k;
  throw ConfigError("diagram.curve: expected psi1..psi5, got '" + name + "'");
}

inline std::string write_curve_csv(const RunConfig& cfg, const BoundaryCurve& bc) {
  CsvTable t;
  t.comments = config_comments(cfg);
  t.header = {"kind", "beta1", "beta2"};
  for (const auto& s : bc.samples)
    t.add_row({curve_name(bc.kind), fmt_double(s[0]), fmt_double(s[1])});
  const std::string path =
      out_path(cfg, std::string("curve_") + curve_name(bc.kind) + ".csv");
  write_text_file(path, t.str());
  return path;
}

inline json curve_fit_json(const BoundaryCurve& bc) {
  json j = json::object();
  j["kind"] = curve_name(bc.kind);
  j["samples"] = bc.samples.size();
  j["skipped"] = bc.skipped;
  j["fitted_coefficient"] = bc.fitted_coeff;
  j["predicted_coefficient"] = bc.predicted_coeff;
  j["relative_error"] =
      std::abs(bc.fitted_coeff - bc.predicted_coeff) / std::abs(bc.predicted_coeff);
  return j;
}

inline json cmd_boundary(const RunConfig& cfg) {
  const FilippovSystem sys = build_system(cfg);
  const AtlasContext ctx = make_atlas_context(sys, cfg.opts);
  const CurveKind kind = parse_curve(cfg.curve);
  const BoundaryCurve bc = trace_boundary(
      ctx, kind, default_beta1_grid(ctx, kind, cfg.grid_points, cfg.lo_frac, cfg.hi_frac),
      cfg.jobs);

  const std::string csv_path = write_curve_csv(cfg, bc);
  json j = provenance(cfg);
  j["command"] = "boundary";
  j["fit"] = curve_fit_json(bc);
  const std::string fit_path =
      out_path(cfg, std::string("curve_") + curve_name(kind) + "_fit.json");
  write_text_file(fit_path, j.dump(2) + "\n");
  j["outputs"] = json::array({csv_path, fit_path});
  return j;
}

// ----------------------------------------------------------------- diagram --

inline const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Plots the traced bifurcation boundaries and region samples.

Standalone: reads only the curve_psi*.csv and regions.csv files next to this
script. Lines starting with '#' are provenance comments and are skipped.
"""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_csv(path):
    rows = []
    with open(path, newline="") as f:
        clean = (line for line in f if not line.startswith("#"))
        for row in csv.DictReader(clean):
            rows.append(row)
    return rows


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    curves = {}
    for name in ("psi1", "psi2", "psi3", "psi4", "psi5"):
        path = os.path.join(here, f"curve_{name}.csv")
        if os.path.exists(path):
            rows = read_csv(path)
            curves[name] = ([float(r["beta1"]) for r in rows],
                            [float(r["beta2"]) for r in rows])
    regions = []
    rpath = os.path.join(here, "regions.csv")
    if os.path.exists(rpath):
        regions = [(r["label"], float(r["beta1"]), float(r["beta2"]))
                   for r in read_csv(rpath)]

    fig, (axl, axr) = plt.subplots(1, 2, figsize=(11, 5), sharey=False)
    styles = {"psi1": "C0-o", "psi2": "C1-s", "psi4": "C2-^",
              "psi3": "C3-o", "psi5": "C4-s"}
    for name, (b1, b2) in curves.items():
        ax = axl if b1 and b1[0] < 0 else axr
        ax.plot(b1, b2, styles.get(name, "k-"), markersize=3, label=name)
    for label, b1, b2 in regions:
        ax = axl if b1 < 0 else axr
        ax.plot([b1], [b2], "k.", markersize=4)
        ax.annotate(label, (b1, b2), fontsize=8,
                    textcoords="offset points", xytext=(4, 4))
    for ax, title in ((axl, "beta1 < 0"), (axr, "beta1 > 0")):
        ax.axhline(0.0, color="0.7", linewidth=0.8)
        ax.set_xlabel("beta1")
        ax.set_ylabel("beta2")
        ax.set_title(title)
        ax.legend(fontsize=8)
    fig.tight_layout()
    out = os.path.join(here, "diagram.png")
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    sys.exit(main())
)PY";

inline json diagram_emit(const RunConfig& cfg, const FilippovSystem& sys) {
  DiagramOptions d;
  d.grid_points = cfg.grid_points;
  d.lo_frac = cfg.lo_frac;
  d.hi_frac = cfg.hi_frac;
  d.opts = cfg.opts;
  d.copts = cfg.copts;
  d.jobs = cfg.jobs;
  const BifurcationDiagram dg = build_diagram(sys, d);

  json outputs = json::array();
  json jcurves = json::array();
  for (const auto& bc : dg.curves) {
    outputs.push_back(write_curve_csv(cfg, bc));
    jcurves.push_back(curve_fit_json(bc));
  }

  CsvTable rt;
  rt.comments = config_comments(cfg);
  rt.header = {"label", "beta1", "beta2"};
  json jregions = json::array();
  for (const auto& r : dg.regions) {
    rt.add_row({r.label, fmt_double(r.beta[0]), fmt_double(r.beta[1])});
    jregions.push_back({{"label", r.label},
                        {"beta", json::array({r.beta[0], r.beta[1]})},
                        {"inventory", inventory_json(r.inventory)}});
  }
  const std::string rpath = out_path(cfg, "regions.csv");
  write_text_file(rpath, rt.str());
  outputs.push_back(rpath);

  const std::string spath = out_path(cfg, "plot_diagram.py");
  write_text_file(spath, kPlotScript);
  outputs.push_back(spath);

  json j = json::object();
  j["lambda0"] = dg.lambda0;
  j["curves"] = jcurves;
  j["regions"] = jregions;
  j["outputs"] = outputs;
  return j;
}

inline json cmd_diagram(const RunConfig& cfg) {
  const FilippovSystem sys = build_system(cfg);
  json body = diagram_emit(cfg, sys);
  json j = provenance(cfg);
  j["command"] = "diagram";
  j["lambda0"] = body["lambda0"];
  j["curves"] = body["curves"];
  j["regions"] = body["regions"];
  const std::string path = out_path(cfg, "diagram.json");
  write_text_file(path, j.dump(2) + "\n");
  json outputs = body["outputs"];
  outputs.insert(outputs.begin(), path);
  j["outputs"] = outputs;
  return j;
}

// ----------------------------------------------------------------- example --

inline json cmd_example(const RunConfig& cfg) {
  // end-to-end pipeline on the friction oscillator: locate the grazing value
  // theta(a), evaluate the intrinsic quantities there, then build the diagram
  const double a = cfg.sys_a;
  const double theta = find_theta(a, cfg.opts);
  const FilippovSystem sys = thompson_hunt(a, theta);
  const GrazingCycleData gcd = grazing_cycle(sys, kAlphaZero, cfg.opts);

  RunConfig rcfg = cfg;
  rcfg.system_id = "thompson_hunt";
  rcfg.sys_b = theta;

  json j = provenance(rcfg);
  j["command"] = "example";
  j["a"] = a;
  j["theta"] = theta;
  j.update(quantities_body(sys, gcd));
  json body = diagram_emit(rcfg, sys);
  j["lambda0"] = body["lambda0"];
  j["curves"] = body["curves"];
  j["regions"] = body["regions"];

  const std::string path = out_path(rcfg, "example_report.json");
  write_text_file(path, j.dump(2) + "\n");
  json outputs = body["outputs"];
  outputs.insert(outputs.begin(), path);
  j["outputs"] = outputs;
  return j;
}

// --------------------------------------------------------------------- run --

inline int run(int argc, const char* const* argv) {
  RunConfig cfg;
  std::string config_file;
  std::vector<std::string> sets;
  bool do_print_config = false;

  // flag buffers; applied after the config file so the precedence is
  // defaults < file < --set < explicit flags
  std::vector<double> opt_alpha, opt_beta, opt_from, opt_range;
  std::string opt_system, opt_side, opt_curve, opt_output;
  double opt_t = 0.0, opt_a = 0.0;
  int opt_grid = 0, opt_jobs = -1;

  CLI::App app{"Planar Filippov systems: simulation and grazing-sliding bifurcation analysis"};
  app.fallthrough();
  app.set_help_all_flag("--help-all");
  app.add_option("--config", config_file, "config file (key = value with [section] headers)");
  app.add_option("--set", sets, "override a config key, e.g. --set integrator.rel_tol=1e-8")
      ->take_all();
  app.add_flag("--print-config", do_print_config, "print the resolved config and exit");
  auto* o_out = app.add_option("-o,--output", opt_output, "output directory");
  auto* o_sys = app.add_option("--system", opt_system, "system id: thompson_hunt|circle|parabola|polynomial");
  auto* o_alpha = app.add_option("--alpha", opt_alpha, "alpha1,alpha2")->delimiter(',')->expected(2);
  auto* o_beta = app.add_option("--beta", opt_beta, "beta1,beta2")->delimiter(',')->expected(2);
  auto* o_a = app.add_option("-a", opt_a, "oscillator stiffness parameter a");
  auto* o_jobs = app.add_option("--jobs", opt_jobs, "worker threads (0 = hardware)");
  auto* o_grid = app.add_option("--grid", opt_grid, "points per traced curve");

  auto* c_sim = app.add_subcommand("simulate", "integrate one hybrid trajectory, write CSV");
  auto* o_from = c_sim->add_option("--from", opt_from, "initial point x,y")->delimiter(',')->expected(2);
  auto* o_t = c_sim->add_option("--t", opt_t, "integration time");
  auto* o_side = c_sim->add_option("--side", opt_side, "starting side: auto|upper|lower");

  auto* c_tan = app.add_subcommand("tangencies", "tangency points and pseudo-equilibria, JSON");
  auto* o_range = c_tan->add_option("--range", opt_range, "boundary segment lo,hi")->delimiter(',')->expected(2);

  auto* c_qty = app.add_subcommand("quantities", "intrinsic quantities and identity residuals, JSON");
  auto* c_por = app.add_subcommand("portrait", "classify the phase portrait at alpha or beta, JSON");
  auto* c_bnd = app.add_subcommand("boundary", "trace one bifurcation boundary curve, CSV + fit");
  auto* o_curve = c_bnd->add_option("--curve", opt_curve, "psi1|psi2|psi3|psi4|psi5");
  auto* c_dia = app.add_subcommand("diagram", "full two-parameter diagram, JSON + CSVs + plot script");
  auto* c_ex = app.add_subcommand("example", "end-to-end pipeline on the friction oscillator");
  (void)c_qty;
  (void)c_por;
  (void)c_ex;

  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    json err = {{"error", {{"type", "config"}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }

  try {
    if (!config_file.empty()) config_parse_text(cfg, read_text_file(config_file));
    for (const auto& s : sets) {
      const std::size_t eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      config_apply(cfg, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
    }
    if (o_sys->count()) config_apply(cfg, "system.id", opt_system);
    if (o_a->count()) cfg.sys_a = opt_a;
    if (o_alpha->count()) cfg.alpha = {opt_alpha[0], opt_alpha[1]};
    if (o_beta->count()) {
      cfg.beta1 = fmt_double(opt_beta[0]);
      cfg.beta2 = fmt_double(opt_beta[1]);
    }
    if (o_out->count()) cfg.output_dir = opt_output;
    if (o_jobs->count()) {
      if (opt_jobs < 0) throw ConfigError("--jobs must be >= 0");
      cfg.jobs = static_cast<unsigned>(opt_jobs);
    }
    if (o_from->count()) {
      cfg.x0 = opt_from[0];
      cfg.y0 = opt_from[1];
    }
    if (o_t->count()) cfg.t_max = opt_t;
    if (o_side->count()) config_apply(cfg, "simulate.side", opt_side);
    if (o_range->count()) {
      cfg.seg_lo = opt_range[0];
      cfg.seg_hi = opt_range[1];
    }
    if (o_curve->count()) config_apply(cfg, "diagram.curve", opt_curve);
    if (o_grid->count()) cfg.grid_points = opt_grid;

    if (do_print_config) {
      std::fputs(print_config(cfg).c_str(), stdout);
      return 0;
    }

    json out;
    if (c_sim->parsed())
      out = cmd_simulate(cfg);
    else if (c_tan->parsed())
      out = cmd_tangencies(cfg);
    else if (c_qty->parsed())
      out = cmd_quantities(cfg);
    else if (c_por->parsed())
      out = cmd_portrait(cfg);
    else if (c_bnd->parsed())
      out = cmd_boundary(cfg);
    else if (c_dia->parsed())
      out = cmd_diagram(cfg);
    else if (c_ex->parsed())
      out = cmd_example(cfg);
    else
      throw ConfigError("no subcommand given (see --help)");

    std::fprintf(stdout, "%s\n", out.dump(2).c_str());
    return 0;
  } catch (const ConfigError& e) {
    json err = {{"error", {{"type", "config"}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  } catch (const Error& e) {
    json err = {{"error", {{"type", "numerical"}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 2;
  } catch (const std::exception& e) {
    json err = {{"error", {{"type", "numerical"}, {"message", e.what()}}}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 2;
  }
}

}  // namespace cli
}  // namespace filippov
