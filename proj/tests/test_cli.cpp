#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

// End-to-end checks of the command-line binary: artifact layout, exit-code
// contract, determinism, and the config plumbing.

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir() {
  static const fs::path d = [] {
    fs::path p = fs::temp_directory_path() / "filippov_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

RunResult run_cli(const std::string& args, const std::string& tag) {
  const fs::path out = scratch_dir() / (tag + ".out");
  const fs::path err = scratch_dir() / (tag + ".err");
  const std::string cmd = std::string(FILIPPOV_BIN) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

}  // namespace

TEST_CASE("print-config lists every default") {
  const auto r = run_cli("--print-config", "printcfg");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("[system]") != std::string::npos);
  CHECK(r.out.find("[integrator]") != std::string::npos);
  CHECK(r.out.find("rel_tol = 1e-10") != std::string::npos);
  CHECK(r.out.find("id = thompson_hunt") != std::string::npos);
  CHECK(r.out.find("cert_tol = 1e-07") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected with a config error") {
  const auto r = run_cli("--set nope.key=1 quantities", "badkey");
  CHECK(r.exit_code == 1);
  const auto e = ojson::parse(r.err);
  CHECK(e["error"]["type"] == "config");
  CHECK(std::string(e["error"]["message"]).find("nope.key") != std::string::npos);

  const fs::path cfg = scratch_dir() / "bad.cfg";
  std::ofstream(cfg) << "[integrator]\nrel_tol = 1e-8\nspelling = worng\n";
  const auto r2 = run_cli("--config " + cfg.string() + " quantities", "badfile");
  CHECK(r2.exit_code == 1);
  CHECK(ojson::parse(r2.err)["error"]["type"] == "config");
}

TEST_CASE("numerical failures exit 2 with a machine-readable error") {
  // the fold-fold system has no cycle, so the grazing-cycle pipeline fails
  const auto r = run_cli("quantities --system parabola -o " + (scratch_dir() / "q2").string(),
                         "numfail");
  CHECK(r.exit_code == 2);
  const auto e = ojson::parse(r.err);
  CHECK(e["error"]["type"] == "numerical");
}

TEST_CASE("simulate writes the trajectory CSV with the grazing event") {
  const fs::path dir = scratch_dir() / "sim";
  const auto r = run_cli("simulate --system parabola --from -1,1 --t 2 -o " + dir.string(),
                         "sim");
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "trajectory.csv");
  CHECK(csv.find("\r\n") != std::string::npos);  // RFC 4180 line endings
  CHECK(csv.find("t,x,y,arc_kind,event") != std::string::npos);
  CHECK(csv.find("# tool_version") != std::string::npos);

  const auto j = ojson::parse(r.out);
  REQUIRE(j["events"].size() >= 1);
  const auto& ev = j["events"][0];
  CHECK(ev["kind"] == "grazing");
  CHECK(std::abs(double(ev["t"]) - 1.0) <= 1e-6);
  CHECK(j["config"]["system"]["id"] == "parabola");
  CHECK(j["tool_version"] == "0.1.0");
}

TEST_CASE("identical runs are byte-identical") {
  // the resolved config (including the output directory) is embedded in every
  // artifact, so determinism is rerunning the same config into the same place
  const fs::path d = scratch_dir() / "det";
  const std::string args = "simulate --system circle --from 1,1 --t 3 -o " + d.string();
  REQUIRE(run_cli(args, "det1").exit_code == 0);
  const std::string first_traj = slurp(d / "trajectory.csv");
  REQUIRE(run_cli(args, "det2").exit_code == 0);
  CHECK(first_traj == slurp(d / "trajectory.csv"));

  const std::string qargs = "quantities --system circle -o " + d.string();
  REQUIRE(run_cli(qargs, "detq1").exit_code == 0);
  const std::string first_qty = slurp(d / "quantities.json");
  REQUIRE(run_cli(qargs, "detq2").exit_code == 0);
  CHECK(first_qty == slurp(d / "quantities.json"));
}

TEST_CASE("quantities on the circle reproduce the analytic multiplier") {
  const fs::path dir = scratch_dir() / "qty";
  const auto r = run_cli("quantities --system circle -o " + dir.string(), "qty");
  REQUIRE(r.exit_code == 0);
  const auto j = ojson::parse(slurp(dir / "quantities.json"));
  const double lam = j["quantities"]["lambda0"];
  const double exact = std::exp(-4.0 * M_PI);
  CHECK(std::abs(lam - exact) <= 1e-6 * exact);
  for (const auto& [k, v] : j["sign_suite"].items()) {
    INFO(k);
    CHECK(v == true);
  }
  CHECK(std::abs(double(j["identity_residuals"]["A1_difference"])) <= 1e-7);
  CHECK(std::abs(double(j["psi_coefficients"]["psi3"]) - 2.0 / (exact - 1.0)) <= 1e-4);
}

TEST_CASE("tangencies on the oscillator reports the fold-fold") {
  const fs::path dir = scratch_dir() / "tan";
  const auto r = run_cli("tangencies --range -1,1 -o " + dir.string(), "tan");
  REQUIRE(r.exit_code == 0);
  const auto j = ojson::parse(slurp(dir / "tangencies.json"));
  REQUIRE(j["tangencies"].size() == 1);
  CHECK(std::abs(double(j["tangencies"][0]["x"])) <= 1e-10);
  CHECK(j["tangencies"][0]["side"] == "both");
  CHECK(j["tangencies"][0]["upper"]["fold"] == true);
}

TEST_CASE("portrait at a two-standard-cycle point") {
  const fs::path dir = scratch_dir() / "por";
  const auto r = run_cli(
      "portrait --beta=-0.01,0.0001 --set run.emit_trajectories=true -o " + dir.string(),
      "por");
  REQUIRE(r.exit_code == 0);
  const auto j = ojson::parse(slurp(dir / "portrait.json"));
  CHECK(j["inventory"]["standard_cycles"].size() == 2);
  CHECK(j["inventory"]["crossing_cycles"].size() == 0);
  for (const auto& e : j["inventory"]["standard_cycles"])
    CHECK(double(e["closure_gap"]) <= 1e-7);
  CHECK(fs::exists(dir / "portrait_standard_0.csv"));
  CHECK(fs::exists(dir / "portrait_standard_1.csv"));
}

TEST_CASE("boundary traces a curve and fits its coefficient") {
  const fs::path dir = scratch_dir() / "bnd";
  const auto r = run_cli(
      "boundary --curve psi3 --grid 8 --set diagram.hi_frac=0.01 --jobs 2 -o " + dir.string(),
      "bnd");
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "curve_psi3.csv");
  CHECK(csv.find("kind,beta1,beta2") != std::string::npos);
  const auto j = ojson::parse(r.out);
  CHECK(j["fit"]["samples"] == 8);
  CHECK(j["fit"]["skipped"].size() == 0);
  CHECK(double(j["fit"]["relative_error"]) <= 0.15);
}

TEST_CASE("diagram emits curves, regions, and the plot script") {
  const fs::path dir = scratch_dir() / "dia";
  const auto r = run_cli(
      "diagram --grid 8 --set diagram.hi_frac=0.01 --jobs 0 -o " + dir.string(), "dia");
  REQUIRE(r.exit_code == 0);
  for (const char* n : {"psi1", "psi2", "psi3", "psi4", "psi5"})
    CHECK(fs::exists(dir / (std::string("curve_") + n + ".csv")));
  CHECK(fs::exists(dir / "regions.csv"));
  CHECK(fs::exists(dir / "plot_diagram.py"));
  const auto j = ojson::parse(slurp(dir / "diagram.json"));
  CHECK(j["regions"].size() == 9);
  CHECK(j["curves"].size() == 5);
}

TEST_CASE("inline polynomial system matches the builtin oscillator") {
  // the oscillator at (a, b) = (-1, 1) spelled out as term lists
  const fs::path cfg = scratch_dir() / "poly.cfg";
  std::ofstream(cfg) << "[system]\n"
                        "id = polynomial\n"
                        "f_plus = 1 -1*y\n"
                        "g_plus = 1*x 1*y -1*y^3\n"
                        "g_plus_alpha1 = 1\n"
                        "g_plus_alpha2 = 1*y -1*y^2\n";
  const fs::path d1 = scratch_dir() / "poly1", d2 = scratch_dir() / "poly2";
  const auto r1 = run_cli("--config " + cfg.string() +
                              " simulate --from 0.5,0.5 --t 3 --alpha 0.01,0.02 -o " +
                              d1.string(),
                          "poly1");
  const auto r2 = run_cli(
      "simulate --system thompson_hunt --set system.a=-1 --set system.b=1 --from 0.5,0.5 "
      "--t 3 --alpha 0.01,0.02 -o " +
          d2.string(),
      "poly2");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  const auto j1 = ojson::parse(r1.out), j2 = ojson::parse(r2.out);
  CHECK(std::abs(double(j1["end_point"][0]) - double(j2["end_point"][0])) <= 1e-9);
  CHECK(std::abs(double(j1["end_point"][1]) - double(j2["end_point"][1])) <= 1e-9);
  CHECK(j1["arcs"] == j2["arcs"]);
}
