#include "weakon/commands.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace weakon;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
  nlohmann::json report;
};

fs::path outdir(const std::string& name) { return fs::temp_directory_path() / ("weakon_cli_test_" + name); }

fs::path scratch(const std::string& name) {
  const fs::path p = outdir(name);
  fs::remove_all(p);
  return p;
}

fs::path write_config(const std::string& name, const nlohmann::json& j) {
  const fs::path dir = scratch("cfg_" + name);
  fs::create_directories(dir);
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

Run run(const std::string& cmd, CommandOptions o, const std::string& tag) {
  o.out_dir = scratch(tag).string();
  std::ostringstream out, err;
  Run r{run_command(cmd, o, out, err), out.str(), err.str(), {}};
  const fs::path rep = fs::path(o.out_dir) / "report.json";
  if (fs::exists(rep)) r.report = nlohmann::json::parse(std::ifstream(rep));
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const nlohmann::json kConfig = {
    {"seed", 42},
    {"systems",
     {{"lin12", {{"builtin", "linear"}, {"matrix", {{-1, 0}, {0, -2}}}}},
      {"lin123", {{"builtin", "linear"}, {"matrix", {{-1, 0, 0}, {0, -2, 0}, {0, 0, -3}}}}},
      {"p3", {{"builtin", "pendulum"}, {"params", {{"b", 0.3}}}}},
      {"p7", {{"builtin", "pendulum"}, {"params", {{"b", 0.7}}}}},
      {"a1", {{"dsl", "dx0 = -x0"}, {"domain", {{-2, 2}}}}},
      {"b2", {{"dsl", "dx0 = -2*x0"}, {"domain", {{-2, 2}}}}},
      {"low", {{"builtin", "linear"}, {"matrix", {{-5}}}}}}},
    {"samplers", {{"coarse", {{"kind", "grid"}, {"points", 21}}}, {"rnd", {{"kind", "random"}, {"count", 50}}}}},
    {"solvers", {{"short", {{"method", "rk4"}, {"step", 0.01}, {"T", 20}}}}},
    {"storage", {{"s01", {{"gamma", "0.1*sin(t)"}, {"bound", 0.1}}}}},
    {"combine",
     {{"pp", {{"kind", "parallel"}, {"a", "p3"}, {"b", "p7"}}},
      {"fb", {{"kind", "feedback"}, {"a", "a1"}, {"b", "b2"}, {"gain", 4}, {"G", {{5}}}}},
      {"hi", {{"kind", "hierarchical"}, {"a", "pendulum"}, {"b", "low"}, {"G", {{10}, {10}}}, {"sampler", "coarse"}}}}}};

}  // namespace

TEST_CASE("certify command exit codes and report") {
  CommandOptions o;
  o.target = "pendulum";
  o.k = 2;
  auto r = run("certify", o, "cert_pend");
  CHECK(r.code == kExitOk);
  CHECK(r.report["holds"] == true);
  CHECK(r.report["alpha"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.report["tool"] == "weakon");
  CHECK(r.report.contains("config_hash"));
  CHECK(r.report.contains("version"));

  o.target = "vanderpol";
  r = run("certify", o, "cert_vdp");
  CHECK(r.code == kExitFails);
  CHECK(std::abs(r.report["worst_sample"]["x"][0].get<double>()) <= 1e-12);

  o.config_path = write_config("a", kConfig).string();
  o.target = "lin12";
  o.k = 1;
  r = run("certify", o, "cert_lin");
  CHECK(r.code == kExitOk);
  CHECK(r.report["alpha"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("certify with storage") {
  CommandOptions o;
  o.config_path = write_config("b", kConfig).string();
  o.target = "lin12";
  o.storage = "s01";
  auto r = run("certify", o, "cert_storage");
  CHECK(r.code == kExitOk);
  CHECK(r.report["alpha"].get<double>() == doctest::Approx(3.0 - 0.2).epsilon(1e-9));
}

TEST_CASE("operational errors exit 1") {
  CommandOptions o;
  o.target = "nosuch";
  CHECK(run("certify", o, "err1").code == kExitError);
  o.target = "pendulum";
  o.metric = "nosuch";
  CHECK(run("certify", o, "err2").code == kExitError);
  CommandOptions s;
  s.target = "pendulum";
  s.x0 = {100, 0};
  auto r = run("simulate", s, "err3");
  CHECK(r.code == kExitError);
  CHECK(r.err.find("domain") != std::string::npos);
  CHECK(run("frobnicate", s, "err4").code == kExitError);
  s.config_path = "/nonexistent/config.json";
  CHECK(run("simulate", s, "err5").code == kExitError);
}

TEST_CASE("config validation") {
  auto bad = kConfig;
  bad.erase("seed");
  CHECK_THROWS(RunConfig::load(write_config("noseed", bad).string()));
  auto dangling = kConfig;
  dangling["combine"]["zz"] = {{"kind", "parallel"}, {"a", "p3"}, {"b", "missing"}};
  CHECK_THROWS(RunConfig::load(write_config("dangling", dangling).string()));
  const auto c = RunConfig::load(write_config("ok", kConfig).string());
  CHECK(c.hash().size() == 16);
  CHECK(c.seed() == 42);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("simulate pendulum from (3, 0)") {
  CommandOptions o;
  o.target = "pendulum";
  o.x0 = {3.0, 0.0};
  o.horizon = 100.0;
  auto r = run("simulate", o, "sim_pend");
  CHECK(r.code == kExitOk);
  CHECK(r.report["terminal"] == "converged-to-equilibrium");
  const double x0 = r.report["final_state"][0];
  const double x1 = r.report["final_state"][1];
  const double d = std::min(std::hypot(x0 - std::numbers::pi, x1), std::hypot(x0, x1));
  CHECK(d <= 1e-3);
  const auto csv = slurp(outdir("sim_pend") / "trajectory.csv");
  CHECK(csv.rfind("t,x0,x1\n", 0) == 0);
}

TEST_CASE("simulate linear from (1, 1) decays") {
  CommandOptions o;
  o.config_path = write_config("c", kConfig).string();
  o.target = "lin12";
  o.x0 = {1.0, 1.0};
  o.horizon = 2.0;
  auto r = run("simulate", o, "sim_lin");
  CHECK(r.code == kExitOk);
  CHECK(r.report["final_state"][0].get<double>() == doctest::Approx(std::exp(-2.0)).epsilon(1e-8));
  CHECK(r.report["final_state"][1].get<double>() == doctest::Approx(std::exp(-4.0)).epsilon(1e-8));
}

TEST_CASE("volumes command") {
  CommandOptions o;
  o.target = "pendulum";
  o.order = 2;
  o.x0 = {1.0, 0.5};
  o.horizon = 50.0;
  auto r = run("volumes", o, "vol_pend");
  CHECK(r.code == kExitOk);
  CHECK(r.report["verdict"] == "pass");
  CHECK(r.report["fitted_rate"].get<double>() == doctest::Approx(-0.5).epsilon(1e-4));
  CHECK(r.report["bound"].get<double>() == doctest::Approx(-0.5).epsilon(1e-12));
  const double div = r.report["tail_mean_divergence"];
  CHECK(std::abs(r.report["fitted_rate"].get<double>() - div) <= 0.01 * std::abs(div));

  CommandOptions l;
  l.config_path = write_config("d", kConfig).string();
  l.target = "lin123";
  l.order = 2;
  l.x0 = {1, 1, 1};
  l.horizon = 20.0;
  l.sampler = "coarse";
  r = run("volumes", l, "vol_lin");
  CHECK(r.code == kExitOk);
  CHECK(r.report["fitted_rate"].get<double>() == doctest::Approx(-3.0).epsilon(0.01));
}

TEST_CASE("lyapunov command") {
  CommandOptions o;
  o.target = "pendulum";
  o.order = 0;
  o.x0 = {2.0, 0.0};
  o.horizon = 100.0;
  auto r = run("lyapunov", o, "lyap");
  CHECK(r.code == kExitOk);
  CHECK(r.report["exponents"].size() == 2);
  CHECK(r.report["partial_sums"][1].get<double>() == doctest::Approx(-0.5).epsilon(2e-3));
}

TEST_CASE("combine commands") {
  CommandOptions o;
  o.config_path = write_config("e", kConfig).string();
  o.certify = true;
  o.target = "pp";
  auto r = run("combine", o, "comb_pp");
  CHECK(r.code == kExitOk);
  CHECK(r.report["certificate"]["alpha"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));

  o.target = "fb";
  r = run("combine", o, "comb_fb");
  CHECK(r.code == kExitOk);
  CHECK(r.report["metric"] == "block_scaling(1:1, 1:2)");
  CHECK(r.report["feedback_condition"]["holds"] == true);
  CHECK(r.report["certificate"]["alpha"].get<double>() == doctest::Approx(3.0).epsilon(1e-12));

  o.target = "hi";
  r = run("combine", o, "comb_hi");
  CHECK(r.code == kExitOk);
  CHECK(r.report["epsilon_search"]["found"] == true);
  CHECK(r.report["epsilon_search"]["epsilon"].get<double>() > 0.0);

  o.certify = false;
  r = run("combine", o, "comb_plain");
  CHECK(r.code == kExitOk);
  CHECK(r.report["kind"] == "hierarchical");
}

TEST_CASE("report command") {
  CommandOptions o;
  o.target = "pendulum";
  auto r = run("report", o, "report");
  CHECK(r.code == kExitOk);
  CHECK(r.report["dimension_bound"]["k_star"] == 2);
  CHECK(r.report.contains("transverse"));
}

TEST_CASE("reports are byte-identical across runs") {
  CommandOptions o;
  o.config_path = write_config("f", kConfig).string();
  o.target = "p3";
  o.sampler = "rnd";
  run("certify", o, "det_a");
  run("certify", o, "det_b");
  const auto a = slurp(outdir("det_a") / "report.json");
  const auto b = slurp(outdir("det_b") / "report.json");
  CHECK(!a.empty());
  CHECK(a == b);
}
