#include "weakon/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"weakon: eigenvalue-sum contraction certificates for dynamical systems"};
  app.set_version_flag("--version", weakon::tool_version());
  app.require_subcommand(1);

  weakon::CommandOptions o;
  std::uint64_t seed = 0;
  std::string command;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "JSON config")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out_dir, "output directory");
    sub->add_option("--seed", seed, "override the config seed");
  };
  auto flow_opts = [&](CLI::App* sub) {
    sub->add_option("--x0", o.x0, "initial state, comma separated")->delimiter(',')->allow_extra_args(false);
    sub->add_option("--T", o.horizon, "horizon");
    sub->add_option("--step", o.step, "step size");
    sub->add_option("--method", o.method, "rk4 or rkf45");
    sub->add_option("--solver", o.solver, "solver ref");
  };

  auto* certify = app.add_subcommand("certify", "sampled S_k certificate");
  certify->add_option("system", o.target)->required();
  certify->add_option("metric", o.metric);
  certify->add_option("--k", o.k);
  certify->add_option("--storage", o.storage, "storage function ref");
  certify->add_option("--sampler", o.sampler);
  certify->add_flag("--transverse", o.transverse, "certify lambda_2 < 0 instead");
  common(certify);

  auto* simulate = app.add_subcommand("simulate", "integrate one trajectory");
  simulate->add_option("system", o.target)->required();
  flow_opts(simulate);
  common(simulate);

  auto* volumes = app.add_subcommand("volumes", "i-volume decay along a trajectory");
  volumes->add_option("system", o.target)->required();
  volumes->add_option("metric", o.metric);
  volumes->add_option("--order", o.order);
  volumes->add_option("--sampler", o.sampler);
  volumes->add_option("--reorth", o.reorth_interval);
  flow_opts(volumes);
  common(volumes);

  auto* lyapunov = app.add_subcommand("lyapunov", "Lyapunov spectrum by QR");
  lyapunov->add_option("system", o.target)->required();
  lyapunov->add_option("--order", o.order);
  lyapunov->add_option("--transient", o.transient);
  lyapunov->add_option("--reorth", o.reorth_interval);
  flow_opts(lyapunov);
  common(lyapunov);

  auto* combine = app.add_subcommand("combine", "build and certify an interconnection");
  combine->add_option("combine", o.target)->required();
  combine->add_flag("--certify", o.certify);
  combine->add_option("--k", o.k);
  combine->add_option("--sampler", o.sampler);
  common(combine);

  auto* report = app.add_subcommand("report", "dimension bound and transverse margin");
  report->add_option("system", o.target)->required();
  report->add_option("metric", o.metric);
  report->add_option("--storage", o.storage);
  report->add_option("--sampler", o.sampler);
  common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : weakon::kExitError;
  }
  for (auto* sub : app.get_subcommands()) command = sub->get_name();
  for (auto* sub : app.get_subcommands())
    if (sub->count("--seed")) o.seed = seed;
  if (command == "lyapunov" && !lyapunov->count("--order")) o.order = 0;
  return weakon::run_command(command, o, std::cout, std::cerr);
}
