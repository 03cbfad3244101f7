#pragma once

#include "weakon/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace weakon {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFails = 2;
inline constexpr int kExitError = 1;

struct CommandOptions {
  std::string config_path;  // empty: builtins only
  std::string out_dir;      // empty: config "out"
  std::optional<std::uint64_t> seed;
  std::string target;  // system ref, or combine ref for `combine`
  std::string metric = "identity";
  std::string sampler;
  std::string solver;
  std::string storage;
  std::size_t k = 2;
  std::size_t order = 2;
  std::vector<double> x0;
  std::optional<double> horizon;
  std::optional<double> step;
  std::string method;
  double transient = 0.0;
  std::size_t reorth_interval = 10;
  bool certify = false;
  bool transverse = false;
};

const char* tool_version();

// Runs one of certify, simulate, volumes, lyapunov, combine, report. Writes
// report.json (and CSVs) under the output directory and a summary to `out`.
// Never throws; errors are reported on `err` with exit code 1.
int run_command(const std::string& command, const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace weakon
