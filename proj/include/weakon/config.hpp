#pragma once

#include "weakon/combine.hpp"
#include "weakon/flow.hpp"
#include "weakon/metrics.hpp"
#include "weakon/sampling.hpp"
#include "weakon/system.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace weakon {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A single JSON document:
//
//   {
//     "seed": 7, "out": "out",
//     "systems":  {"lin12": {"builtin": "linear", "matrix": [[-1,0],[0,-2]]},
//                  "pend":  {"builtin": "pendulum", "params": {"b": 0.3}},
//                  "duff":  {"dsl": "dx0 = x1; dx1 = -x0 - x0^3 - 0.2*x1", "domain": [[-3,3],[-3,3]]},
//                  "doc":   {"name": "doc", "params": {..}, "equations": ["dx0 = ..."]}},
//     "metrics":  {"storage01": {"kind": "storage", "base": "identity", "gamma": "0.1*sin(t)", "bound": 0.1}},
//     "samplers": {"fine": {"kind": "grid", "points": 201}},
//     "solvers":  {"long": {"method": "rk4", "step": 0.01, "T": 500}},
//     "storage":  {"g": {"gamma": "0.1*sin(t)", "bound": 0.1}},
//     "combine":  {"fb": {"kind": "feedback", "a": "lin1", "b": "lin2", "gain": 4, "G": [[5]]}}
//   }
//
// References that are not in the document fall back to builtins: systems
// pendulum, vanderpol, rotation; metric identity; sampler default; solver default.
class RunConfig {
 public:
  RunConfig();
  static RunConfig from_json(nlohmann::json doc);
  static RunConfig load(const std::string& path);

  const nlohmann::json& doc() const { return doc_; }
  const std::string& hash() const { return hash_; }
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }
  std::string out_dir() const;

  SystemModel system(const std::string& ref) const;
  MetricTransform metric(const std::string& ref, std::size_t n) const;
  // Default: 101 points per axis over the system's sample box (plus a
  // one-period window [0, 2 pi] with 33 samples for non-autonomous systems).
  Sampler sampler(const std::string& ref, const SystemModel& system) const;
  SolverConfig solver(const std::string& ref) const;
  StorageFunction storage(const std::string& ref, std::size_t n) const;
  CompositeSystem combine(const std::string& ref) const;
  const nlohmann::json& combine_entry(const std::string& ref) const;

  // Checks that every cross-reference in the document resolves.
  void validate() const;

 private:
  MetricTransform metric_from(const nlohmann::json& j, std::size_t n, int depth) const;
  const nlohmann::json* section(const char* name, const std::string& ref) const;

  nlohmann::json doc_;
  std::string hash_;
  std::uint64_t seed_ = 0;
};

// FNV-1a 64-bit, hex encoded.
std::string fnv1a_hex(const std::string& data);

SystemModel system_from_config(const nlohmann::json& j, const std::string& name);
Sampler sampler_from_json(const nlohmann::json& j, const SystemModel& system, std::uint64_t default_seed);
SolverConfig solver_from_json(const nlohmann::json& j);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace weakon
