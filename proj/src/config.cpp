#include "weakon/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace weakon {

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError("matrix must be a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols) throw ConfigError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

namespace {

dsl::ParamMap params_of(const nlohmann::json& j) {
  dsl::ParamMap p;
  if (j.contains("params"))
    for (const auto& [k, v] : j.at("params").items()) p[k] = v.get<double>();
  return p;
}

double param_or(const dsl::ParamMap& p, const char* name, double fallback) {
  auto it = p.find(name);
  return it == p.end() ? fallback : it->second;
}

SystemModel builtin_system(const std::string& name, const nlohmann::json& j) {
  const auto p = params_of(j);
  if (name == "pendulum") return builtin::pendulum(param_or(p, "b", 0.5));
  if (name == "vanderpol") return builtin::vanderpol(param_or(p, "mu", 1.0));
  if (name == "rotation") return builtin::rotation();
  if (name == "linear") {
    if (!j.contains("matrix")) throw ConfigError("builtin 'linear' needs a 'matrix'");
    return builtin::linear(matrix_from_json(j.at("matrix")));
  }
  throw ConfigError("unknown builtin system '" + name + "'");
}

std::optional<TimeWindow> window_from_json(const nlohmann::json& j) {
  if (!j.contains("time_window")) return std::nullopt;
  const auto& w = j.at("time_window");
  TimeWindow tw;
  if (w.is_array()) {
    tw.t0 = w.at(0).get<double>();
    tw.t1 = w.at(1).get<double>();
    tw.samples = w.size() > 2 ? w.at(2).get<std::size_t>() : 17;
  } else {
    tw.t0 = w.value("t0", 0.0);
    tw.t1 = w.value("t1", 0.0);
    tw.samples = w.value("samples", std::size_t{17});
  }
  return tw;
}

Coupling coupling_from_json(const nlohmann::json& g, const dsl::ParamMap& params) {
  if (g.is_number()) return Coupling::constant(Matrix::Constant(1, 1, g.get<double>()));
  if (!g.is_array() || g.empty()) throw ConfigError("coupling G must be a number or nested array");
  if (!g[0].is_array()) throw ConfigError("coupling G must be a nested array (rows)");
  bool any_string = false;
  for (const auto& row : g)
    for (const auto& e : row) any_string = any_string || e.is_string();
  if (!any_string) return Coupling::constant(matrix_from_json(g));
  const std::size_t rows = g.size();
  const std::size_t cols = g[0].size();
  std::vector<std::string> entries;
  for (const auto& row : g) {
    if (row.size() != cols) throw ConfigError("ragged coupling matrix");
    for (const auto& e : row) {
      if (e.is_string()) {
        entries.push_back(e.get<std::string>());
      } else {
        std::ostringstream os;
        os << std::setprecision(17) << e.get<double>();
        entries.push_back(os.str());
      }
    }
  }
  return Coupling::from_exprs(rows, cols, entries, params);
}

MetricOptions metric_options(const nlohmann::json& j) {
  MetricOptions o;
  o.condition_cap = j.value("condition_cap", o.condition_cap);
  o.gram_floor = j.value("gram_floor", o.gram_floor);
  o.fd_step = j.value("fd_step", o.fd_step);
  return o;
}

}  // namespace

SystemModel system_from_config(const nlohmann::json& j, const std::string& name) {
  if (j.is_string()) return system_from_dsl(name, j.get<std::string>());
  SystemModel s = [&]() -> SystemModel {
    if (j.contains("builtin")) return builtin_system(j.at("builtin").get<std::string>(), j).renamed(name);
    if (j.contains("dsl")) return system_from_dsl(name, j.at("dsl").get<std::string>(), params_of(j));
    if (j.contains("equations")) {
      nlohmann::json doc = j;
      if (!doc.contains("name")) doc["name"] = name;
      return system_from_json(doc);
    }
    throw ConfigError("system '" + name + "' needs one of 'builtin', 'dsl' or 'equations'");
  }();
  if (j.contains("domain") || j.contains("sample_box")) {
    Box domain = j.contains("domain") ? box_from_json(j.at("domain")) : s.domain();
    Box sample = j.contains("sample_box") ? box_from_json(j.at("sample_box"))
                                          : (j.contains("domain") ? domain : s.sample_box());
    s = s.with_boxes(domain, sample);
  }
  return s;
}

Sampler sampler_from_json(const nlohmann::json& j, const SystemModel& system, std::uint64_t default_seed) {
  const std::string kind = j.value("kind", std::string("grid"));
  Box box = j.contains("box") ? box_from_json(j.at("box")) : system.sample_box();
  if (box.dim() != system.dim()) throw ConfigError("sampler box dimension does not match system " + system.name());
  auto window = window_from_json(j);
  if (kind == "grid") return Sampler::grid(box, j.value("points", std::size_t{101}), window);
  if (kind == "random")
    return Sampler::random(box, j.value("count", std::size_t{100}), j.value("seed", default_seed), window);
  throw ConfigError("unknown sampler kind '" + kind + "'");
}

SolverConfig solver_from_json(const nlohmann::json& j) {
  SolverConfig c;
  const std::string method = j.value("method", std::string("rk4"));
  if (method == "rk4") c.method = SolverConfig::Method::Rk4;
  else if (method == "rkf45") c.method = SolverConfig::Method::Rkf45;
  else throw ConfigError("unknown solver method '" + method + "'");
  c.step = j.value("step", c.step);
  c.rtol = j.value("rtol", c.rtol);
  c.atol = j.value("atol", c.atol);
  c.horizon = j.value("T", c.horizon);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.record_every = j.value("record_every", c.record_every);
  c.eq_tol = j.value("eq_tol", c.eq_tol);
  c.drift_tol = j.value("drift_tol", c.drift_tol);
  c.validate();
  return c;
}

RunConfig::RunConfig() : doc_(nlohmann::json::object()), hash_(fnv1a_hex(doc_.dump())), seed_(20240601) {}

RunConfig RunConfig::from_json(nlohmann::json doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  c.doc_ = std::move(doc);
  c.hash_ = fnv1a_hex(c.doc_.dump());
  c.seed_ = c.doc_.value("seed", std::uint64_t{20240601});
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  auto c = from_json(std::move(doc));
  c.validate();
  return c;
}

std::string RunConfig::out_dir() const { return doc_.value("out", std::string("weakon_out")); }

const nlohmann::json* RunConfig::section(const char* name, const std::string& ref) const {
  if (!doc_.contains(name)) return nullptr;
  const auto& s = doc_.at(name);
  if (!s.is_object() || !s.contains(ref)) return nullptr;
  return &s.at(ref);
}

SystemModel RunConfig::system(const std::string& ref) const {
  if (const auto* j = section("systems", ref)) return system_from_config(*j, ref);
  if (ref == "pendulum" || ref == "vanderpol" || ref == "rotation") return builtin_system(ref, nlohmann::json::object());
  throw ConfigError("unresolved system reference '" + ref + "'");
}

MetricTransform RunConfig::metric_from(const nlohmann::json& j, std::size_t n, int depth) const {
  if (depth > 8) throw ConfigError("metric references nest too deeply");
  if (j.is_string()) {
    const auto ref = j.get<std::string>();
    if (const auto* m = section("metrics", ref)) return metric_from(*m, n, depth + 1).with_description(ref);
    if (ref == "identity") return MetricTransform::identity(n);
    throw ConfigError("unresolved metric reference '" + ref + "'");
  }
  const std::string kind = j.value("kind", std::string("identity"));
  const auto opts = metric_options(j);
  MetricTransform m = [&] {
    if (kind == "identity") return MetricTransform::identity(n, opts);
    if (kind == "constant") return MetricTransform::constant(matrix_from_json(j.at("theta")), opts);
    if (kind == "block_scaling") {
      std::vector<std::pair<std::size_t, double>> blocks;
      for (const auto& b : j.at("blocks")) blocks.emplace_back(b.at(0).get<std::size_t>(), b.at(1).get<double>());
      return MetricTransform::block_scaling(std::move(blocks), opts);
    }
    if (kind == "state_time") {
      std::vector<std::vector<dsl::ScalarExpr>> entries;
      for (const auto& row : j.at("theta")) {
        entries.emplace_back();
        for (const auto& e : row) {
          std::string src;
          if (e.is_string()) {
            src = e.get<std::string>();
          } else {
            std::ostringstream os;
            os << std::setprecision(17) << e.get<double>();
            src = os.str();
          }
          entries.back().push_back(dsl::parse_scalar(src, n, params_of(j)));
        }
      }
      return MetricTransform::from_exprs(std::move(entries), j.value("finite_difference", false), opts);
    }
    if (kind == "storage") {
      MetricTransform base = metric_from(j.value("base", nlohmann::json("identity")), n, depth + 1);
      std::optional<double> bound;
      if (j.contains("bound")) bound = j.at("bound").get<double>();
      const auto gsrc = j.at("gamma").get<std::string>();
      return augment_storage(base, StorageFunction::from_expr(dsl::parse_scalar(gsrc, n, params_of(j)), bound, gsrc));
    }
    throw ConfigError("unknown metric kind '" + kind + "'");
  }();
  if (m.dim() != n)
    throw ConfigError("metric dimension " + std::to_string(m.dim()) + " does not match system dimension " +
                      std::to_string(n));
  return m;
}

MetricTransform RunConfig::metric(const std::string& ref, std::size_t n) const {
  return metric_from(nlohmann::json(ref), n, 0);
}

Sampler RunConfig::sampler(const std::string& ref, const SystemModel& system) const {
  if (!ref.empty() && ref != "default") {
    const auto* j = section("samplers", ref);
    if (!j) throw ConfigError("unresolved sampler reference '" + ref + "'");
    return sampler_from_json(*j, system, seed_);
  }
  std::optional<TimeWindow> window;
  if (!system.autonomous()) window = TimeWindow{0.0, 2.0 * std::numbers::pi, 33};
  return Sampler::grid(system.sample_box(), 101, window);
}

SolverConfig RunConfig::solver(const std::string& ref) const {
  if (!ref.empty() && ref != "default") {
    const auto* j = section("solvers", ref);
    if (!j) throw ConfigError("unresolved solver reference '" + ref + "'");
    return solver_from_json(*j);
  }
  return SolverConfig{};
}

StorageFunction RunConfig::storage(const std::string& ref, std::size_t n) const {
  const auto* j = section("storage", ref);
  if (!j) throw ConfigError("unresolved storage reference '" + ref + "'");
  std::optional<double> bound;
  if (j->contains("bound")) bound = j->at("bound").get<double>();
  if (!bound) throw ConfigError("storage '" + ref + "' must declare a bound");
  const auto src = j->at("gamma").get<std::string>();
  return StorageFunction::from_expr(dsl::parse_scalar(src, n, params_of(*j)), bound, src);
}

const nlohmann::json& RunConfig::combine_entry(const std::string& ref) const {
  const auto* j = section("combine", ref);
  if (!j) throw ConfigError("unresolved combine reference '" + ref + "'");
  return *j;
}

CompositeSystem RunConfig::combine(const std::string& ref) const {
  const auto& j = combine_entry(ref);
  const std::string kind = j.at("kind").get<std::string>();
  const SystemModel a = system(j.at("a").get<std::string>());
  const SystemModel b = system(j.at("b").get<std::string>());
  CompositeSystem c = [&] {
    if (kind == "parallel") {
      std::optional<MetricTransform> ma;
      std::optional<MetricTransform> mb;
      if (j.contains("metric")) {
        ma = metric_from(j.at("metric"), a.dim(), 0);
        mb = metric_from(j.at("metric"), b.dim(), 0);
      } else if (j.contains("metric_a") || j.contains("metric_b")) {
        if (j.contains("metric_a")) ma = metric_from(j.at("metric_a"), a.dim(), 0);
        if (j.contains("metric_b")) mb = metric_from(j.at("metric_b"), b.dim(), 0);
      }
      return parallel(a, b, j.value("alpha", 1.0), j.value("beta", 1.0), ma, mb);
    }
    const Coupling g = coupling_from_json(j.at("G"), params_of(j));
    if (kind == "feedback") return feedback(a, b, g, j.value("gain", 1.0));
    if (kind == "hierarchical") return hierarchical(a, b, g);
    throw ConfigError("unknown combine kind '" + kind + "'");
  }();
  c.model = c.model.renamed(ref);
  return c;
}

void RunConfig::validate() const {
  if (doc_.contains("systems"))
    for (const auto& [name, _] : doc_.at("systems").items()) (void)system(name);
  if (doc_.contains("combine"))
    for (const auto& [name, _] : doc_.at("combine").items()) (void)combine(name);
  if (doc_.contains("solvers"))
    for (const auto& [name, _] : doc_.at("solvers").items()) (void)solver(name);
  bool random_sampler = false;
  if (doc_.contains("samplers"))
    for (const auto& [name, s] : doc_.at("samplers").items())
      random_sampler = random_sampler || s.value("kind", std::string("grid")) == "random";
  if (random_sampler && !doc_.contains("seed")) throw ConfigError("config uses a random sampler but has no 'seed'");
}

}  // namespace weakon
