#include "weakon/commands.hpp"

#include "weakon/certify.hpp"
#include "weakon/flow.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#ifndef WEAKON_VERSION
#define WEAKON_VERSION "0.0.0"
#endif

namespace weakon {

const char* tool_version() { return WEAKON_VERSION; }

namespace {

struct Context {
  RunConfig config;
  std::filesystem::path out;
};

Context make_context(const CommandOptions& o) {
  Context c{o.config_path.empty() ? RunConfig() : RunConfig::load(o.config_path), {}};
  if (o.seed) c.config.set_seed(*o.seed);
  c.out = o.out_dir.empty() ? c.config.out_dir() : o.out_dir;
  std::filesystem::create_directories(c.out);
  return c;
}

void write_report(const Context& c, const std::string& command, nlohmann::json body) {
  body["tool"] = "weakon";
  body["version"] = tool_version();
  body["command"] = command;
  body["config_hash"] = c.config.hash();
  body["seed"] = c.config.seed();
  std::ofstream f(c.out / "report.json");
  if (!f) throw std::runtime_error("cannot write " + (c.out / "report.json").string());
  f << body.dump(2) << '\n';
}

SolverConfig solver_for(const Context& c, const CommandOptions& o) {
  SolverConfig cfg = c.config.solver(o.solver);
  if (o.horizon) cfg.horizon = *o.horizon;
  if (o.step) cfg.step = *o.step;
  if (o.method == "rk4") cfg.method = SolverConfig::Method::Rk4;
  else if (o.method == "rkf45") cfg.method = SolverConfig::Method::Rkf45;
  else if (!o.method.empty()) throw ConfigError("unknown method '" + o.method + "'");
  cfg.validate();
  return cfg;
}

Vector start_point(const CommandOptions& o, const SystemModel& s) {
  if (o.x0.empty()) throw ConfigError("--x0 is required");
  if (o.x0.size() != s.dim())
    throw ConfigError("--x0 has " + std::to_string(o.x0.size()) + " entries, system " + s.name() + " has dimension " +
                      std::to_string(s.dim()));
  return Eigen::Map<const Vector>(o.x0.data(), static_cast<Eigen::Index>(o.x0.size()));
}

std::optional<StorageFunction> storage_for(const Context& c, const CommandOptions& o, std::size_t n) {
  if (o.storage.empty()) return std::nullopt;
  return c.config.storage(o.storage, n);
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

int cmd_certify(const CommandOptions& o, std::ostream& out) {
  auto c = make_context(o);
  const auto sys = c.config.system(o.target);
  const auto metric = c.config.metric(o.metric, sys.dim());
  const auto sampler = c.config.sampler(o.sampler, sys);
  const auto storage = storage_for(c, o, sys.dim());
  const auto cert = o.transverse ? certify_transverse(sys, metric, sampler)
                                 : certify_weak_contraction(sys, metric, o.k, sampler, storage ? &*storage : nullptr);
  write_report(c, "certify", cert.to_json());
  out << sys.name() << " " << cert.mode << " k=" << cert.k << " alpha=" << cert.alpha
      << (cert.holds ? " holds" : " fails") << " (" << cert.samples_evaluated << " samples)\n";
  return cert.holds ? kExitOk : kExitFails;
}

int cmd_simulate(const CommandOptions& o, std::ostream& out) {
  auto c = make_context(o);
  const auto sys = c.config.system(o.target);
  const auto cfg = solver_for(c, o);
  const Vector x0 = start_point(o, sys);
  const auto traj = integrate(sys, x0, 0.0, cfg);
  write_trajectory_csv((c.out / "trajectory.csv").string(), traj);
  nlohmann::json r;
  r["system"] = sys.name();
  r["x0"] = vec_json(x0);
  r["horizon"] = cfg.horizon;
  r["t_final"] = traj.times.back();
  r["terminal"] = to_string(traj.terminal);
  r["final_state"] = vec_json(traj.final_state());
  r["final_speed"] = traj.final_speed;
  r["drift"] = traj.drift;
  r["records"] = traj.times.size();
  write_report(c, "simulate", r);
  out << sys.name() << " terminal=" << to_string(traj.terminal) << " t=" << traj.times.back() << "\n";
  return kExitOk;
}

double tail_mean_divergence(const SystemModel& sys, const Trajectory& traj, double t_start) {
  double acc = 0.0;
  double span = 0.0;
  double prev_t = 0.0;
  double prev_v = 0.0;
  bool have = false;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    if (traj.times[i] < t_start) continue;
    const double v = sys.jacobian(traj.states[i], traj.times[i]).trace();
    if (have) {
      acc += 0.5 * (v + prev_v) * (traj.times[i] - prev_t);
      span += traj.times[i] - prev_t;
    }
    prev_t = traj.times[i];
    prev_v = v;
    have = true;
  }
  return span > 0.0 ? acc / span : prev_v;
}

int cmd_volumes(const CommandOptions& o, std::ostream& out) {
  auto c = make_context(o);
  const auto sys = c.config.system(o.target);
  const auto metric = c.config.metric(o.metric, sys.dim());
  const auto cfg = solver_for(c, o);
  const Vector x0 = start_point(o, sys);
  if (o.order < 1 || o.order > sys.dim()) throw ConfigError("--order must be in [1, n]");
  const Matrix frame0 = Matrix::Identity(static_cast<Eigen::Index>(sys.dim()), static_cast<Eigen::Index>(o.order));
  VariationalOptions vopts;
  vopts.reorth_interval = o.reorth_interval;
  auto rec = variational_flow(sys, metric, x0, frame0, cfg, vopts);
  const auto cert = certify_weak_contraction(sys, metric, o.order, c.config.sampler(o.sampler, sys));
  rec.attach_bound(cert);
  write_volume_csv((c.out / "volume.csv").string(), rec);

  nlohmann::json r = rec.to_json();
  r["system"] = sys.name();
  r["metric"] = metric.description();
  r["x0"] = vec_json(x0);
  r["certificate"] = cert.to_json();
  if (o.order == sys.dim()) {
    const auto traj = integrate(sys, x0, 0.0, cfg);
    r["tail_mean_divergence"] = tail_mean_divergence(sys, traj, rec.tail_start);
  }
  const bool pass = rec.bound_satisfied.value_or(false);
  r["verdict"] = pass ? "pass" : "fail";
  write_report(c, "volumes", r);
  out << sys.name() << " order=" << o.order << " fitted=" << rec.fitted_rate << " bound=" << *rec.bound
      << " verdict=" << (pass ? "pass" : "fail") << "\n";
  return pass ? kExitOk : kExitFails;
}

int cmd_lyapunov(const CommandOptions& o, std::ostream& out) {
  auto c = make_context(o);
  const auto sys = c.config.system(o.target);
  const auto cfg = solver_for(c, o);
  const Vector x0 = start_point(o, sys);
  const std::size_t order = o.order == 0 ? sys.dim() : std::min(o.order, sys.dim());
  LyapunovOptions lopts;
  lopts.reorth_interval = o.reorth_interval;
  lopts.transient = o.transient;
  const auto ly = lyapunov_spectrum(sys, x0, order, cfg, lopts);
  nlohmann::json r = ly.to_json();
  r["system"] = sys.name();
  r["x0"] = vec_json(x0);
  std::vector<double> partial;
  double acc = 0.0;
  for (double e : ly.exponents) partial.push_back(acc += e);
  r["partial_sums"] = partial;
  write_report(c, "lyapunov", r);
  out << sys.name() << " exponents:";
  for (double e : ly.exponents) out << " " << e;
  out << " sum=" << ly.sum() << "\n";
  return kExitOk;
}

Sampler composite_sampler(const Context& c, const std::string& ref, const SystemModel& model) {
  if (!ref.empty()) return c.config.sampler(ref, model);
  const double n = static_cast<double>(model.dim());
  const auto ppa = static_cast<std::size_t>(std::max(3.0, std::floor(std::pow(2.0e5, 1.0 / n))));
  std::optional<TimeWindow> window;
  if (!model.autonomous()) window = TimeWindow{0.0, 2.0 * 3.14159265358979323846, 17};
  return Sampler::grid(model.sample_box(), ppa, window);
}

int cmd_combine(const CommandOptions& o, std::ostream& out) {
  auto c = make_context(o);
  const auto comp = c.config.combine(o.target);
  const auto& entry = c.config.combine_entry(o.target);
  const std::size_t k = entry.value("k", o.k);
  std::string sampler_ref = o.sampler;
  if (sampler_ref.empty() && entry.contains("sampler")) sampler_ref = entry.at("sampler").get<std::string>();
  nlohmann::json r;
  r["combine"] = o.target;
  r["kind"] = to_string(comp.kind);
  r["a"] = comp.a.name();
  r["b"] = comp.b.name();
  r["dim"] = comp.model.dim();
  if (comp.metric) r["metric"] = comp.metric->description();
  if (comp.kind == InterconnectionKind::Feedback) r["gain"] = comp.gain;
  if (comp.kind == InterconnectionKind::Parallel) {
    r["alpha_weight"] = comp.alpha;
    r["beta_weight"] = comp.beta;
  }
  if (!o.certify) {
    write_report(c, "combine", r);
    out << o.target << " " << to_string(comp.kind) << " dim=" << comp.model.dim() << "\n";
    return kExitOk;
  }
  const auto sampler = composite_sampler(c, sampler_ref, comp.model);
  r["k"] = k;
  bool holds = false;
  if (comp.kind == InterconnectionKind::Hierarchical) {
    const auto res = epsilon_search(comp, k, sampler);
    r["epsilon_search"] = res.to_json();
    holds = res.found;
    out << o.target << " hierarchical";
    if (res.found) out << " epsilon=" << res.epsilon << " alpha=" << res.certificate->alpha;
    out << (holds ? " holds" : " fails") << "\n";
  } else {
    if (comp.kind == InterconnectionKind::Feedback) {
      const auto cond = check_feedback_condition(comp.a, comp.b, project_sampler(sampler, 0, comp.dim_a()),
                                                 project_sampler(sampler, comp.dim_a(), comp.dim_b()));
      r["feedback_condition"] = {{"holds", cond.holds},
                                 {"margin", cond.margin},
                                 {"refined", cond.refined},
                                 {"refined_margin", cond.refined_margin},
                                 {"sup_lambda1_a", cond.sup_lambda1_a},
                                 {"sup_lambda1_b", cond.sup_lambda1_b}};
    }
    const auto cert = certify_weak_contraction(comp.model, *comp.metric, k, sampler);
    r["certificate"] = cert.to_json();
    holds = cert.holds;
    out << o.target << " " << to_string(comp.kind) << " metric=" << comp.metric->description() << " k=" << k
        << " alpha=" << cert.alpha << (holds ? " holds" : " fails") << "\n";
  }
  r["holds"] = holds;
  write_report(c, "combine", r);
  return holds ? kExitOk : kExitFails;
}

int cmd_report(const CommandOptions& o, std::ostream& out) {
  auto c = make_context(o);
  const auto sys = c.config.system(o.target);
  const auto metric = c.config.metric(o.metric, sys.dim());
  const auto sampler = c.config.sampler(o.sampler, sys);
  const auto storage = storage_for(c, o, sys.dim());
  const auto dim = dimension_bound(sys, metric, sampler, storage ? &*storage : nullptr);
  nlohmann::json r;
  r["system"] = sys.name();
  r["metric"] = metric.description();
  r["dimension_bound"] = dim.to_json();
  if (sys.dim() >= 2) r["transverse"] = certify_transverse(sys, metric, sampler).to_json();
  write_report(c, "report", r);
  out << sys.name() << ": " << dim.interpretation << "\n";
  return kExitOk;
}

}  // namespace

int run_command(const std::string& command, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (command == "certify") return cmd_certify(opts, out);
    if (command == "simulate") return cmd_simulate(opts, out);
    if (command == "volumes") return cmd_volumes(opts, out);
    if (command == "lyapunov") return cmd_lyapunov(opts, out);
    if (command == "combine") return cmd_combine(opts, out);
    if (command == "report") return cmd_report(opts, out);
    err << "error: unknown command '" << command << "'\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitError;
}

}  // namespace weakon
