#include "weakon/certify.hpp"

#include "weakon/parallel.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace weakon {

namespace {

nlohmann::json vec_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

void check_inputs(const SystemModel& system, const MetricTransform& metric, const Sampler& sampler) {
  if (metric.dim() != system.dim())
    throw std::invalid_argument("metric dimension " + std::to_string(metric.dim()) + " does not match system '" +
                                system.name() + "' (" + std::to_string(system.dim()) + ")");
  if (sampler.dim() != system.dim()) throw std::invalid_argument("sampler dimension does not match system");
  if (sampler.total() == 0) throw std::invalid_argument("sampler is empty");
  if (!system.autonomous() && !sampler.window())
    throw std::invalid_argument("non-autonomous system '" + system.name() + "' needs an explicit time window");
}

std::vector<std::string> assumptions_for(const SystemModel& system) {
  std::vector<std::string> a{"sampled evidence only: the condition is checked at finitely many points",
                             "domain assumed strictly forward-invariant (not verified)"};
  if (!system.autonomous())
    a.emplace_back("finite time window under-approximates the condition for all t >= 0");
  return a;
}

template <class ValueFn>
ContractionCertificate run(const SystemModel& system, const MetricTransform& metric, const Sampler& sampler,
                           const CertifyOptions& opts, ValueFn value) {
  std::vector<double> values(sampler.total());
  parallel_for(sampler.total(), [&](std::size_t idx) {
    const auto [x, t] = sampler.sample(idx);
    values[idx] = value(x, t);
  });
  // sequential reduction in index order; first maximum wins
  std::size_t arg = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[arg]) arg = i;

  ContractionCertificate c;
  const auto [wx, wt] = sampler.sample(arg);
  c.worst = {wx, wt, values[arg], arg};
  c.alpha = -values[arg];
  c.holds = c.alpha > opts.certified_floor;
  c.samples_evaluated = values.size();
  c.system = system.name();
  c.metric = metric.description();
  c.sampler_meta = sampler.meta();
  c.assumptions = assumptions_for(system);
  return c;
}

}  // namespace

nlohmann::json ContractionCertificate::to_json() const {
  nlohmann::json j;
  j["system"] = system;
  j["metric"] = metric;
  j["mode"] = mode;
  j["k"] = k;
  j["alpha"] = alpha;
  j["holds"] = holds;
  j["worst_sample"] = {{"x", vec_json(worst.x)}, {"t", worst.t}, {"value", worst.value}, {"index", worst.index}};
  j["samples"] = samples_evaluated;
  j["grid_meta"] = sampler_meta;
  if (storage) {
    j["storage_meta"] = {{"gamma", *storage}};
    if (storage_bound) j["storage_meta"]["bound"] = *storage_bound;
  } else {
    j["storage_meta"] = nullptr;
  }
  j["evidence"] = "sampled";
  j["assumptions"] = assumptions;
  return j;
}

double certificate_value(const SystemModel& system, const MetricTransform& metric, std::size_t k, const Vector& x,
                         double t, const StorageFunction* storage, const CertifyOptions& opts) {
  const auto [fx, jac] = system.f_and_jacobian(x, t);
  const auto g = generalized_jacobian(metric, x, t, fx, jac);
  double v = spectrum(g.fs, opts.spectra).top_sum(k);
  if (storage) {
    const double gamma = storage->gamma(x, t);
    if (!(std::abs(gamma) <= *storage->bound)) {
      std::ostringstream os;
      os << "storage function |gamma| = " << std::abs(gamma) << " exceeds declared bound " << *storage->bound;
      throw MetricError(os.str());
    }
    v += static_cast<double>(k) * storage->gamma_dot(x, t, fx);
  }
  if (!std::isfinite(v)) throw std::runtime_error("non-finite certificate value");
  return v;
}

ContractionCertificate certify_weak_contraction(const SystemModel& system, const MetricTransform& metric,
                                                std::size_t k, const Sampler& sampler, const StorageFunction* storage,
                                                const CertifyOptions& opts) {
  check_inputs(system, metric, sampler);
  if (k < 1 || k > system.dim())
    throw std::invalid_argument("order k=" + std::to_string(k) + " out of range [1, " + std::to_string(system.dim()) +
                                "]");
  if (storage && !storage->bound) throw std::invalid_argument("storage function must declare a bound");
  auto c = run(system, metric, sampler, opts, [&](const Vector& x, double t) {
    return certificate_value(system, metric, k, x, t, storage, opts);
  });
  c.mode = "weak_contraction";
  c.k = k;
  if (storage) {
    c.storage = storage->description;
    c.storage_bound = storage->bound;
  }
  return c;
}

ContractionCertificate certify_transverse(const SystemModel& system, const MetricTransform& metric,
                                          const Sampler& sampler, const CertifyOptions& opts) {
  check_inputs(system, metric, sampler);
  if (system.dim() < 2) throw std::invalid_argument("transverse check needs n >= 2");
  auto c = run(system, metric, sampler, opts, [&](const Vector& x, double t) {
    return spectrum(generalized_jacobian(system, metric, x, t).fs, opts.spectra).lambda(1);
  });
  c.mode = "transverse";
  c.k = 2;
  return c;
}

Sampler project_sampler(const Sampler& sampler, std::size_t offset, std::size_t dim) {
  if (offset + dim > sampler.dim()) throw std::invalid_argument("projection out of range");
  if (sampler.kind() == Sampler::Kind::Grid) {
    Box sub;
    sub.bounds.assign(sampler.box().bounds.begin() + static_cast<std::ptrdiff_t>(offset),
                      sampler.box().bounds.begin() + static_cast<std::ptrdiff_t>(offset + dim));
    return Sampler::grid(sub, sampler.points_per_axis(), sampler.window());
  }
  std::vector<Vector> pts;
  pts.reserve(sampler.state_count());
  for (std::size_t i = 0; i < sampler.state_count(); ++i)
    pts.push_back(sampler.state(i).segment(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(dim)));
  return Sampler::points(std::move(pts), sampler.window());
}

nlohmann::json EpsilonSearchResult::to_json() const {
  nlohmann::json j;
  j["found"] = found;
  j["epsilon"] = found ? nlohmann::json(epsilon) : nlohmann::json(nullptr);
  j["tried"] = tried;
  j["best_alpha"] = best_alpha;
  j["best_epsilon"] = best_epsilon;
  j["hypothesis"] = {{"holds", hypothesis.holds},
                     {"margin", hypothesis.margin},
                     {"sup_lambda1_a", hypothesis.sup_lambda1_a},
                     {"sup_lambda1_b", hypothesis.sup_lambda1_b}};
  j["certificate"] = certificate ? certificate->to_json() : nlohmann::json(nullptr);
  return j;
}

EpsilonSearchResult epsilon_search(const CompositeSystem& composite, std::size_t k, const Sampler& sampler,
                                   const CertifyOptions& opts, int max_halvings) {
  if (composite.kind != InterconnectionKind::Hierarchical)
    throw std::invalid_argument("epsilon_search needs a hierarchical composite");
  EpsilonSearchResult r;
  r.hypothesis = check_feedback_condition(composite.a, composite.b, project_sampler(sampler, 0, composite.dim_a()),
                                          project_sampler(sampler, composite.dim_a(), composite.dim_b()));
  r.best_alpha = -std::numeric_limits<double>::infinity();
  if (!r.hypothesis.holds) return r;
  const double floor = composite.epsilon_metric(1.0).options().gram_floor;
  double eps = 1.0;
  for (int j = 0; j <= max_halvings && eps * eps >= floor; ++j, eps *= 0.5) {
    auto metric = composite.epsilon_metric(eps);
    auto cert = certify_weak_contraction(composite.model, metric, k, sampler, nullptr, opts);
    ++r.tried;
    if (cert.alpha > r.best_alpha) {
      r.best_alpha = cert.alpha;
      r.best_epsilon = eps;
    }
    if (cert.holds) {
      r.found = true;
      r.epsilon = eps;
      r.certificate = std::move(cert);
      break;
    }
  }
  return r;
}

nlohmann::json DimensionBoundReport::to_json() const {
  nlohmann::json j;
  j["k_star"] = k_star ? nlohmann::json(*k_star) : nlohmann::json("none");
  j["interpretation"] = interpretation;
  nlohmann::json margins = nlohmann::json::array();
  for (const auto& c : per_k) margins.push_back({{"k", c.k}, {"alpha", c.alpha}, {"holds", c.holds}});
  j["per_k"] = margins;
  return j;
}

DimensionBoundReport dimension_bound(const SystemModel& system, const MetricTransform& metric, const Sampler& sampler,
                                     const StorageFunction* storage, const CertifyOptions& opts) {
  DimensionBoundReport r;
  for (std::size_t k = 1; k <= system.dim(); ++k) {
    r.per_k.push_back(certify_weak_contraction(system, metric, k, sampler, storage, opts));
    if (!r.k_star && r.per_k.back().holds) r.k_star = k;
  }
  if (!r.k_star) {
    r.interpretation = "no order certified up to n";
  } else if (*r.k_star == 1) {
    r.interpretation = "contracting (in this metric): unique equilibrium";
  } else if (*r.k_star == 2) {
    r.interpretation =
        "weakly contracting: all bounded trajectories converge to equilibria, attractor dimension zero";
  } else {
    r.interpretation = "attractor Hausdorff dimension < " + std::to_string(*r.k_star);
  }
  return r;
}

}  // namespace weakon
