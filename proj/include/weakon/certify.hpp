#pragma once

#include "weakon/combine.hpp"
#include "weakon/metrics.hpp"
#include "weakon/sampling.hpp"
#include "weakon/spectra.hpp"
#include "weakon/system.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace weakon {

struct CertifyOptions {
  double certified_floor = 1e-9;  // holds <=> alpha > floor
  SpectraConfig spectra;
};

struct WorstSample {
  Vector x;
  double t = 0.0;
  double value = 0.0;
  std::size_t index = 0;
};

// Sampled evidence (not a proof) that sup S_k(F_s) (+ k gamma-dot) < 0 over
// the sample set.
struct ContractionCertificate {
  std::string mode;  // "weak_contraction" or "transverse"
  std::size_t k = 0;
  double alpha = 0.0;
  bool holds = false;
  WorstSample worst;
  std::size_t samples_evaluated = 0;
  std::string system;
  std::string metric;
  std::optional<std::string> storage;
  std::optional<double> storage_bound;
  nlohmann::json sampler_meta;
  std::vector<std::string> assumptions;

  nlohmann::json to_json() const;
};

// Value certified at one sample: S_k(F_s(x,t)) + k gamma-dot(x,t).
double certificate_value(const SystemModel& system, const MetricTransform& metric, std::size_t k, const Vector& x,
                         double t, const StorageFunction* storage = nullptr, const CertifyOptions& opts = {});

ContractionCertificate certify_weak_contraction(const SystemModel& system, const MetricTransform& metric,
                                                std::size_t k, const Sampler& sampler,
                                                const StorageFunction* storage = nullptr,
                                                const CertifyOptions& opts = {});

// Margin -sup lambda_2(F_s). Needs n >= 2.
ContractionCertificate certify_transverse(const SystemModel& system, const MetricTransform& metric,
                                          const Sampler& sampler, const CertifyOptions& opts = {});

struct EpsilonSearchResult {
  bool found = false;
  double epsilon = 0.0;  // largest accepted 2^-j
  std::optional<ContractionCertificate> certificate;
  FeedbackCondition hypothesis;  // lambda_1^a + lambda_1^b < 0 on the projected samples
  double best_alpha = 0.0;       // best margin seen over all tried epsilons
  double best_epsilon = 0.0;
  int tried = 0;

  nlohmann::json to_json() const;
};

// Tries eps = 1, 1/2, ..., 2^-max_halvings and returns the first (largest)
// whose metric diag(eps I_n, I_m) certifies the composite at order k.
// Nothing is tried when lambda_1^a + lambda_1^b < 0 fails on the projected
// samples; halving stops once eps^2 falls below the metric's Gram floor.
EpsilonSearchResult epsilon_search(const CompositeSystem& composite, std::size_t k, const Sampler& sampler,
                                   const CertifyOptions& opts = {}, int max_halvings = 40);

struct DimensionBoundReport {
  std::optional<std::size_t> k_star;
  std::vector<ContractionCertificate> per_k;  // k = 1..n
  std::string interpretation;

  nlohmann::json to_json() const;
};

DimensionBoundReport dimension_bound(const SystemModel& system, const MetricTransform& metric, const Sampler& sampler,
                                     const StorageFunction* storage = nullptr, const CertifyOptions& opts = {});

// States of `sampler` restricted to coordinates [offset, offset + dim).
Sampler project_sampler(const Sampler& sampler, std::size_t offset, std::size_t dim);

}  // namespace weakon
