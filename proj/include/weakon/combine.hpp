#pragma once

#include "weakon/dsl.hpp"
#include "weakon/metrics.hpp"
#include "weakon/sampling.hpp"
#include "weakon/system.hpp"

#include <optional>
#include <string>
#include <vector>

namespace weakon {

// Coupling block G(t) of shape rows x cols: constant, or entries given as DSL
// expressions of t. State-dependent entries are rejected.
class Coupling {
 public:
  static Coupling constant(Matrix g);
  static Coupling from_exprs(std::size_t rows, std::size_t cols, const std::vector<std::string>& entries,
                             const dsl::ParamMap& params = {});

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool time_varying() const { return !exprs_.empty(); }

  Matrix eval(double t) const;
  // Entries as duals of t (width w, time slot w - 1).
  std::vector<Dual> eval_dual(const Dual& t) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Matrix constant_;
  std::vector<dsl::ScalarExpr> exprs_;  // row-major
};

enum class InterconnectionKind { Parallel, Feedback, Hierarchical };
const char* to_string(InterconnectionKind kind);

struct CompositeSystem {
  InterconnectionKind kind = InterconnectionKind::Parallel;
  SystemModel model;
  SystemModel a;
  SystemModel b;
  double alpha = 1.0;  // parallel weights
  double beta = 1.0;
  double gain = 1.0;   // feedback loop gain k
  std::optional<Coupling> coupling;
  // Parallel: the shared subsystem metric. Feedback: diag(I_n, sqrt(k) I_m).
  // Hierarchical: none until an epsilon is chosen.
  std::optional<MetricTransform> metric;

  std::size_t dim_a() const { return a.dim(); }
  std::size_t dim_b() const { return b.dim(); }

  // Hierarchical scaling family diag(eps I_n, I_m); the symmetric part of the
  // transformed Jacobian has off-diagonal blocks (eps/2) G.
  MetricTransform epsilon_metric(double eps) const;

  // Jacobian assembled from subsystem Jacobians and G:
  //   parallel      alpha J^a + beta J^b
  //   feedback      [[J^a, k G], [-G^T, J^b]]
  //   hierarchical  [[J^a, G], [0, J^b]]
  Matrix block_jacobian(const Vector& x, double t) const;
};

// alpha f_a + beta f_b. Both subsystems must share the same metric when one is
// declared; the composite domain is the intersection of the subsystem boxes.
CompositeSystem parallel(const SystemModel& fa, const SystemModel& fb, double alpha, double beta,
                         const std::optional<MetricTransform>& metric_a = std::nullopt,
                         const std::optional<MetricTransform>& metric_b = std::nullopt);

// x_a' = f_a(x_a, t) + k G(t) x_b,  x_b' = f_b(x_b, t) - G(t)^T x_a.
CompositeSystem feedback(const SystemModel& fa, const SystemModel& fb, const Coupling& g, double k);

// x_a' = f_a(x_a, t) + G(t) x_b,  x_b' = f_b(x_b, t).
CompositeSystem hierarchical(const SystemModel& fa, const SystemModel& fb, const Coupling& g);

struct FeedbackCondition {
  bool holds = false;
  double margin = 0.0;          // -sup (lambda_1^a + lambda_1^b)
  bool refined = false;         // sum of the two largest of {l1a, l2a, l1b, l2b} < 0 at every paired sample
  double refined_margin = 0.0;  // -sup of that sum
  double sup_lambda1_a = 0.0;
  double sup_lambda1_b = 0.0;
  std::size_t samples_a = 0;
  std::size_t samples_b = 0;
};

// Eigenvalues are of the symmetric part of each subsystem's generalized
// Jacobian (identity metric unless given). Every sample of a is paired with
// every sample of b, which makes the plain test the uniform one.
FeedbackCondition check_feedback_condition(const SystemModel& fa, const SystemModel& fb, const Sampler& sampler_a,
                                           const Sampler& sampler_b,
                                           const std::optional<MetricTransform>& metric_a = std::nullopt,
                                           const std::optional<MetricTransform>& metric_b = std::nullopt);

bool same_metric(const MetricTransform& a, const MetricTransform& b);

}  // namespace weakon
