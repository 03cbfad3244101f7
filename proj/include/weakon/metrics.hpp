#pragma once

#include "weakon/dsl.hpp"
#include "weakon/linalg.hpp"
#include "weakon/system.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace weakon {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bounded scalar gamma(x, t) used to rescale a metric by e^gamma.
struct StorageFunction {
  std::function<double(const Vector& x, double t)> gamma;
  // d gamma/dt + grad_x gamma . xdot
  std::function<double(const Vector& x, double t, const Vector& xdot)> gamma_dot;
  std::optional<double> bound;
  std::string description;

  static StorageFunction from_expr(const dsl::ScalarExpr& expr, std::optional<double> bound, std::string description);
  static StorageFunction zero(std::size_t n);
};

struct MetricOptions {
  double condition_cap = 1e8;
  double gram_floor = 1e-12;  // minimum eigenvalue of Theta^T Theta
  double fd_step = 1e-5;      // relative central-difference step for Theta-dot
};

// Theta(x, t); the Riemannian metric is Theta^T Theta.
class MetricTransform {
 public:
  enum class Kind { Identity, Constant, BlockScaling, StateTime, Storage };

  using MatrixFn = std::function<Matrix(const Vector& x, double t)>;
  using PartialFn = std::function<Matrix(const Vector& x, double t, std::size_t axis)>;

  static MetricTransform identity(std::size_t n, MetricOptions opts = {});
  static MetricTransform constant(Matrix theta, MetricOptions opts = {});
  // (dimension, scale) pairs laid out along the diagonal.
  static MetricTransform block_scaling(std::vector<std::pair<std::size_t, double>> blocks, MetricOptions opts = {});
  // Suppliers give dTheta/dt and dTheta/dx_axis.
  static MetricTransform state_time(std::size_t n, MatrixFn theta, MatrixFn dtheta_dt, PartialFn dtheta_dx,
                                    std::string description = "state_time", MetricOptions opts = {});
  // Theta-dot by central differences of `theta`.
  static MetricTransform state_time_fd(std::size_t n, MatrixFn theta, std::string description = "state_time_fd",
                                       MetricOptions opts = {});
  // Entries given as scalar DSL expressions over (x, t); partials come from
  // dual evaluation unless `finite_difference` is set.
  static MetricTransform from_exprs(std::vector<std::vector<dsl::ScalarExpr>> entries, bool finite_difference,
                                    MetricOptions opts = {});

  Kind kind() const { return kind_; }
  std::size_t dim() const { return n_; }
  const MetricOptions& options() const { return opts_; }
  const std::string& description() const { return description_; }
  bool time_or_state_dependent() const { return kind_ == Kind::StateTime || kind_ == Kind::Storage; }

  Matrix theta(const Vector& x, double t) const;
  Matrix theta_dot(const Vector& x, double t, const Vector& xdot) const;

  // Diagonal scales for Identity/BlockScaling kinds.
  const Vector& scales() const { return scales_; }
  const StorageFunction* storage() const { return storage_.get(); }
  const MetricTransform* base() const { return base_.get(); }

  // Throws MetricError if Theta(x,t) is singular, beyond the condition cap,
  // or its Gram matrix falls below the floor.
  void check_at(const Vector& x, double t) const;

  MetricTransform with_description(std::string d) const;

 private:
  friend MetricTransform augment_storage(const MetricTransform& metric, const StorageFunction& gamma);

  Kind kind_ = Kind::Identity;
  std::size_t n_ = 0;
  MetricOptions opts_;
  std::string description_;
  Matrix constant_;
  Vector scales_;
  MatrixFn theta_fn_;
  MatrixFn dtheta_dt_;
  PartialFn dtheta_dx_;
  bool finite_difference_ = false;
  std::shared_ptr<const StorageFunction> storage_;
  std::shared_ptr<const MetricTransform> base_;
};

struct GeneralizedJacobian {
  Matrix f;   // Theta J Theta^{-1} + Theta-dot Theta^{-1}
  Matrix fs;  // symmetric part of f
  Vector x;
  double t = 0.0;
};

// dTheta/dt + sum_i dTheta/dx_i xdot_i; zero for constant kinds.
Matrix theta_dot(const MetricTransform& metric, const Vector& x, double t, const Vector& xdot);

GeneralizedJacobian generalized_jacobian(const SystemModel& system, const MetricTransform& metric, const Vector& x,
                                         double t);
// Same, reusing an already evaluated f(x,t) and J(x,t).
GeneralizedJacobian generalized_jacobian(const MetricTransform& metric, const Vector& x, double t, const Vector& fx,
                                         const Matrix& jac);

// Theta_e = e^gamma Theta. Throws std::invalid_argument without a declared bound.
MetricTransform augment_storage(const MetricTransform& metric, const StorageFunction& gamma);

}  // namespace weakon
