#include "weakon/metrics.hpp"

#include "weakon/spectra.hpp"

#include <cmath>
#include <sstream>

namespace weakon {

StorageFunction StorageFunction::from_expr(const dsl::ScalarExpr& expr, std::optional<double> bound,
                                           std::string description) {
  StorageFunction s;
  s.gamma = [expr](const Vector& x, double t) { return expr.eval(x, t); };
  s.gamma_dot = [expr](const Vector& x, double t, const Vector& xdot) {
    const Dual d = expr.eval_with_partials(x, t);
    const std::size_t n = expr.dim();
    double v = d.partial(n);
    for (std::size_t i = 0; i < n; ++i) v += d.partial(i) * xdot[static_cast<Eigen::Index>(i)];
    return v;
  };
  s.bound = bound;
  s.description = std::move(description);
  return s;
}

StorageFunction StorageFunction::zero(std::size_t) {
  StorageFunction s;
  s.gamma = [](const Vector&, double) { return 0.0; };
  s.gamma_dot = [](const Vector&, double, const Vector&) { return 0.0; };
  s.bound = 0.0;
  s.description = "0";
  return s;
}

namespace {

void check_constant_theta(const Matrix& theta, const MetricOptions& opts) {
  if (theta.rows() != theta.cols() || theta.rows() == 0) throw MetricError("metric matrix must be square");
  if (!theta.allFinite()) throw MetricError("metric matrix has non-finite entries");
  Eigen::PartialPivLU<Matrix> lu(theta);
  const double rc = lu.rcond();
  if (!(rc > 0.0)) throw MetricError("metric transformation is singular");
  if (1.0 / rc > opts.condition_cap) {
    std::ostringstream os;
    os << "metric condition number " << 1.0 / rc << " exceeds cap " << opts.condition_cap;
    throw MetricError(os.str());
  }
  const double gmin = spectrum(theta.transpose() * theta).eigenvalues.minCoeff();
  if (!(gmin >= opts.gram_floor)) {
    std::ostringstream os;
    os << "metric Gram matrix eigenvalue " << gmin << " below floor " << opts.gram_floor;
    throw MetricError(os.str());
  }
}

}  // namespace

MetricTransform MetricTransform::identity(std::size_t n, MetricOptions opts) {
  MetricTransform m;
  m.kind_ = Kind::Identity;
  m.n_ = n;
  m.opts_ = opts;
  m.description_ = "identity";
  m.scales_ = Vector::Ones(static_cast<Eigen::Index>(n));
  return m;
}

MetricTransform MetricTransform::constant(Matrix theta, MetricOptions opts) {
  check_constant_theta(theta, opts);
  MetricTransform m;
  m.kind_ = Kind::Constant;
  m.n_ = static_cast<std::size_t>(theta.rows());
  m.opts_ = opts;
  m.description_ = "constant";
  m.constant_ = std::move(theta);
  return m;
}

MetricTransform MetricTransform::block_scaling(std::vector<std::pair<std::size_t, double>> blocks, MetricOptions opts) {
  std::size_t n = 0;
  for (const auto& [d, s] : blocks) {
    if (d == 0) throw MetricError("block_scaling: block dimension must be positive");
    if (!std::isfinite(s) || s == 0.0) throw MetricError("block_scaling: scale must be finite and non-zero");
    n += d;
  }
  if (n == 0) throw MetricError("block_scaling: no blocks");
  MetricTransform m;
  m.kind_ = Kind::BlockScaling;
  m.n_ = n;
  m.opts_ = opts;
  m.scales_.resize(static_cast<Eigen::Index>(n));
  std::ostringstream os;
  os << "block_scaling(";
  Eigen::Index at = 0;
  double smin = INFINITY;
  double smax = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto [d, s] = blocks[b];
    for (std::size_t i = 0; i < d; ++i) m.scales_[at++] = s;
    smin = std::min(smin, std::abs(s));
    smax = std::max(smax, std::abs(s));
    os << (b ? ", " : "") << d << ":" << s;
  }
  os << ")";
  m.description_ = os.str();
  if (smax / smin > opts.condition_cap) throw MetricError("block_scaling: condition number exceeds cap");
  if (smin * smin < opts.gram_floor) throw MetricError("block_scaling: Gram matrix below floor");
  return m;
}

MetricTransform MetricTransform::state_time(std::size_t n, MatrixFn theta, MatrixFn dtheta_dt, PartialFn dtheta_dx,
                                            std::string description, MetricOptions opts) {
  if (!theta || !dtheta_dt || !dtheta_dx) throw MetricError("state_time metric requires all suppliers");
  MetricTransform m;
  m.kind_ = Kind::StateTime;
  m.n_ = n;
  m.opts_ = opts;
  m.description_ = std::move(description);
  m.theta_fn_ = std::move(theta);
  m.dtheta_dt_ = std::move(dtheta_dt);
  m.dtheta_dx_ = std::move(dtheta_dx);
  return m;
}

MetricTransform MetricTransform::state_time_fd(std::size_t n, MatrixFn theta, std::string description,
                                               MetricOptions opts) {
  if (!theta) throw MetricError("state_time metric requires a Theta supplier");
  MetricTransform m;
  m.kind_ = Kind::StateTime;
  m.n_ = n;
  m.opts_ = opts;
  m.description_ = std::move(description);
  m.theta_fn_ = std::move(theta);
  m.finite_difference_ = true;
  return m;
}

MetricTransform MetricTransform::from_exprs(std::vector<std::vector<dsl::ScalarExpr>> entries, bool finite_difference,
                                            MetricOptions opts) {
  const std::size_t n = entries.size();
  if (n == 0) throw MetricError("metric expression matrix is empty");
  for (const auto& row : entries)
    if (row.size() != n) throw MetricError("metric expression matrix must be square");
  auto shared = std::make_shared<const std::vector<std::vector<dsl::ScalarExpr>>>(std::move(entries));
  const auto sz = static_cast<Eigen::Index>(n);
  MatrixFn theta = [shared, sz](const Vector& x, double t) {
    Matrix m(sz, sz);
    for (Eigen::Index i = 0; i < sz; ++i)
      for (Eigen::Index j = 0; j < sz; ++j) m(i, j) = (*shared)[i][j].eval(x, t);
    return m;
  };
  if (finite_difference) return state_time_fd(n, theta, "expr_fd", opts);
  // Partial index n is time; 0..n-1 are state axes.
  auto partial = [shared, sz](const Vector& x, double t, std::size_t axis) {
    Matrix m(sz, sz);
    for (Eigen::Index i = 0; i < sz; ++i)
      for (Eigen::Index j = 0; j < sz; ++j) m(i, j) = (*shared)[i][j].eval_with_partials(x, t).partial(axis);
    return m;
  };
  MatrixFn dt = [partial, n](const Vector& x, double t) { return partial(x, t, n); };
  PartialFn dx = [partial](const Vector& x, double t, std::size_t axis) { return partial(x, t, axis); };
  return state_time(n, theta, dt, dx, "expr", opts);
}

Matrix MetricTransform::theta(const Vector& x, double t) const {
  const auto n = static_cast<Eigen::Index>(n_);
  switch (kind_) {
    case Kind::Identity: return Matrix::Identity(n, n);
    case Kind::BlockScaling: return scales_.asDiagonal();
    case Kind::Constant: return constant_;
    case Kind::StateTime: {
      Matrix m = theta_fn_(x, t);
      if (m.rows() != n || m.cols() != n) throw MetricError("metric supplier returned wrong shape");
      if (!m.allFinite()) throw MetricError("metric supplier returned non-finite entries");
      return m;
    }
    case Kind::Storage: return std::exp(storage_->gamma(x, t)) * base_->theta(x, t);
  }
  return Matrix::Identity(n, n);
}

Matrix MetricTransform::theta_dot(const Vector& x, double t, const Vector& xdot) const {
  const auto n = static_cast<Eigen::Index>(n_);
  switch (kind_) {
    case Kind::Identity:
    case Kind::BlockScaling:
    case Kind::Constant: return Matrix::Zero(n, n);
    case Kind::StateTime: {
      Matrix d(n, n);
      if (finite_difference_) {
        auto step = [&](double v) { return opts_.fd_step * std::max(1.0, std::abs(v)); };
        const double ht = step(t);
        d = (theta_fn_(x, t + ht) - theta_fn_(x, t - ht)) / (2.0 * ht);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (xdot[i] == 0.0) continue;
          const double h = step(x[i]);
          Vector xp = x;
          Vector xm = x;
          xp[i] += h;
          xm[i] -= h;
          d += xdot[i] * (theta_fn_(xp, t) - theta_fn_(xm, t)) / (2.0 * h);
        }
      } else {
        d = dtheta_dt_(x, t);
        for (Eigen::Index i = 0; i < n; ++i)
          if (xdot[i] != 0.0) d += xdot[i] * dtheta_dx_(x, t, static_cast<std::size_t>(i));
      }
      if (!d.allFinite()) throw MetricError("metric derivative is non-finite");
      return d;
    }
    case Kind::Storage: {
      const double eg = std::exp(storage_->gamma(x, t));
      const double gd = storage_->gamma_dot(x, t, xdot);
      if (!std::isfinite(gd)) throw MetricError("storage function derivative is non-finite");
      return eg * (gd * base_->theta(x, t) + base_->theta_dot(x, t, xdot));
    }
  }
  return Matrix::Zero(n, n);
}

void MetricTransform::check_at(const Vector& x, double t) const {
  if (!time_or_state_dependent()) return;  // validated at construction
  check_constant_theta(theta(x, t), opts_);
}

MetricTransform MetricTransform::with_description(std::string d) const {
  MetricTransform m = *this;
  m.description_ = std::move(d);
  return m;
}

Matrix theta_dot(const MetricTransform& metric, const Vector& x, double t, const Vector& xdot) {
  return metric.theta_dot(x, t, xdot);
}

GeneralizedJacobian generalized_jacobian(const MetricTransform& metric, const Vector& x, double t, const Vector& fx,
                                         const Matrix& jac) {
  if (static_cast<std::size_t>(jac.rows()) != metric.dim())
    throw MetricError("metric dimension " + std::to_string(metric.dim()) + " does not match system dimension " +
                      std::to_string(jac.rows()));
  GeneralizedJacobian g;
  g.x = x;
  g.t = t;
  switch (metric.kind()) {
    case MetricTransform::Kind::Identity: g.f = jac; break;
    case MetricTransform::Kind::BlockScaling: {
      const Vector& s = metric.scales();
      g.f.resize(jac.rows(), jac.cols());
      for (Eigen::Index i = 0; i < jac.rows(); ++i)
        for (Eigen::Index j = 0; j < jac.cols(); ++j) g.f(i, j) = s[i] * jac(i, j) / s[j];
      break;
    }
    default: {
      metric.check_at(x, t);
      const Matrix theta = metric.theta(x, t);
      Matrix m = theta * jac;
      if (metric.time_or_state_dependent()) m += metric.theta_dot(x, t, fx);
      // F = M Theta^{-1}  <=>  Theta^T F^T = M^T
      Eigen::PartialPivLU<Matrix> lu(theta.transpose());
      g.f = lu.solve(m.transpose()).transpose();
      break;
    }
  }
  if (!g.f.allFinite()) throw MetricError("generalized Jacobian is non-finite");
  g.fs = sym_part(g.f);
  return g;
}

GeneralizedJacobian generalized_jacobian(const SystemModel& system, const MetricTransform& metric, const Vector& x,
                                         double t) {
  const auto [fx, jac] = system.f_and_jacobian(x, t);
  return generalized_jacobian(metric, x, t, fx, jac);
}

MetricTransform augment_storage(const MetricTransform& metric, const StorageFunction& gamma) {
  if (!gamma.bound) throw MetricError("storage function must declare a bound |gamma| <= B");
  if (!gamma.gamma || !gamma.gamma_dot) throw std::invalid_argument("storage function is incomplete");
  MetricTransform m;
  m.kind_ = MetricTransform::Kind::Storage;
  m.n_ = metric.dim();
  m.opts_ = metric.options();
  m.description_ = "exp(" + gamma.description + ")*" + metric.description();
  m.storage_ = std::make_shared<const StorageFunction>(gamma);
  m.base_ = std::make_shared<const MetricTransform>(metric);
  return m;
}

}  // namespace weakon
