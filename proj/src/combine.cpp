#include "weakon/combine.hpp"

#include "weakon/parallel.hpp"
#include "weakon/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace weakon {

// ------------------------------------------------------------------ Coupling

Coupling Coupling::constant(Matrix g) {
  if (g.size() == 0) throw std::invalid_argument("coupling matrix is empty");
  if (!g.allFinite()) throw std::invalid_argument("coupling matrix has non-finite entries");
  Coupling c;
  c.rows_ = static_cast<std::size_t>(g.rows());
  c.cols_ = static_cast<std::size_t>(g.cols());
  c.constant_ = std::move(g);
  return c;
}

Coupling Coupling::from_exprs(std::size_t rows, std::size_t cols, const std::vector<std::string>& entries,
                              const dsl::ParamMap& params) {
  if (rows == 0 || cols == 0 || entries.size() != rows * cols)
    throw std::invalid_argument("coupling expression count does not match its shape");
  Coupling c;
  c.rows_ = rows;
  c.cols_ = cols;
  bool any_time = false;
  for (const auto& src : entries) {
    auto e = dsl::parse_scalar(src, 0, params);
    if (e.references_state()) throw std::invalid_argument("coupling entries may depend on t only: '" + src + "'");
    any_time = any_time || e.references_time();
    c.exprs_.push_back(std::move(e));
  }
  if (!any_time) {
    // fold to a constant matrix
    Matrix g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) g(i, j) = c.exprs_[i * cols + j].eval(Vector(), 0.0);
    return constant(std::move(g));
  }
  return c;
}

Matrix Coupling::eval(double t) const {
  if (exprs_.empty()) return constant_;
  Matrix g(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) g(i, j) = exprs_[i * cols_ + j].eval(Vector(), t);
  return g;
}

std::vector<Dual> Coupling::eval_dual(const Dual& t) const {
  std::vector<Dual> out;
  out.reserve(rows_ * cols_);
  if (exprs_.empty()) {
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out.emplace_back(constant_(i, j), t.width());
    return out;
  }
  for (const auto& e : exprs_) out.push_back(e.eval_dual({}, t));
  return out;
}

const char* to_string(InterconnectionKind kind) {
  switch (kind) {
    case InterconnectionKind::Parallel: return "parallel";
    case InterconnectionKind::Feedback: return "feedback";
    case InterconnectionKind::Hierarchical: return "hierarchical";
  }
  return "?";
}

// ------------------------------------------------------------ composite fields

namespace {

class ParallelField final : public VectorField {
 public:
  ParallelField(std::shared_ptr<const VectorField> a, std::shared_ptr<const VectorField> b, double alpha, double beta)
      : a_(std::move(a)), b_(std::move(b)), alpha_(alpha), beta_(beta) {}
  std::size_t dim() const override { return a_->dim(); }
  bool autonomous() const override { return a_->autonomous() && b_->autonomous(); }
  Vector eval(const Vector& x, double t) const override { return alpha_ * a_->eval(x, t) + beta_ * b_->eval(x, t); }
  std::vector<Dual> eval_dual(std::span<const Dual> x, const Dual& t) const override {
    auto fa = a_->eval_dual(x, t);
    auto fb = b_->eval_dual(x, t);
    for (std::size_t i = 0; i < fa.size(); ++i) fa[i] = alpha_ * fa[i] + beta_ * fb[i];
    return fa;
  }

 private:
  std::shared_ptr<const VectorField> a_;
  std::shared_ptr<const VectorField> b_;
  double alpha_;
  double beta_;
};

// x_a' = f_a + upper_gain G x_b, x_b' = f_b - lower_gain G^T x_a.
class CoupledField final : public VectorField {
 public:
  CoupledField(std::shared_ptr<const VectorField> a, std::shared_ptr<const VectorField> b, Coupling g,
               double upper_gain, double lower_gain)
      : a_(std::move(a)), b_(std::move(b)), g_(std::move(g)), upper_(upper_gain), lower_(lower_gain) {}

  std::size_t dim() const override { return a_->dim() + b_->dim(); }
  bool autonomous() const override { return a_->autonomous() && b_->autonomous() && !g_.time_varying(); }

  Vector eval(const Vector& x, double t) const override {
    const auto n = static_cast<Eigen::Index>(a_->dim());
    const auto m = static_cast<Eigen::Index>(b_->dim());
    const Vector xa = x.head(n);
    const Vector xb = x.tail(m);
    const Matrix g = g_.eval(t);
    Vector out(n + m);
    out.head(n) = a_->eval(xa, t);
    out.tail(m) = b_->eval(xb, t);
    if (upper_ != 0.0) out.head(n) += upper_ * (g * xb);
    if (lower_ != 0.0) out.tail(m) -= lower_ * (g.transpose() * xa);
    return out;
  }

  std::vector<Dual> eval_dual(std::span<const Dual> x, const Dual& t) const override {
    const std::size_t n = a_->dim();
    const std::size_t m = b_->dim();
    auto out = a_->eval_dual(x.subspan(0, n), t);
    auto fb = b_->eval_dual(x.subspan(n, m), t);
    const auto g = g_.eval_dual(t);
    if (upper_ != 0.0)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i] = out[i] + upper_ * (g[i * m + j] * x[n + j]);
    if (lower_ != 0.0)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) fb[j] = fb[j] - lower_ * (g[i * m + j] * x[i]);
    out.insert(out.end(), fb.begin(), fb.end());
    return out;
  }

 private:
  std::shared_ptr<const VectorField> a_;
  std::shared_ptr<const VectorField> b_;
  Coupling g_;
  double upper_;
  double lower_;
};

Box intersect(const Box& a, const Box& b) {
  Box r;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double lo = std::max(a.bounds[i].first, b.bounds[i].first);
    const double hi = std::min(a.bounds[i].second, b.bounds[i].second);
    if (!(lo < hi)) throw std::invalid_argument("parallel composition: subsystem domains do not overlap");
    r.bounds.emplace_back(lo, hi);
  }
  return r;
}

void check_coupling_shape(const SystemModel& fa, const SystemModel& fb, const Coupling& g) {
  if (g.rows() != fa.dim() || g.cols() != fb.dim())
    throw std::invalid_argument("coupling G has shape " + std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                                ", expected " + std::to_string(fa.dim()) + "x" + std::to_string(fb.dim()));
}

}  // namespace

bool same_metric(const MetricTransform& a, const MetricTransform& b) {
  if (a.kind() != b.kind() || a.dim() != b.dim()) return false;
  switch (a.kind()) {
    case MetricTransform::Kind::Identity: return true;
    case MetricTransform::Kind::BlockScaling: return a.scales() == b.scales();
    case MetricTransform::Kind::Constant: return a.theta(Vector(), 0.0) == b.theta(Vector(), 0.0);
    default: return a.description() == b.description();
  }
}

MetricTransform CompositeSystem::epsilon_metric(double eps) const {
  if (kind != InterconnectionKind::Hierarchical) throw std::logic_error("epsilon metric applies to hierarchical composites");
  return MetricTransform::block_scaling({{dim_a(), eps}, {dim_b(), 1.0}});
}

Matrix CompositeSystem::block_jacobian(const Vector& x, double t) const {
  if (kind == InterconnectionKind::Parallel) return alpha * a.jacobian(x, t) + beta * b.jacobian(x, t);
  const auto n = static_cast<Eigen::Index>(dim_a());
  const auto m = static_cast<Eigen::Index>(dim_b());
  const Matrix g = coupling->eval(t);
  Matrix jac = Matrix::Zero(n + m, n + m);
  jac.topLeftCorner(n, n) = a.jacobian(x.head(n), t);
  jac.bottomRightCorner(m, m) = b.jacobian(x.tail(m), t);
  if (kind == InterconnectionKind::Feedback) {
    jac.topRightCorner(n, m) = gain * g;
    jac.bottomLeftCorner(m, n) = -g.transpose();
  } else {
    jac.topRightCorner(n, m) = g;
  }
  return jac;
}

CompositeSystem parallel(const SystemModel& fa, const SystemModel& fb, double alpha, double beta,
                         const std::optional<MetricTransform>& metric_a, const std::optional<MetricTransform>& metric_b) {
  if (fa.dim() != fb.dim())
    throw std::invalid_argument("parallel composition needs equal dimensions (" + std::to_string(fa.dim()) + " vs " +
                                std::to_string(fb.dim()) + ")");
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw std::invalid_argument("parallel weights must satisfy alpha, beta >= 0 and alpha + beta > 0");
  if (metric_a.has_value() != metric_b.has_value() || (metric_a && !same_metric(*metric_a, *metric_b)))
    throw std::invalid_argument("parallel composition requires the same metric for both subsystems");

  auto field = std::make_shared<ParallelField>(fa.field_ptr(), fb.field_ptr(), alpha, beta);
  SystemModel model("parallel(" + fa.name() + "," + fb.name() + ")", field, intersect(fa.domain(), fb.domain()),
                    intersect(fa.sample_box(), fb.sample_box()));
  return CompositeSystem{InterconnectionKind::Parallel, model, fa, fb, alpha, beta, 1.0, std::nullopt,
                         metric_a ? *metric_a : MetricTransform::identity(fa.dim())};
}

CompositeSystem feedback(const SystemModel& fa, const SystemModel& fb, const Coupling& g, double k) {
  check_coupling_shape(fa, fb, g);
  if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("feedback loop gain must be > 0");
  auto field = std::make_shared<CoupledField>(fa.field_ptr(), fb.field_ptr(), g, k, 1.0);
  SystemModel model("feedback(" + fa.name() + "," + fb.name() + ")", field, Box::product(fa.domain(), fb.domain()),
                    Box::product(fa.sample_box(), fb.sample_box()));
  return CompositeSystem{InterconnectionKind::Feedback, model, fa, fb, 1.0, 1.0, k, g,
                         MetricTransform::block_scaling({{fa.dim(), 1.0}, {fb.dim(), std::sqrt(k)}})};
}

CompositeSystem hierarchical(const SystemModel& fa, const SystemModel& fb, const Coupling& g) {
  check_coupling_shape(fa, fb, g);
  auto field = std::make_shared<CoupledField>(fa.field_ptr(), fb.field_ptr(), g, 1.0, 0.0);
  SystemModel model("hierarchical(" + fa.name() + "," + fb.name() + ")", field,
                    Box::product(fa.domain(), fb.domain()), Box::product(fa.sample_box(), fb.sample_box()));
  return CompositeSystem{InterconnectionKind::Hierarchical, model, fa, fb, 1.0, 1.0, 1.0, g, std::nullopt};
}

namespace {

struct TopTwo {
  double l1;
  double l2;  // -inf for scalar systems
};

std::vector<TopTwo> top_two(const SystemModel& s, const MetricTransform& metric, const Sampler& sampler) {
  if (sampler.dim() != s.dim()) throw std::invalid_argument("sampler dimension does not match system " + s.name());
  if (!s.autonomous() && !sampler.window())
    throw std::invalid_argument("non-autonomous system " + s.name() + " needs a sampler time window");
  std::vector<TopTwo> out(sampler.total());
  parallel_for(sampler.total(), [&](std::size_t idx) {
    const auto [x, t] = sampler.sample(idx);
    const auto sp = spectrum(generalized_jacobian(s, metric, x, t).fs);
    out[idx] = {sp.lambda(0), sp.size() > 1 ? sp.lambda(1) : -std::numeric_limits<double>::infinity()};
  });
  return out;
}

}  // namespace

FeedbackCondition check_feedback_condition(const SystemModel& fa, const SystemModel& fb, const Sampler& sampler_a,
                                           const Sampler& sampler_b, const std::optional<MetricTransform>& metric_a,
                                           const std::optional<MetricTransform>& metric_b) {
  if (sampler_a.total() == 0 || sampler_b.total() == 0) throw std::invalid_argument("empty sample set");
  if (sampler_a.time_count() != sampler_b.time_count())
    throw std::invalid_argument("subsystem samplers must use the same number of time samples");
  const auto ta = top_two(fa, metric_a ? *metric_a : MetricTransform::identity(fa.dim()), sampler_a);
  const auto tb = top_two(fb, metric_b ? *metric_b : MetricTransform::identity(fb.dim()), sampler_b);
  const std::size_t tc = sampler_a.time_count();

  FeedbackCondition r;
  r.samples_a = ta.size();
  r.samples_b = tb.size();
  const double ninf = -std::numeric_limits<double>::infinity();
  double sup_plain = ninf;
  double sup_refined = ninf;
  r.sup_lambda1_a = ninf;
  r.sup_lambda1_b = ninf;
  for (std::size_t j = 0; j < tc; ++j) {
    double max_a = ninf;
    double max_b = ninf;
    for (std::size_t i = j; i < ta.size(); i += tc) max_a = std::max(max_a, ta[i].l1);
    for (std::size_t i = j; i < tb.size(); i += tc) max_b = std::max(max_b, tb[i].l1);
    sup_plain = std::max(sup_plain, max_a + max_b);
    r.sup_lambda1_a = std::max(r.sup_lambda1_a, max_a);
    r.sup_lambda1_b = std::max(r.sup_lambda1_b, max_b);
    for (std::size_t ia = j; ia < ta.size(); ia += tc) {
      for (std::size_t ib = j; ib < tb.size(); ib += tc) {
        double v[4] = {ta[ia].l1, ta[ia].l2, tb[ib].l1, tb[ib].l2};
        std::partial_sort(v, v + 2, v + 4, std::greater<double>());
        sup_refined = std::max(sup_refined, v[0] + v[1]);
      }
    }
  }
  r.margin = -sup_plain;
  r.holds = r.margin > 0.0;
  r.refined_margin = -sup_refined;
  r.refined = r.refined_margin > 0.0;
  return r;
}

}  // namespace weakon
