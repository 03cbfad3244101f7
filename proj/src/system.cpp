#include "weakon/system.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace weakon {

SystemModel::SystemModel(std::string name, std::shared_ptr<const VectorField> field, Box domain, Box sample_box)
    : name_(std::move(name)), field_(std::move(field)), domain_(std::move(domain)), sample_box_(std::move(sample_box)) {
  if (!field_) throw std::invalid_argument("system '" + name_ + "' has no vector field");
  if (domain_.bounds.empty()) domain_ = Box::uniform(field_->dim(), -1e6, 1e6);
  if (sample_box_.bounds.empty()) sample_box_ = domain_;
  if (domain_.dim() != field_->dim() || sample_box_.dim() != field_->dim())
    throw std::invalid_argument("system '" + name_ + "': box dimension does not match state dimension");
  domain_.validate();
  sample_box_.validate();
}

Vector SystemModel::f(const Vector& x, double t) const {
  if (static_cast<std::size_t>(x.size()) != dim()) throw std::invalid_argument("state length mismatch");
  return field_->eval(x, t);
}

std::pair<Vector, Matrix> SystemModel::f_and_jacobian(const Vector& x, double t) const {
  const std::size_t n = dim();
  if (static_cast<std::size_t>(x.size()) != n) throw std::invalid_argument("state length mismatch");
  std::vector<Dual> xs;
  xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) xs.push_back(Dual::variable(x[i], n + 1, i));
  const auto fs = field_->eval_dual(xs, Dual::variable(t, n + 1, n));
  Vector fv(n);
  Matrix jac(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    fv[i] = fs[i].value();
    for (std::size_t j = 0; j < n; ++j) jac(i, j) = fs[i].partial(j);
  }
  if (!jac.allFinite() || !fv.allFinite())
    throw std::runtime_error("system '" + name_ + "': non-finite Jacobian");
  return {fv, jac};
}

Matrix SystemModel::jacobian(const Vector& x, double t) const { return f_and_jacobian(x, t).second; }

SystemModel SystemModel::renamed(std::string name) const {
  SystemModel s = *this;
  s.name_ = std::move(name);
  return s;
}

SystemModel SystemModel::with_boxes(Box domain, Box sample_box) const {
  return SystemModel(name_, field_, std::move(domain), std::move(sample_box));
}

SystemModel system_from_dsl(std::string name, std::string_view src, const dsl::ParamMap& params, Box domain,
                            Box sample_box) {
  auto expr = dsl::parse(src, params);
  return SystemModel(std::move(name), std::make_shared<DslField>(std::move(expr)), std::move(domain),
                     std::move(sample_box));
}

Box box_from_json(const nlohmann::json& j) {
  Box b;
  for (const auto& axis : j) {
    if (!axis.is_array() || axis.size() != 2) throw std::invalid_argument("box axis must be [lo, hi]");
    b.bounds.emplace_back(axis[0].get<double>(), axis[1].get<double>());
  }
  b.validate();
  return b;
}

SystemModel system_from_json(const nlohmann::json& doc) {
  const std::string name = doc.value("name", std::string("system"));
  dsl::ParamMap params;
  if (doc.contains("params"))
    for (const auto& [k, v] : doc.at("params").items()) params[k] = v.get<double>();
  if (!doc.contains("equations") || !doc.at("equations").is_array())
    throw std::invalid_argument("system '" + name + "': 'equations' must be an array of strings");
  std::ostringstream src;
  for (const auto& eq : doc.at("equations")) src << eq.get<std::string>() << '\n';
  Box domain = doc.contains("domain") ? box_from_json(doc.at("domain")) : Box{};
  Box sample = doc.contains("sample_box") ? box_from_json(doc.at("sample_box")) : Box{};
  return system_from_dsl(name, src.str(), params, std::move(domain), std::move(sample));
}

namespace builtin {

namespace {

class PendulumField final : public VectorField {
 public:
  explicit PendulumField(double b) : b_(b) {}
  std::size_t dim() const override { return 2; }
  bool autonomous() const override { return true; }
  Vector eval(const Vector& x, double) const override {
    Vector out(2);
    out << x[1], -std::sin(x[0]) - b_ * x[1];
    return out;
  }
  std::vector<Dual> eval_dual(std::span<const Dual> x, const Dual&) const override {
    return {x[1], -sin(x[0]) - b_ * x[1]};
  }

 private:
  double b_;
};

class VanDerPolField final : public VectorField {
 public:
  explicit VanDerPolField(double mu) : mu_(mu) {}
  std::size_t dim() const override { return 2; }
  bool autonomous() const override { return true; }
  Vector eval(const Vector& x, double) const override {
    Vector out(2);
    out << x[1], mu_ * (1.0 - x[0] * x[0]) * x[1] - x[0];
    return out;
  }
  std::vector<Dual> eval_dual(std::span<const Dual> x, const Dual&) const override {
    return {x[1], mu_ * (1.0 - x[0] * x[0]) * x[1] - x[0]};
  }

 private:
  double mu_;
};

class LinearField final : public VectorField {
 public:
  explicit LinearField(Matrix a) : a_(std::move(a)) {}
  std::size_t dim() const override { return static_cast<std::size_t>(a_.rows()); }
  bool autonomous() const override { return true; }
  Vector eval(const Vector& x, double) const override { return a_ * x; }
  std::vector<Dual> eval_dual(std::span<const Dual> x, const Dual& t) const override {
    std::vector<Dual> out;
    out.reserve(dim());
    for (Eigen::Index i = 0; i < a_.rows(); ++i) {
      Dual acc(0.0, t.width());
      for (Eigen::Index j = 0; j < a_.cols(); ++j)
        if (a_(i, j) != 0.0) acc = acc + a_(i, j) * x[j];
      out.push_back(std::move(acc));
    }
    return out;
  }

 private:
  Matrix a_;
};

}  // namespace

SystemModel pendulum(double b) {
  const double pi = std::numbers::pi;
  Box domain{{{-8 * pi, 8 * pi}, {-8.0, 8.0}}};
  Box region{{{-2 * pi, 2 * pi}, {-4.0, 4.0}}};
  return SystemModel("pendulum", std::make_shared<PendulumField>(b), domain, region);
}

SystemModel vanderpol(double mu) {
  return SystemModel("vanderpol", std::make_shared<VanDerPolField>(mu), Box::uniform(2, -10, 10),
                     Box::uniform(2, -3, 3));
}

SystemModel linear(const Matrix& a, std::string name) {
  if (a.rows() != a.cols() || a.rows() == 0) throw std::invalid_argument("linear system matrix must be square");
  const auto n = static_cast<std::size_t>(a.rows());
  return SystemModel(std::move(name), std::make_shared<LinearField>(a), Box::uniform(n, -10, 10));
}

SystemModel rotation() {
  Matrix a(2, 2);
  a << 0, 1, -1, 0;
  return linear(a, "rotation");
}

}  // namespace builtin

}  // namespace weakon
