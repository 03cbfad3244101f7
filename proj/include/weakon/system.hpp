#pragma once

#include "weakon/dsl.hpp"
#include "weakon/dual.hpp"
#include "weakon/linalg.hpp"

#include <json.hpp>

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace weakon {

// A vector field f(x, t) that can be evaluated on plain values and on dual
// numbers. Jacobians are always obtained from the dual path.
class VectorField {
 public:
  virtual ~VectorField() = default;
  virtual std::size_t dim() const = 0;
  virtual bool autonomous() const = 0;
  virtual Vector eval(const Vector& x, double t) const = 0;
  virtual std::vector<Dual> eval_dual(std::span<const Dual> x, const Dual& t) const = 0;
};

class DslField final : public VectorField {
 public:
  explicit DslField(dsl::VectorFieldExpr expr) : expr_(std::move(expr)) {}
  std::size_t dim() const override { return expr_.dim(); }
  bool autonomous() const override { return expr_.autonomous(); }
  Vector eval(const Vector& x, double t) const override { return expr_.eval(x, t); }
  std::vector<Dual> eval_dual(std::span<const Dual> x, const Dual& t) const override {
    return expr_.eval_dual(x, t);
  }
  const dsl::VectorFieldExpr& expr() const { return expr_; }

 private:
  dsl::VectorFieldExpr expr_;
};

class SystemModel {
 public:
  // `sample_box` is the default certification region; it defaults to `domain`.
  SystemModel(std::string name, std::shared_ptr<const VectorField> field, Box domain, Box sample_box = {});

  const std::string& name() const { return name_; }
  std::size_t dim() const { return field_->dim(); }
  bool autonomous() const { return field_->autonomous(); }
  const Box& domain() const { return domain_; }
  const Box& sample_box() const { return sample_box_; }
  const VectorField& field() const { return *field_; }
  std::shared_ptr<const VectorField> field_ptr() const { return field_; }

  Vector f(const Vector& x, double t) const;
  Matrix jacobian(const Vector& x, double t) const;
  // f and J from a single dual pass.
  std::pair<Vector, Matrix> f_and_jacobian(const Vector& x, double t) const;

  SystemModel renamed(std::string name) const;
  SystemModel with_boxes(Box domain, Box sample_box) const;

 private:
  std::string name_;
  std::shared_ptr<const VectorField> field_;
  Box domain_;
  Box sample_box_;
};

SystemModel system_from_dsl(std::string name, std::string_view src, const dsl::ParamMap& params = {},
                            Box domain = {}, Box sample_box = {});

// {name, params: {..}, equations: ["dx0 = ...", ...], domain?: [[lo,hi],..], sample_box?: [[lo,hi],..]}
SystemModel system_from_json(const nlohmann::json& doc);

Box box_from_json(const nlohmann::json& j);

namespace builtin {

// x0'' + b x0' + sin x0 = 0 as a first-order system. Certification region
// [-2pi, 2pi] x [-4, 4]; simulation domain [-8pi, 8pi] x [-8, 8].
SystemModel pendulum(double b = 0.5);
// x0' = x1, x1' = mu (1 - x0^2) x1 - x0. Region [-3, 3]^2, domain [-10, 10]^2.
SystemModel vanderpol(double mu = 1.0);
// x' = A x on [-10, 10]^n.
SystemModel linear(const Matrix& a, std::string name = "linear");
// x' = [[0, 1], [-1, 0]] x.
SystemModel rotation();

}  // namespace builtin

}  // namespace weakon
