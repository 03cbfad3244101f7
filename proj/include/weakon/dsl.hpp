#pragma once

// Text language for vector fields:
//
//   # damped pendulum
//   param b = 0.5
//   dx0 = x1
//   dx1 = -sin(x0) - b*x1
//
// Statements are separated by ';' or newlines. Expressions use + - * /,
// unary -, '^' with a non-negative integer literal exponent, the functions
// sin cos tanh exp, the constant pi, state variables x0..x(n-1), time t and
// declared parameters.

#include "weakon/dual.hpp"
#include "weakon/linalg.hpp"

#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace weakon::dsl {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& what, std::size_t component)
      : std::runtime_error(what), component_(component) {}
  std::size_t component() const { return component_; }

 private:
  std::size_t component_;
};

struct Node {
  enum class Kind { Number, State, Time, Param, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Tanh, Exp };

  Kind kind = Kind::Number;
  double number = 0.0;    // Number
  std::size_t index = 0;  // State / Param
  unsigned exponent = 0;  // Pow
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};
using NodePtr = std::shared_ptr<const Node>;

using ParamMap = std::map<std::string, double>;

// A single scalar expression over x0..x(n-1), t and parameters.
class ScalarExpr {
 public:
  ScalarExpr() = default;
  ScalarExpr(NodePtr root, std::size_t n, std::vector<double> params);

  std::size_t dim() const { return n_; }
  double eval(const Vector& x, double t) const;
  Dual eval_dual(std::span<const Dual> x, const Dual& t) const;

  // Value with partials (d/dx0 .. d/dx(n-1), d/dt).
  Dual eval_with_partials(const Vector& x, double t) const;

  bool references_state() const;
  bool references_time() const;
  std::size_t depth() const;

 private:
  NodePtr root_;
  std::size_t n_ = 0;
  std::vector<double> params_;
};

class VectorFieldExpr {
 public:
  VectorFieldExpr(std::vector<NodePtr> exprs, std::vector<std::string> param_names,
                  std::vector<double> param_values);

  std::size_t dim() const { return exprs_.size(); }
  bool autonomous() const { return autonomous_; }
  const std::vector<std::string>& param_names() const { return param_names_; }
  const std::vector<double>& param_values() const { return param_values_; }
  ParamMap params() const;

  // Throws EvalError naming the component on division by zero or a
  // non-finite result; std::invalid_argument on a length mismatch.
  Vector eval(const Vector& x, double t) const;
  std::vector<Dual> eval_dual(std::span<const Dual> x, const Dual& t) const;

  // Exact Jacobian d f_i / d x_j by dual propagation.
  Matrix jacobian(const Vector& x, double t) const;
  // d f_i / d t.
  Vector time_partial(const Vector& x, double t) const;

  ScalarExpr component(std::size_t i) const;

 private:
  std::vector<NodePtr> exprs_;
  std::vector<std::string> param_names_;
  std::vector<double> param_values_;
  bool autonomous_ = true;
};

VectorFieldExpr parse(std::string_view src, const ParamMap& extra_params = {});

// Scalar expression over an n-dimensional state (storage functions, couplings).
ScalarExpr parse_scalar(std::string_view src, std::size_t n, const ParamMap& params = {});

}  // namespace weakon::dsl
