#include "weakon/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

namespace weakon::dsl {

ParseError::ParseError(const std::string& what, int line, int column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + what),
      line_(line),
      column_(column) {}

namespace {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Assign, Sep, End };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  int line = 1;
  int column = 1;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto push = [&](Tok k, std::string text, int c) { out.push_back({k, std::move(text), 0.0, line, c}); };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '\n') {
      push(Tok::Sep, "\\n", col);
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      ++col;
      continue;
    }
    const int start_col = col;
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() &&
                                                       std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          j = k;
          while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        }
      }
      std::string text(src.substr(i, j - i));
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("malformed number '" + text + "'", line, start_col);
      out.push_back({Tok::Number, text, value, line, start_col});
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      push(Tok::Ident, std::string(src.substr(i, j - i)), start_col);
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    Tok k;
    switch (c) {
      case '+': k = Tok::Plus; break;
      case '-': k = Tok::Minus; break;
      case '*': k = Tok::Star; break;
      case '/': k = Tok::Slash; break;
      case '^': k = Tok::Caret; break;
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case '=': k = Tok::Assign; break;
      case ';': k = Tok::Sep; break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", line, start_col);
    }
    push(k, std::string(1, c), start_col);
    ++i;
    ++col;
  }
  out.push_back({Tok::End, "<end>", 0.0, line, col});
  return out;
}

struct PendingRef {
  std::shared_ptr<Node> node;
  std::string name;
  int line;
  int column;
};

std::optional<std::size_t> state_index(const std::string& name) {
  if (name.size() < 2 || name[0] != 'x') return std::nullopt;
  if (!std::all_of(name.begin() + 1, name.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }))
    return std::nullopt;
  std::size_t v = 0;
  std::from_chars(name.data() + 1, name.data() + name.size(), v);
  return v;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  const Token& expect(Tok k, const char* what) {
    if (peek().kind != k)
      throw ParseError(std::string("expected ") + what + ", found '" + peek().text + "'", peek().line,
                       peek().column);
    return next();
  }

  std::shared_ptr<Node> expr() {
    auto lhs = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const Node::Kind k = next().kind == Tok::Plus ? Node::Kind::Add : Node::Kind::Sub;
      lhs = binary(k, lhs, term());
    }
    return lhs;
  }

  std::vector<PendingRef>& refs() { return refs_; }

 private:
  static std::shared_ptr<Node> binary(Node::Kind k, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  std::shared_ptr<Node> term() {
    auto lhs = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const Node::Kind k = next().kind == Tok::Star ? Node::Kind::Mul : Node::Kind::Div;
      lhs = binary(k, lhs, unary());
    }
    return lhs;
  }

  std::shared_ptr<Node> unary() {
    if (accept(Tok::Minus)) {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Neg;
      n->lhs = unary();
      return n;
    }
    if (accept(Tok::Plus)) return unary();
    return power();
  }

  std::shared_ptr<Node> power() {
    auto base = primary();
    if (peek().kind == Tok::Caret) {
      const Token& caret = next();
      const Token& e = peek();
      if (e.kind != Tok::Number)
        throw ParseError("exponent must be a non-negative integer literal", e.line, e.column);
      next();
      if (e.number < 0 || e.number != std::floor(e.number) || e.number > 1024)
        throw ParseError("exponent must be a non-negative integer literal", e.line, e.column);
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Pow;
      n->exponent = static_cast<unsigned>(e.number);
      n->lhs = base;
      if (peek().kind == Tok::Caret)
        throw ParseError("chained '^' is not supported; use parentheses", caret.line, caret.column);
      return n;
    }
    return base;
  }

  std::shared_ptr<Node> primary() {
    const Token& tok = peek();
    if (tok.kind == Tok::Number) {
      next();
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Number;
      n->number = tok.number;
      return n;
    }
    if (tok.kind == Tok::LParen) {
      next();
      auto inner = expr();
      expect(Tok::RParen, "')'");
      return inner;
    }
    if (tok.kind == Tok::Ident) {
      next();
      if (peek().kind == Tok::LParen) {
        Node::Kind k;
        if (tok.text == "sin") k = Node::Kind::Sin;
        else if (tok.text == "cos") k = Node::Kind::Cos;
        else if (tok.text == "tanh") k = Node::Kind::Tanh;
        else if (tok.text == "exp") k = Node::Kind::Exp;
        else throw ParseError("unknown function '" + tok.text + "'", tok.line, tok.column);
        next();
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->lhs = expr();
        expect(Tok::RParen, "')'");
        return n;
      }
      auto n = std::make_shared<Node>();
      if (tok.text == "t") {
        n->kind = Node::Kind::Time;
      } else if (tok.text == "pi") {
        n->kind = Node::Kind::Number;
        n->number = std::numbers::pi;
      } else {
        refs_.push_back({n, tok.text, tok.line, tok.column});
      }
      return n;
    }
    throw ParseError("unexpected '" + tok.text + "'", tok.line, tok.column);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<PendingRef> refs_;
};

template <class T>
T constant(double v, std::size_t width);
template <>
double constant<double>(double v, std::size_t) {
  return v;
}
template <>
Dual constant<Dual>(double v, std::size_t width) {
  return Dual(v, width);
}

template <class T>
T evaluate(const Node& n, std::span<const T> x, const T& t, const std::vector<double>& params,
           std::size_t width, std::size_t component) {
  using K = Node::Kind;
  auto sub = [&](const NodePtr& c) { return evaluate<T>(*c, x, t, params, width, component); };
  switch (n.kind) {
    case K::Number: return constant<T>(n.number, width);
    case K::State: return x[n.index];
    case K::Time: return t;
    case K::Param: return constant<T>(params[n.index], width);
    case K::Neg: return -sub(n.lhs);
    case K::Add: return sub(n.lhs) + sub(n.rhs);
    case K::Sub: return sub(n.lhs) - sub(n.rhs);
    case K::Mul: return sub(n.lhs) * sub(n.rhs);
    case K::Div: {
      T den = sub(n.rhs);
      if (value_of(den) == 0.0)
        throw EvalError("division by zero in component " + std::to_string(component), component);
      return sub(n.lhs) / den;
    }
    case K::Pow: return ipow(sub(n.lhs), n.exponent);
    case K::Sin: { using std::sin; return sin(sub(n.lhs)); }
    case K::Cos: { using std::cos; return cos(sub(n.lhs)); }
    case K::Tanh: { using std::tanh; return tanh(sub(n.lhs)); }
    case K::Exp: { using std::exp; return exp(sub(n.lhs)); }
  }
  return constant<T>(0.0, width);
}

bool references(const Node& n, Node::Kind kind) {
  if (n.kind == kind) return true;
  if (n.lhs && references(*n.lhs, kind)) return true;
  return n.rhs && references(*n.rhs, kind);
}

std::size_t node_depth(const Node& n) {
  std::size_t d = 0;
  if (n.lhs) d = std::max(d, node_depth(*n.lhs));
  if (n.rhs) d = std::max(d, node_depth(*n.rhs));
  return d + 1;
}

void check_finite(double v, std::size_t component) {
  if (!std::isfinite(v))
    throw EvalError("non-finite value in component " + std::to_string(component), component);
}

// Resolves identifier references against the state dimension and parameters.
void resolve(std::vector<PendingRef>& refs, std::size_t n, const std::vector<std::string>& param_names) {
  for (auto& r : refs) {
    if (auto idx = state_index(r.name)) {
      if (*idx >= n)
        throw ParseError("undeclared variable '" + r.name + "' (state dimension is " + std::to_string(n) + ")",
                         r.line, r.column);
      r.node->kind = Node::Kind::State;
      r.node->index = *idx;
      continue;
    }
    auto it = std::find(param_names.begin(), param_names.end(), r.name);
    if (it == param_names.end()) throw ParseError("undeclared variable '" + r.name + "'", r.line, r.column);
    r.node->kind = Node::Kind::Param;
    r.node->index = static_cast<std::size_t>(it - param_names.begin());
  }
  refs.clear();
}

}  // namespace

// ---------------------------------------------------------------- ScalarExpr

ScalarExpr::ScalarExpr(NodePtr root, std::size_t n, std::vector<double> params)
    : root_(std::move(root)), n_(n), params_(std::move(params)) {}

double ScalarExpr::eval(const Vector& x, double t) const {
  if (static_cast<std::size_t>(x.size()) != n_) throw std::invalid_argument("state length mismatch");
  const double v = evaluate<double>(*root_, std::span<const double>(x.data(), n_), t, params_, 0, 0);
  check_finite(v, 0);
  return v;
}

Dual ScalarExpr::eval_dual(std::span<const Dual> x, const Dual& t) const {
  if (x.size() != n_) throw std::invalid_argument("state length mismatch");
  return evaluate<Dual>(*root_, x, t, params_, t.width(), 0);
}

Dual ScalarExpr::eval_with_partials(const Vector& x, double t) const {
  if (static_cast<std::size_t>(x.size()) != n_) throw std::invalid_argument("state length mismatch");
  std::vector<Dual> xs;
  xs.reserve(n_);
  for (std::size_t i = 0; i < n_; ++i) xs.push_back(Dual::variable(x[i], n_ + 1, i));
  const Dual td = Dual::variable(t, n_ + 1, n_);
  Dual r = evaluate<Dual>(*root_, std::span<const Dual>(xs), td, params_, n_ + 1, 0);
  check_finite(r.value(), 0);
  for (double p : r.partials()) check_finite(p, 0);
  return r;
}

bool ScalarExpr::references_state() const { return root_ && references(*root_, Node::Kind::State); }
bool ScalarExpr::references_time() const { return root_ && references(*root_, Node::Kind::Time); }
std::size_t ScalarExpr::depth() const { return root_ ? node_depth(*root_) : 0; }

// ----------------------------------------------------------- VectorFieldExpr

VectorFieldExpr::VectorFieldExpr(std::vector<NodePtr> exprs, std::vector<std::string> param_names,
                                 std::vector<double> param_values)
    : exprs_(std::move(exprs)), param_names_(std::move(param_names)), param_values_(std::move(param_values)) {
  autonomous_ = std::none_of(exprs_.begin(), exprs_.end(),
                             [](const NodePtr& e) { return references(*e, Node::Kind::Time); });
}

ParamMap VectorFieldExpr::params() const {
  ParamMap m;
  for (std::size_t i = 0; i < param_names_.size(); ++i) m[param_names_[i]] = param_values_[i];
  return m;
}

Vector VectorFieldExpr::eval(const Vector& x, double t) const {
  const std::size_t n = dim();
  if (static_cast<std::size_t>(x.size()) != n) throw std::invalid_argument("state length mismatch");
  Vector out(n);
  const std::span<const double> xs(x.data(), n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = evaluate<double>(*exprs_[i], xs, t, param_values_, 0, i);
    check_finite(out[i], i);
  }
  return out;
}

std::vector<Dual> VectorFieldExpr::eval_dual(std::span<const Dual> x, const Dual& t) const {
  if (x.size() != dim()) throw std::invalid_argument("state length mismatch");
  std::vector<Dual> out;
  out.reserve(dim());
  for (std::size_t i = 0; i < dim(); ++i) out.push_back(evaluate<Dual>(*exprs_[i], x, t, param_values_, t.width(), i));
  return out;
}

namespace {
std::vector<Dual> seeded(const Vector& x, double t, Dual& td) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<Dual> xs;
  xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) xs.push_back(Dual::variable(x[i], n + 1, i));
  td = Dual::variable(t, n + 1, n);
  return xs;
}
}  // namespace

Matrix VectorFieldExpr::jacobian(const Vector& x, double t) const {
  const std::size_t n = dim();
  if (static_cast<std::size_t>(x.size()) != n) throw std::invalid_argument("state length mismatch");
  Dual td;
  const auto xs = seeded(x, t, td);
  const auto fs = eval_dual(xs, td);
  Matrix jac(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    check_finite(fs[i].value(), i);
    for (std::size_t j = 0; j < n; ++j) {
      jac(i, j) = fs[i].partial(j);
      check_finite(jac(i, j), i);
    }
  }
  return jac;
}

Vector VectorFieldExpr::time_partial(const Vector& x, double t) const {
  const std::size_t n = dim();
  Dual td;
  const auto xs = seeded(x, t, td);
  const auto fs = eval_dual(xs, td);
  Vector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fs[i].partial(n);
  return out;
}

ScalarExpr VectorFieldExpr::component(std::size_t i) const {
  return ScalarExpr(exprs_.at(i), dim(), param_values_);
}

// --------------------------------------------------------------------- parse

namespace {

// Constant-folds a parameter value expression (numbers, pi, earlier params).
double fold_constant(const Node& n, const std::vector<double>& params) {
  return evaluate<double>(n, std::span<const double>(), 0.0, params, 0, 0);
}

}  // namespace

VectorFieldExpr parse(std::string_view src, const ParamMap& extra_params) {
  Parser p(lex(src));
  std::vector<std::string> names;
  std::vector<double> values;
  for (const auto& [k, v] : extra_params) {
    names.push_back(k);
    values.push_back(v);
  }
  const std::set<std::string> external(names.begin(), names.end());

  struct Def {
    std::shared_ptr<Node> root;
    int line;
    int column;
  };
  std::map<std::size_t, Def> defs;
  std::vector<PendingRef> field_refs;

  while (p.peek().kind != Tok::End) {
    if (p.accept(Tok::Sep)) continue;
    const Token& head = p.expect(Tok::Ident, "a definition 'dxi = ...' or 'param name = value'");
    if (head.text == "param") {
      const Token& name = p.expect(Tok::Ident, "parameter name");
      if (name.text == "t" || name.text == "pi" || state_index(name.text))
        throw ParseError("reserved name '" + name.text + "' cannot be a parameter", name.line, name.column);
      p.expect(Tok::Assign, "'='");
      auto value_expr = p.expr();
      for (auto& r : p.refs()) {
        auto it = std::find(names.begin(), names.end(), r.name);
        if (it == names.end() || state_index(r.name))
          throw ParseError("parameter value may only reference earlier parameters; '" + r.name + "' is undeclared",
                           r.line, r.column);
        r.node->kind = Node::Kind::Param;
        r.node->index = static_cast<std::size_t>(it - names.begin());
      }
      p.refs().clear();
      if (references(*value_expr, Node::Kind::Time))
        throw ParseError("parameter value may not reference t", name.line, name.column);
      const double v = fold_constant(*value_expr, values);
      auto it = std::find(names.begin(), names.end(), name.text);
      if (it != names.end()) {
        if (!external.count(name.text))
          throw ParseError("duplicate parameter '" + name.text + "'", name.line, name.column);
        // externally supplied values take precedence
      } else {
        names.push_back(name.text);
        values.push_back(v);
      }
    } else {
      if (head.text.size() < 3 || head.text.compare(0, 2, "dx") != 0 || !state_index(head.text.substr(1)))
        throw ParseError("expected 'dx<index>' or 'param', found '" + head.text + "'", head.line, head.column);
      const std::size_t idx = *state_index(head.text.substr(1));
      if (defs.count(idx)) throw ParseError("duplicate definition of " + head.text, head.line, head.column);
      p.expect(Tok::Assign, "'='");
      auto root = p.expr();
      defs[idx] = {root, head.line, head.column};
      for (auto& r : p.refs()) field_refs.push_back(r);
      p.refs().clear();
    }
    if (p.peek().kind != Tok::End) p.expect(Tok::Sep, "';' or newline");
  }

  if (defs.empty()) throw ParseError("no 'dxi = ...' definitions", 1, 1);
  const std::size_t n = defs.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!defs.count(i)) {
      const auto& last = defs.rbegin()->second;
      throw ParseError("missing definition of dx" + std::to_string(i) + " (indices must be dense 0.." +
                           std::to_string(n - 1) + ")",
                       last.line, last.column);
    }
  }
  resolve(field_refs, n, names);

  std::vector<NodePtr> exprs;
  exprs.reserve(n);
  for (auto& [i, d] : defs) exprs.push_back(d.root);
  return VectorFieldExpr(std::move(exprs), std::move(names), std::move(values));
}

ScalarExpr parse_scalar(std::string_view src, std::size_t n, const ParamMap& params) {
  Parser p(lex(src));
  while (p.accept(Tok::Sep)) {
  }
  auto root = p.expr();
  while (p.accept(Tok::Sep)) {
  }
  if (p.peek().kind != Tok::End)
    throw ParseError("unexpected '" + p.peek().text + "' after expression", p.peek().line, p.peek().column);
  std::vector<std::string> names;
  std::vector<double> values;
  for (const auto& [k, v] : params) {
    names.push_back(k);
    values.push_back(v);
  }
  resolve(p.refs(), n, names);
  return ScalarExpr(std::move(root), n, std::move(values));
}

}  // namespace weakon::dsl
