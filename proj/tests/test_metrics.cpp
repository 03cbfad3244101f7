#include "oracles.hpp"

#include "weakon/combine.hpp"
#include "weakon/metrics.hpp"
#include "weakon/spectra.hpp"
#include "weakon/system.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace weakon;

namespace {

Vector vec2(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

StorageFunction sine_storage(std::size_t n, double amp) {
  return StorageFunction::from_expr(dsl::parse_scalar(std::to_string(amp) + "*sin(t)", n), amp, "sin");
}

}  // namespace

TEST_CASE("identity metric gives F = J exactly") {
  const auto p = builtin::pendulum(0.5);
  const auto m = MetricTransform::identity(2);
  const Vector x = vec2(0.7, -1.2);
  const auto g = generalized_jacobian(p, m, x, 0.0);
  CHECK(g.f == p.jacobian(x, 0.0));
  CHECK(g.fs == sym_part(g.f));
}

TEST_CASE("constant metric: F = Theta J Theta^-1 and zero Theta-dot") {
  Matrix th(2, 2);
  th << 2, 1, 0, 1;
  const auto m = MetricTransform::constant(th);
  const auto p = builtin::pendulum(0.5);
  const Vector x = vec2(0.3, 0.4);
  CHECK(theta_dot(m, x, 0.0, p.f(x, 0)).isZero(0.0));
  const Matrix want = th * p.jacobian(x, 0) * th.inverse();
  CHECK((generalized_jacobian(p, m, x, 0).f - want).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("metric validation") {
  Matrix singular(2, 2);
  singular << 1, 2, 2, 4;
  CHECK_THROWS_AS(MetricTransform::constant(singular), MetricError);
  Matrix ill(2, 2);
  ill << 1, 0, 0, 1e-10;
  CHECK_THROWS_AS(MetricTransform::constant(ill), MetricError);
  CHECK_THROWS(MetricTransform::block_scaling({{2, 0.0}}));
}

TEST_CASE("storage metric derivative") {
  const auto m = augment_storage(MetricTransform::identity(2), StorageFunction::from_expr(
                                                                    dsl::parse_scalar("sin(t)", 2), 1.0, "sin t"));
  const Vector x = vec2(0, 0);
  const Matrix d0 = theta_dot(m, x, 0.0, x);
  CHECK((d0 - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
  const double t = 0.8;
  const Matrix d = theta_dot(m, x, t, x);
  CHECK((d - std::cos(t) * std::exp(std::sin(t)) * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("storage shifts F by gamma-dot I and S_i by i gamma-dot") {
  const auto p = builtin::pendulum(0.5);
  const auto m = augment_storage(MetricTransform::identity(2), sine_storage(2, 0.1));
  for (double t : {0.0, 0.5, 1.7, 3.0, 4.4}) {
    const Vector x = vec2(1.0 + t, -0.3 * t);
    const auto g = generalized_jacobian(p, m, x, t);
    const Matrix diff = g.f - p.jacobian(x, t);
    CHECK((diff - 0.1 * std::cos(t) * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-8);
    const auto s0 = spectrum(sym_part(p.jacobian(x, t)));
    const auto s1 = spectrum(g.fs);
    for (std::size_t i = 1; i <= 2; ++i)
      CHECK(std::abs(s1.top_sum(i) - s0.top_sum(i) - static_cast<double>(i) * 0.1 * std::cos(t)) <= 1e-8);
  }
  const auto zero = augment_storage(MetricTransform::identity(2), StorageFunction::zero(2));
  const Vector x = vec2(0.2, 0.1);
  CHECK((generalized_jacobian(p, zero, x, 1.0).f - p.jacobian(x, 1.0)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("storage without a bound is refused") {
  auto g = StorageFunction::from_expr(dsl::parse_scalar("t", 2), std::nullopt, "t");
  CHECK_THROWS_AS(augment_storage(MetricTransform::identity(2), g), MetricError);
}

TEST_CASE("state-time metric: supplier and finite-difference modes agree") {
  auto theta = [](const Vector& x, double t) {
    Matrix m(2, 2);
    m << 1.0 + 0.2 * std::sin(x[0]) * std::cos(t), 0.1 * x[1], 0.05 * x[0] * x[1], 1.5 + 0.1 * std::cos(x[1] + t);
    return m;
  };
  auto dt = [](const Vector& x, double t) {
    Matrix m(2, 2);
    m << -0.2 * std::sin(x[0]) * std::sin(t), 0, 0, -0.1 * std::sin(x[1] + t);
    return m;
  };
  auto dx = [](const Vector& x, double t, std::size_t axis) {
    Matrix m = Matrix::Zero(2, 2);
    if (axis == 0) {
      m(0, 0) = 0.2 * std::cos(x[0]) * std::cos(t);
      m(1, 0) = 0.05 * x[1];
    } else {
      m(0, 1) = 0.1;
      m(1, 0) = 0.05 * x[0];
      m(1, 1) = -0.1 * std::sin(x[1] + t);
    }
    return m;
  };
  const auto exact = MetricTransform::state_time(2, theta, dt, dx);
  const auto fd = MetricTransform::state_time_fd(2, theta);
  const auto p = builtin::pendulum(0.5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 20; ++i) {
    const Vector x = vec2(u(rng), u(rng));
    const double t = u(rng);
    const Vector xd = p.f(x, t);
    CHECK((theta_dot(exact, x, t, xd) - theta_dot(fd, x, t, xd)).cwiseAbs().maxCoeff() <= 1e-5);
    const auto ge = generalized_jacobian(p, exact, x, t);
    const Matrix want = (theta(x, t) * p.jacobian(x, t) + theta_dot(exact, x, t, xd)) * theta(x, t).inverse();
    CHECK((ge.f - want).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("expression metric") {
  std::vector<std::vector<dsl::ScalarExpr>> e(2);
  e[0] = {dsl::parse_scalar("exp(0.1*sin(t))", 2), dsl::parse_scalar("0", 2)};
  e[1] = {dsl::parse_scalar("0", 2), dsl::parse_scalar("exp(0.1*sin(t))", 2)};
  const auto m = MetricTransform::from_exprs(e, false);
  const auto p = builtin::pendulum(0.5);
  const Vector x = vec2(0.5, 0.5);
  const auto g = generalized_jacobian(p, m, x, 1.0);
  CHECK((g.f - p.jacobian(x, 1.0) - 0.1 * std::cos(1.0) * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("feedback metric cancels the coupling blocks") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  const double k = 4.0;
  Matrix ja(2, 2), jb(1, 1), g(2, 1);
  ja << nd(rng), nd(rng), nd(rng), nd(rng);
  jb << nd(rng);
  g << nd(rng), nd(rng);
  Matrix j(3, 3);
  j << ja, k * g, -g.transpose(), jb;
  const auto m = MetricTransform::block_scaling({{2, 1.0}, {1, std::sqrt(k)}});
  const Vector x = Vector::Zero(3);
  const auto gj = generalized_jacobian(m, x, 0, x, j);
  CHECK(gj.fs.block(0, 2, 2, 1).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(gj.fs.block(2, 0, 1, 2).cwiseAbs().maxCoeff() <= 1e-10);
}
