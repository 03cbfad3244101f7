#include "oracles.hpp"

#include "weakon/certify.hpp"

#include <doctest.h>

#include <numbers>

using namespace weakon;

namespace {

Matrix diag(std::initializer_list<double> d) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double v : d) {
    m(i, i) = v;
    ++i;
  }
  return m;
}

Sampler pendulum_grid() {
  return Sampler::grid(Box{{{-2 * std::numbers::pi, 2 * std::numbers::pi}, {-4.0, 4.0}}}, 101);
}

}  // namespace

TEST_CASE("pendulum certifies at k = 2 with alpha = b") {
  const auto p = builtin::pendulum(0.5);
  const auto cert = certify_weak_contraction(p, MetricTransform::identity(2), 2, pendulum_grid());
  CHECK(cert.holds);
  CHECK(cert.samples_evaluated == 10201);
  CHECK(std::abs(cert.alpha - 0.5) <= 1e-12);
  const auto j = cert.to_json();
  for (const char* key : {"system", "metric", "k", "alpha", "holds", "worst_sample", "samples", "grid_meta",
                          "storage_meta", "mode", "assumptions"})
    CHECK(j.contains(key));
}

TEST_CASE("Van der Pol fails at k = 2 with worst sample on x0 = 0") {
  const auto v = builtin::vanderpol(1.0);
  const auto cert =
      certify_weak_contraction(v, MetricTransform::identity(2), 2, Sampler::grid(v.sample_box(), 101));
  CHECK_FALSE(cert.holds);
  CHECK(cert.alpha == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(cert.worst.x[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("diagonal linear system") {
  const auto l = builtin::linear(diag({-1, -2}));
  const auto s = Sampler::grid(l.sample_box(), 11);
  const auto m = MetricTransform::identity(2);
  CHECK(certify_weak_contraction(l, m, 1, s).alpha == doctest::Approx(1.0));
  CHECK(certify_weak_contraction(l, m, 2, s).alpha == doctest::Approx(3.0));
  const auto tr = certify_transverse(l, m, s);
  CHECK(tr.holds);
  CHECK(tr.alpha == doctest::Approx(2.0));
}

TEST_CASE("transverse margins") {
  const auto p = builtin::pendulum(0.5);
  const auto tr = certify_transverse(p, MetricTransform::identity(2), pendulum_grid());
  // lambda_2 of [[0, c], [c, -b]] with c = (1 - cos x0)/2 is largest at c = 0.
  double sup = -1e300;
  for (std::size_t i = 0; i < 101; ++i) {
    const double x0 = -2 * std::numbers::pi + 4 * std::numbers::pi * static_cast<double>(i) / 100.0;
    sup = std::max(sup, oracle::eig2(0.0, 0.5 * (1 - std::cos(x0)), -0.5).second);
  }
  CHECK(tr.alpha == doctest::Approx(-sup).epsilon(1e-12));
  CHECK(tr.alpha == doctest::Approx(0.5).epsilon(1e-12));
  const auto r = builtin::rotation();
  const auto rt = certify_transverse(r, MetricTransform::identity(2), Sampler::grid(r.sample_box(), 5));
  CHECK_FALSE(rt.holds);
  CHECK(rt.alpha == 0.0);
}

TEST_CASE("certification preconditions") {
  const auto p = builtin::pendulum(0.5);
  CHECK_THROWS(certify_weak_contraction(p, MetricTransform::identity(2), 3, pendulum_grid()));
  CHECK_THROWS(certify_weak_contraction(p, MetricTransform::identity(3), 2, pendulum_grid()));
  const auto tv = system_from_dsl("tv", "dx0 = -x0 + sin(t)");
  CHECK_THROWS(certify_weak_contraction(tv, MetricTransform::identity(1), 1, Sampler::grid(tv.sample_box(), 5)));
  const auto ok = certify_weak_contraction(tv, MetricTransform::identity(1), 1,
                                           Sampler::grid(tv.sample_box(), 5, TimeWindow{0, 6, 7}));
  CHECK(ok.holds);
  CHECK(ok.samples_evaluated == 35);
}

TEST_CASE("storage adds k gamma-dot and enforces the bound") {
  const auto l = builtin::linear(diag({-1, -2}));
  const auto s = Sampler::grid(l.sample_box(), 5, TimeWindow{0, 2 * std::numbers::pi, 9});
  auto g = StorageFunction::from_expr(dsl::parse_scalar("0.1*sin(t)", 2), 0.1, "0.1 sin t");
  const auto cert = certify_weak_contraction(l, MetricTransform::identity(2), 2, s, &g);
  CHECK(cert.alpha == doctest::Approx(3.0 - 2 * 0.1).epsilon(1e-12));
  CHECK(cert.to_json()["storage_meta"]["bound"] == 0.1);
  auto bad = StorageFunction::from_expr(dsl::parse_scalar("sin(t)", 2), 0.1, "sin t");
  CHECK_THROWS_AS(certify_weak_contraction(l, MetricTransform::identity(2), 2, s, &bad), MetricError);
}

TEST_CASE("nested grids: sup is non-decreasing under refinement") {
  const auto v = builtin::vanderpol(1.0);
  const auto m = MetricTransform::identity(2);
  const auto coarse = Sampler::grid(Box{{{-2.5, 2.0}, {-3, 3}}}, 10);
  const auto fine = coarse.refined();
  CHECK(fine.points_per_axis() == 19);
  for (std::size_t k = 1; k <= 2; ++k) {
    const double a0 = certify_weak_contraction(v, m, k, coarse).alpha;
    const double a1 = certify_weak_contraction(v, m, k, fine).alpha;
    CHECK(a1 <= a0);
  }
}

TEST_CASE("results do not depend on the thread count") {
  const auto v = builtin::vanderpol(1.0);
  const auto s = Sampler::random(v.sample_box(), 2000, 99);
  const auto a = certify_weak_contraction(v, MetricTransform::identity(2), 1, s);
  const auto b = certify_weak_contraction(v, MetricTransform::identity(2), 1, s);
  CHECK(a.to_json().dump() == b.to_json().dump());
}

TEST_CASE("dimension bound") {
  const auto l = builtin::linear(diag({-1, -2}));
  const auto m = MetricTransform::identity(2);
  const auto d1 = dimension_bound(l, m, Sampler::grid(l.sample_box(), 5));
  REQUIRE(d1.k_star);
  CHECK(*d1.k_star == 1);
  const auto p = builtin::pendulum(0.5);
  const auto d2 = dimension_bound(p, m, pendulum_grid());
  REQUIRE(d2.k_star);
  CHECK(*d2.k_star == 2);
  CHECK(d2.per_k[0].alpha == doctest::Approx(-oracle::eig2(0.0, 1.0, -0.5).first).epsilon(1e-12));
  const auto r = builtin::rotation();
  const auto d3 = dimension_bound(r, m, Sampler::grid(r.sample_box(), 5));
  CHECK_FALSE(d3.k_star);
  const auto l3 = builtin::linear(diag({1, 0.5, -3}));
  const auto d4 = dimension_bound(l3, MetricTransform::identity(3), Sampler::grid(l3.sample_box(), 3));
  REQUIRE(d4.k_star);
  CHECK(*d4.k_star == 3);
  CHECK(d4.interpretation.find("< 3") != std::string::npos);
}

TEST_CASE("epsilon search") {
  const auto p = builtin::pendulum(0.5);
  const auto low = builtin::linear(Matrix::Constant(1, 1, -5.0), "lower");
  SUBCASE("decoupled accepts eps = 1") {
    const auto c = hierarchical(p, low, Coupling::constant(Matrix::Zero(2, 1)));
    const auto r = epsilon_search(c, 2, Sampler::grid(c.model.sample_box(), 21));
    CHECK(r.found);
    CHECK(r.epsilon == 1.0);
  }
  SUBCASE("coupled 3x3 example") {
    Matrix g(2, 1);
    g << 10, 10;
    const auto c = hierarchical(p, low, Coupling::constant(g));
    const auto s = Sampler::grid(c.model.sample_box(), 21);
    const auto r = epsilon_search(c, 2, s);
    REQUIRE(r.found);
    CHECK(r.epsilon > 0.0);
    CHECK(r.epsilon <= 1.0);
    REQUIRE(r.certificate);
    CHECK(r.certificate->alpha > 0.0);
    // Direct evaluation at the returned epsilon.
    const auto direct = certify_weak_contraction(c.model, c.epsilon_metric(r.epsilon), 2, s);
    CHECK(direct.alpha == r.certificate->alpha);
    if (r.epsilon < 1.0)
      CHECK_FALSE(certify_weak_contraction(c.model, c.epsilon_metric(2 * r.epsilon), 2, s).holds);
  }
  SUBCASE("violated hypothesis fails for every epsilon") {
    const auto up = builtin::linear(Matrix::Constant(1, 1, 0.5), "up");
    const auto c = hierarchical(p, up, Coupling::constant(Matrix::Ones(2, 1)));
    const auto r = epsilon_search(c, 2, Sampler::grid(c.model.sample_box(), 11));
    CHECK_FALSE(r.found);
    CHECK_FALSE(r.hypothesis.holds);
  }
}
