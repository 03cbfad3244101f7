#include "oracles.hpp"

#include "weakon/spectra.hpp"
#include "weakon/system.hpp"

#include <doctest.h>

#include <random>

using namespace weakon;

TEST_CASE("symmetric part") {
  Matrix skew(2, 2);
  skew << 0, 1, -1, 0;
  CHECK(sym_part(skew).isZero(0.0));
  Matrix j(2, 2);
  j << 0, 1, 0, -0.5;
  Matrix want(2, 2);
  want << 0, 0.5, 0.5, -0.5;
  CHECK(sym_part(j) == want);
  CHECK(sym_part(want) == want);
}

TEST_CASE("diagonal spectrum") {
  Vector d(3);
  d << 1, 3, -5;
  const auto s = spectrum(Matrix(d.asDiagonal()));
  CHECK(s.lambda(0) == 3.0);
  CHECK(s.lambda(1) == 1.0);
  CHECK(s.lambda(2) == -5.0);
  CHECK(s.top_sum(2) == 4.0);
  CHECK(sum_top_k(Matrix::Identity(3, 3), 2) == 2.0);
  CHECK_THROWS(sum_top_k(Matrix::Identity(3, 3), 0));
  CHECK_THROWS(sum_top_k(Matrix::Identity(3, 3), 4));
}

TEST_CASE("pendulum symmetric part: S_2 = -b everywhere, lambda_1 closed form") {
  const auto p = builtin::pendulum(0.5);
  for (double x0 = -6.0; x0 <= 6.0; x0 += 0.37) {
    Vector x(2);
    x << x0, 0.3;
    const Matrix h = sym_part(p.jacobian(x, 0));
    const auto s = spectrum(h);
    CHECK(s.top_sum(2) == doctest::Approx(-0.5).epsilon(1e-14));
    const auto [l1, l2] = oracle::eig2(h(0, 0), h(0, 1), h(1, 1));
    CHECK(std::abs(s.lambda(0) - l1) <= 1e-14);
    CHECK(std::abs(s.lambda(1) - l2) <= 1e-14);
  }
}

TEST_CASE("random 6x6 spectra match the characteristic-polynomial oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix h = oracle::random_symmetric(6, rng);
    const auto want = oracle::sym_eigenvalues(h);
    const auto got = spectrum(h);
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(got.lambda(i) - want[i]) <= 1e-8);
  }
}

TEST_CASE("eigenvectors diagonalize") {
  std::mt19937_64 rng(5);
  const Matrix h = oracle::random_symmetric(5, rng);
  const auto es = eigensystem(h);
  const Matrix d = es.vectors.transpose() * h * es.vectors;
  CHECK((d - Matrix(es.spectrum.eigenvalues.asDiagonal())).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((es.vectors.transpose() * es.vectors - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("ties keep a stable order and cumulative sums are consistent") {
  Matrix h = Matrix::Identity(4, 4) * 2.0;
  h(3, 3) = -1;
  const auto s = spectrum(h);
  CHECK(s.top_sum(3) == 6.0);
  CHECK(s.top_sum(4) == 5.0);
}

TEST_CASE("non-finite input is rejected") {
  Matrix h = Matrix::Zero(2, 2);
  h(0, 1) = h(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(spectrum(h));
}

TEST_CASE("Ky Fan trace at the top eigenvectors equals S_k") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix h = oracle::random_symmetric(5, rng);
    const auto es = eigensystem(h);
    for (std::size_t k = 1; k <= 5; ++k) {
      const OrthonormalFrame v(es.vectors.leftCols(static_cast<Eigen::Index>(k)).transpose());
      CHECK(std::abs(ky_fan_trace(h, v) - es.spectrum.top_sum(k)) <= 1e-9);
    }
  }
}

TEST_CASE("coordinate frame") {
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 1;
  h(1, 1) = 2;
  Matrix e1 = Matrix::Zero(1, 2);
  e1(0, 0) = 1;
  CHECK(ky_fan_trace(h, OrthonormalFrame(e1)) == 1.0);
  CHECK(sum_top_k(h, 1) == 2.0);
  Matrix bad = Matrix::Ones(2, 2);
  CHECK_THROWS(OrthonormalFrame{bad});
}

TEST_CASE("random frames never exceed S_k") {
  std::mt19937_64 rng(77);
  const Matrix h = oracle::random_symmetric(5, rng);
  const auto s = spectrum(h);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = 1 + static_cast<std::size_t>(i % 5);
    const auto v = OrthonormalFrame::random(k, 5, rng);
    CHECK(ky_fan_trace(h, v) <= s.top_sum(k) + 1e-9);
  }
}

TEST_CASE("ky_fan_max") {
  Matrix h = Matrix::Zero(3, 3);
  h(0, 0) = 5;
  CHECK(ky_fan_max(h, 1, 1) == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(ky_fan_max(Matrix::Zero(3, 3), 2, 10) == 0.0);
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = oracle::random_symmetric(4, rng);
    CHECK(std::abs(ky_fan_max(a, 2, 1000) - sum_top_k(a, 2)) <= 1e-4);
    const Matrix b = oracle::random_symmetric(5, rng);
    const auto r = ky_fan_search(b, 3);
    CHECK(r.best_sampled <= r.value + 1e-12);
    CHECK(std::abs(r.value - sum_top_k(b, 3)) <= 1e-6);
  }
}

TEST_CASE("S_k is convex") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = oracle::random_symmetric(5, rng);
    const Matrix b = oracle::random_symmetric(5, rng);
    const double th = u(rng);
    for (std::size_t k = 1; k <= 5; ++k)
      CHECK(sum_top_k(th * a + (1 - th) * b, k) <= th * sum_top_k(a, k) + (1 - th) * sum_top_k(b, k) + 1e-9);
  }
}
