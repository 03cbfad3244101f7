#pragma once

// Reference computations that share no code with the library's eigensolver or
// autodiff.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Faddeev-LeVerrier: coefficients c[0..n] of det(lambda I - A) = sum c_j lambda^(n-j), c[0] = 1.
inline std::vector<double> char_poly(const Mat& a) {
  const auto n = a.rows();
  std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
  c[0] = 1.0;
  Mat m = Mat::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = a * m + c[static_cast<std::size_t>(k - 1)] * Mat::Identity(n, n);
    c[static_cast<std::size_t>(k)] = -(a * m).trace() / static_cast<double>(k);
  }
  return c;
}

inline double poly_eval(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (double ci : c) v = v * x + ci;
  return v;
}

inline double poly_deriv(const std::vector<double>& c, double x) {
  const std::size_t n = c.size() - 1;
  double v = 0.0;
  for (std::size_t j = 0; j < n; ++j) v = v * x + c[j] * static_cast<double>(n - j);
  return v;
}

// Eigenvalues of a symmetric matrix, descending: Durand-Kerner on the
// characteristic polynomial, then Newton polishing on the real parts.
inline std::vector<double> sym_eigenvalues(const Mat& a) {
  const auto c = char_poly(a);
  const std::size_t n = c.size() - 1;
  using C = std::complex<double>;
  double radius = 0.0;
  for (std::size_t j = 1; j <= n; ++j) radius = std::max(radius, std::abs(c[j]));
  radius = 1.0 + radius;
  std::vector<C> z(n);
  const C seed(0.4, 0.9);
  for (std::size_t i = 0; i < n; ++i) z[i] = radius * std::pow(seed, static_cast<double>(i));
  auto p = [&](C x) {
    C v = 0.0;
    for (double ci : c) v = v * x + ci;
    return v;
  };
  for (int it = 0; it < 2000; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      C den = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) den *= z[i] - z[j];
      const C step = p(z[i]) / den;
      z[i] -= step;
      change = std::max(change, std::abs(step));
    }
    if (change < 1e-15 * radius) break;
  }
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = z[i].real();
    for (int it = 0; it < 50; ++it) {
      const double d = poly_deriv(c, x);
      if (d == 0.0) break;
      const double s = poly_eval(c, x) / d;
      x -= s;
      if (std::abs(s) < 1e-16 * (1.0 + std::abs(x))) break;
    }
    r[i] = std::abs(x - z[i].real()) < 1e-4 * (1.0 + std::abs(x)) ? x : z[i].real();
  }
  std::sort(r.begin(), r.end(), std::greater<>());
  return r;
}

inline std::pair<double, double> eig2(double a, double b, double d) {
  // [[a, b], [b, d]]
  const double m = 0.5 * (a + d);
  const double r = std::hypot(0.5 * (a - d), b);
  return {m + r, m - r};
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  const Vec f0 = f(x);
  Mat j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x;
    Vec xm = x;
    xp[i] += h;
    xm[i] -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

inline Mat random_symmetric(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Mat m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = nd(rng);
  return m;
}

inline double top_sum(const std::vector<double>& eig, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += eig[i];
  return s;
}

}  // namespace oracle
