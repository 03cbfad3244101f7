#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace weakon {

// Forward-mode dual number carrying first partials with respect to every
// state coordinate plus time (length n + 1 for an n-dimensional field).
class Dual {
 public:
  Dual() = default;
  Dual(double value, std::size_t width) : value_(value), partials_(width, 0.0) {}
  Dual(double value, std::vector<double> partials)
      : value_(value), partials_(std::move(partials)) {}

  static Dual variable(double value, std::size_t width, std::size_t index) {
    Dual d(value, width);
    d.partials_[index] = 1.0;
    return d;
  }

  double value() const { return value_; }
  const std::vector<double>& partials() const { return partials_; }
  std::size_t width() const { return partials_.size(); }
  double partial(std::size_t i) const { return partials_[i]; }

  Dual operator-() const {
    Dual r(-value_, partials_.size());
    for (std::size_t i = 0; i < partials_.size(); ++i) r.partials_[i] = -partials_[i];
    return r;
  }

  friend Dual operator+(const Dual& a, const Dual& b) {
    Dual r(a.value_ + b.value_, a.width());
    for (std::size_t i = 0; i < r.width(); ++i) r.partials_[i] = a.partials_[i] + b.partials_[i];
    return r;
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    Dual r(a.value_ - b.value_, a.width());
    for (std::size_t i = 0; i < r.width(); ++i) r.partials_[i] = a.partials_[i] - b.partials_[i];
    return r;
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.value_ * b.value_, a.width());
    for (std::size_t i = 0; i < r.width(); ++i)
      r.partials_[i] = a.partials_[i] * b.value_ + a.value_ * b.partials_[i];
    return r;
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    const double inv = 1.0 / b.value_;
    const double q = a.value_ * inv;
    Dual r(q, a.width());
    for (std::size_t i = 0; i < r.width(); ++i)
      r.partials_[i] = (a.partials_[i] - q * b.partials_[i]) * inv;
    return r;
  }

  friend Dual operator+(const Dual& a, double c) { return Dual(a.value_ + c, a.partials_); }
  friend Dual operator+(double c, const Dual& a) { return a + c; }
  friend Dual operator-(const Dual& a, double c) { return Dual(a.value_ - c, a.partials_); }
  friend Dual operator-(double c, const Dual& a) { return (-a) + c; }
  friend Dual operator*(const Dual& a, double c) { return a.scaled(a.value_ * c, c); }
  friend Dual operator*(double c, const Dual& a) { return a * c; }
  friend Dual operator/(const Dual& a, double c) { return a.scaled(a.value_ / c, 1.0 / c); }

  // value replaced by v, partials multiplied by the chain factor.
  Dual scaled(double v, double factor) const {
    Dual r(v, partials_.size());
    for (std::size_t i = 0; i < partials_.size(); ++i) r.partials_[i] = partials_[i] * factor;
    return r;
  }

 private:
  double value_ = 0.0;
  std::vector<double> partials_;
};

inline Dual sin(const Dual& a) { return a.scaled(std::sin(a.value()), std::cos(a.value())); }
inline Dual cos(const Dual& a) { return a.scaled(std::cos(a.value()), -std::sin(a.value())); }
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value());
  return a.scaled(e, e);
}
inline Dual tanh(const Dual& a) {
  const double th = std::tanh(a.value());
  return a.scaled(th, 1.0 - th * th);
}

// Integer power by repeated multiplication; exponent 0 yields constant 1.
inline Dual ipow(const Dual& a, unsigned exponent) {
  if (exponent == 0) return Dual(1.0, a.width());
  const double base = a.value();
  double pm1 = 1.0;
  for (unsigned i = 1; i < exponent; ++i) pm1 *= base;
  return a.scaled(pm1 * base, exponent * pm1);
}

inline double ipow(double a, unsigned exponent) {
  double r = 1.0;
  for (unsigned i = 0; i < exponent; ++i) r *= a;
  return r;
}

inline double value_of(double v) { return v; }
inline double value_of(const Dual& d) { return d.value(); }

}  // namespace weakon
