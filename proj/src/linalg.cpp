#include "weakon/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace weakon {

bool Box::contains(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != bounds.size()) return false;
  for (std::size_t i = 0; i < bounds.size(); ++i)
    if (!(x[i] >= bounds[i].first && x[i] <= bounds[i].second)) return false;
  return true;
}

void Box::validate() const {
  if (bounds.empty()) throw std::invalid_argument("box has no axes");
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const auto [lo, hi] = bounds[i];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw std::invalid_argument("box axis " + std::to_string(i) + " must satisfy finite lo < hi");
  }
}

Box Box::uniform(std::size_t n, double lo, double hi) {
  Box b;
  b.bounds.assign(n, {lo, hi});
  return b;
}

Box Box::product(const Box& a, const Box& b) {
  Box r = a;
  r.bounds.insert(r.bounds.end(), b.bounds.begin(), b.bounds.end());
  return r;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace weakon
