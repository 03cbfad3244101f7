#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <utility>
#include <vector>

namespace weakon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Per-axis closed interval box [lo, hi].
struct Box {
  std::vector<std::pair<double, double>> bounds;

  std::size_t dim() const { return bounds.size(); }
  bool contains(const Vector& x) const;
  void validate() const;  // throws std::invalid_argument on lo >= hi or non-finite bounds

  static Box uniform(std::size_t n, double lo, double hi);
  static Box product(const Box& a, const Box& b);
};

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

}  // namespace weakon
