#pragma once

#include "weakon/linalg.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace weakon {

struct TimeWindow {
  double t0 = 0.0;
  double t1 = 0.0;
  std::size_t samples = 1;  // evenly spaced, endpoints included when samples > 1

  double at(std::size_t j) const;
};

// Finite set of (x, t) evaluation points over a box and optional time window.
// Sample index = state_index * time_count + time_index.
class Sampler {
 public:
  enum class Kind { Grid, Random, Explicit };

  static Sampler grid(Box box, std::size_t points_per_axis, std::optional<TimeWindow> window = std::nullopt);
  static Sampler random(Box box, std::size_t count, std::uint64_t seed,
                        std::optional<TimeWindow> window = std::nullopt);
  static Sampler points(std::vector<Vector> states, std::optional<TimeWindow> window = std::nullopt);
  // Every pairing of a state from `a` with a state from `b`, concatenated.
  static Sampler product(const Sampler& a, const Sampler& b);

  Kind kind() const { return kind_; }
  const Box& box() const { return box_; }
  std::size_t dim() const { return dim_; }
  const std::optional<TimeWindow>& window() const { return window_; }
  std::size_t points_per_axis() const { return points_per_axis_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t state_count() const { return state_count_; }
  std::size_t time_count() const { return window_ ? window_->samples : 1; }
  std::size_t total() const { return state_count() * time_count(); }

  Vector state(std::size_t i) const;
  double time(std::size_t j) const { return window_ ? window_->at(j) : 0.0; }
  std::pair<Vector, double> sample(std::size_t idx) const;

  // Grid with every spacing halved; coarse points are reproduced exactly.
  Sampler refined() const;
  Sampler with_window(std::optional<TimeWindow> window) const;

  nlohmann::json meta() const;

 private:
  Kind kind_ = Kind::Grid;
  Box box_;
  std::size_t dim_ = 0;
  std::size_t points_per_axis_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t state_count_ = 0;
  std::vector<Vector> explicit_;
  std::optional<TimeWindow> window_;
};

}  // namespace weakon
