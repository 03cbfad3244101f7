#include "weakon/sampling.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace weakon {

double TimeWindow::at(std::size_t j) const {
  if (samples <= 1) return t0;
  return t0 + (t1 - t0) * static_cast<double>(j) / static_cast<double>(samples - 1);
}

namespace {
void check_window(const std::optional<TimeWindow>& w) {
  if (!w) return;
  if (!std::isfinite(w->t0) || !std::isfinite(w->t1) || w->t1 < w->t0 || w->samples < 1)
    throw std::invalid_argument("time window must satisfy finite t0 <= t1 and samples >= 1");
}
}  // namespace

Sampler Sampler::grid(Box box, std::size_t points_per_axis, std::optional<TimeWindow> window) {
  box.validate();
  check_window(window);
  if (points_per_axis < 1) throw std::invalid_argument("grid needs at least one point per axis");
  Sampler s;
  s.kind_ = Kind::Grid;
  s.dim_ = box.dim();
  s.box_ = std::move(box);
  s.points_per_axis_ = points_per_axis;
  s.window_ = window;
  double count = std::pow(static_cast<double>(points_per_axis), static_cast<double>(s.dim_));
  if (count > 1e9) throw std::invalid_argument("grid too large");
  s.state_count_ = static_cast<std::size_t>(count);
  return s;
}

Sampler Sampler::random(Box box, std::size_t count, std::uint64_t seed, std::optional<TimeWindow> window) {
  box.validate();
  check_window(window);
  if (count < 1) throw std::invalid_argument("random sampler needs count >= 1");
  Sampler s;
  s.kind_ = Kind::Random;
  s.dim_ = box.dim();
  s.seed_ = seed;
  s.window_ = window;
  std::mt19937_64 rng(seed);
  s.explicit_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vector x(static_cast<Eigen::Index>(s.dim_));
    for (std::size_t a = 0; a < s.dim_; ++a) {
      std::uniform_real_distribution<double> u(box.bounds[a].first, box.bounds[a].second);
      x[static_cast<Eigen::Index>(a)] = u(rng);
    }
    s.explicit_.push_back(std::move(x));
  }
  s.box_ = std::move(box);
  s.state_count_ = count;
  return s;
}

Sampler Sampler::points(std::vector<Vector> states, std::optional<TimeWindow> window) {
  check_window(window);
  if (states.empty()) throw std::invalid_argument("explicit sampler needs at least one point");
  Sampler s;
  s.kind_ = Kind::Explicit;
  s.dim_ = static_cast<std::size_t>(states.front().size());
  for (const auto& x : states)
    if (static_cast<std::size_t>(x.size()) != s.dim_) throw std::invalid_argument("explicit points differ in dimension");
  // bounding box, for reporting
  s.box_.bounds.resize(s.dim_);
  for (std::size_t a = 0; a < s.dim_; ++a) {
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& x : states) {
      lo = std::min(lo, x[static_cast<Eigen::Index>(a)]);
      hi = std::max(hi, x[static_cast<Eigen::Index>(a)]);
    }
    s.box_.bounds[a] = {lo, hi};
  }
  s.state_count_ = states.size();
  s.explicit_ = std::move(states);
  s.window_ = window;
  return s;
}

Sampler Sampler::product(const Sampler& a, const Sampler& b) {
  std::vector<Vector> states;
  states.reserve(a.state_count() * b.state_count());
  for (std::size_t i = 0; i < a.state_count(); ++i) {
    const Vector xa = a.state(i);
    for (std::size_t j = 0; j < b.state_count(); ++j) {
      const Vector xb = b.state(j);
      Vector x(xa.size() + xb.size());
      x << xa, xb;
      states.push_back(std::move(x));
    }
  }
  return points(std::move(states), a.window() ? a.window() : b.window());
}

Vector Sampler::state(std::size_t i) const {
  if (i >= state_count_) throw std::out_of_range("sample index out of range");
  if (kind_ != Kind::Grid) return explicit_[i];
  Vector x(static_cast<Eigen::Index>(dim_));
  // last axis varies fastest
  for (std::size_t a = dim_; a-- > 0;) {
    const std::size_t k = i % points_per_axis_;
    i /= points_per_axis_;
    const auto [lo, hi] = box_.bounds[a];
    x[static_cast<Eigen::Index>(a)] =
        points_per_axis_ == 1 ? 0.5 * (lo + hi)
                              : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points_per_axis_ - 1);
  }
  return x;
}

std::pair<Vector, double> Sampler::sample(std::size_t idx) const {
  const std::size_t tc = time_count();
  return {state(idx / tc), time(idx % tc)};
}

Sampler Sampler::refined() const {
  if (kind_ != Kind::Grid) throw std::logic_error("only grid samplers can be refined");
  std::optional<TimeWindow> w = window_;
  if (w && w->samples > 1) w->samples = 2 * w->samples - 1;
  return grid(box_, points_per_axis_ > 1 ? 2 * points_per_axis_ - 1 : 1, w);
}

Sampler Sampler::with_window(std::optional<TimeWindow> window) const {
  check_window(window);
  Sampler s = *this;
  s.window_ = window;
  return s;
}

nlohmann::json Sampler::meta() const {
  nlohmann::json j;
  switch (kind_) {
    case Kind::Grid:
      j["kind"] = "grid";
      j["points_per_axis"] = points_per_axis_;
      break;
    case Kind::Random:
      j["kind"] = "random";
      j["seed"] = seed_;
      break;
    case Kind::Explicit: j["kind"] = "explicit"; break;
  }
  nlohmann::json box = nlohmann::json::array();
  for (const auto& [lo, hi] : box_.bounds) box.push_back({lo, hi});
  j["box"] = box;
  j["state_samples"] = state_count_;
  if (window_) j["time_window"] = {{"t0", window_->t0}, {"t1", window_->t1}, {"samples", window_->samples}};
  j["total_samples"] = total();
  return j;
}

}  // namespace weakon
