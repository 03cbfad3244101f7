#include "weakon/flow.hpp"

#include "weakon/parallel.hpp"
#include "weakon/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace weakon {

void SolverConfig::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("solver horizon must be > 0");
  if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("solver step must be > 0");
  if (method == Method::Rkf45 && (!(rtol > 0.0) || !(atol > 0.0)))
    throw std::invalid_argument("rkf45 tolerances must be > 0");
  if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
}

const char* to_string(Terminal t) {
  switch (t) {
    case Terminal::ConvergedToEquilibrium: return "converged-to-equilibrium";
    case Terminal::StillMoving: return "still-moving";
    case Terminal::LeftDomain: return "left-domain";
  }
  return "?";
}

namespace {

template <class Rhs>
Vector rk4_step(const Rhs& g, double t, const Vector& y, double h) {
  const Vector k1 = g(t, y);
  const Vector k2 = g(t + 0.5 * h, y + (0.5 * h) * k1);
  const Vector k3 = g(t + 0.5 * h, y + (0.5 * h) * k2);
  const Vector k4 = g(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Runge-Kutta-Fehlberg 4(5); returns the fifth-order solution and a scaled
// error norm (<= 1 means acceptable).
template <class Rhs>
std::pair<Vector, double> rkf45_step(const Rhs& g, double t, const Vector& y, double h, double rtol, double atol) {
  const Vector k1 = g(t, y);
  const Vector k2 = g(t + h / 4.0, y + h * (k1 / 4.0));
  const Vector k3 = g(t + 3.0 * h / 8.0, y + h * (3.0 / 32.0 * k1 + 9.0 / 32.0 * k2));
  const Vector k4 =
      g(t + 12.0 * h / 13.0, y + h * (1932.0 / 2197.0 * k1 - 7200.0 / 2197.0 * k2 + 7296.0 / 2197.0 * k3));
  const Vector k5 = g(t + h, y + h * (439.0 / 216.0 * k1 - 8.0 * k2 + 3680.0 / 513.0 * k3 - 845.0 / 4104.0 * k4));
  const Vector k6 = g(t + h / 2.0, y + h * (-8.0 / 27.0 * k1 + 2.0 * k2 - 3544.0 / 2565.0 * k3 +
                                           1859.0 / 4104.0 * k4 - 11.0 / 40.0 * k5));
  const Vector y4 = y + h * (25.0 / 216.0 * k1 + 1408.0 / 2565.0 * k3 + 2197.0 / 4104.0 * k4 - 0.2 * k5);
  const Vector y5 =
      y + h * (16.0 / 135.0 * k1 + 6656.0 / 12825.0 * k3 + 28561.0 / 56430.0 * k4 - 9.0 / 50.0 * k5 + 2.0 / 55.0 * k6);
  double err = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
    err = std::max(err, std::abs(y5[i] - y4[i]) / sc);
  }
  return {y5, err};
}

// Advances y from t0 to t0 + horizon. on_step(step, t, y) runs after every
// accepted step and returns false to stop early; it may modify y.
template <class Rhs, class OnStep>
void drive(const Rhs& rhs, Vector& y, double t0, const SolverConfig& cfg, OnStep on_step) {
  cfg.validate();
  const double t_end = t0 + cfg.horizon;
  if (cfg.method == SolverConfig::Method::Rk4) {
    const double ratio = cfg.horizon / cfg.step;
    auto steps = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
    if (steps > cfg.max_steps) throw IntegrationError("fixed-step integration exceeds max_steps");
    for (std::size_t i = 0; i < steps; ++i) {
      const double t = t0 + static_cast<double>(i) * cfg.step;
      const double t_next = (i + 1 == steps) ? t_end : t0 + static_cast<double>(i + 1) * cfg.step;
      y = rk4_step(rhs, t, y, t_next - t);
      if (!y.allFinite()) throw IntegrationError("non-finite state at t=" + std::to_string(t_next));
      if (!on_step(i + 1, t_next, y)) return;
    }
    return;
  }
  double t = t0;
  double h = std::min(cfg.step, cfg.horizon);
  std::size_t accepted = 0;
  std::size_t attempts = 0;
  while (t < t_end) {
    if (++attempts > cfg.max_steps) throw IntegrationError("adaptive integration exceeds max_steps");
    const bool last = t + h >= t_end;
    const double hh = last ? t_end - t : h;
    auto [y_new, err] = rkf45_step(rhs, t, y, hh, cfg.rtol, cfg.atol);
    if (!std::isfinite(err)) err = 1e10;
    if (err <= 1.0) {
      t = last ? t_end : t + hh;
      y = std::move(y_new);
      if (!y.allFinite()) throw IntegrationError("non-finite state at t=" + std::to_string(t));
      ++accepted;
      if (!on_step(accepted, t, y)) return;
    }
    const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h = hh * factor;
    if (h < 1e-14 * std::max(1.0, std::abs(t))) throw IntegrationError("step size underflow at t=" + std::to_string(t));
  }
}

void classify(const SystemModel& system, Trajectory& traj, const SolverConfig& cfg) {
  const Vector& xt = traj.final_state();
  const double t_end = traj.times.back();
  traj.final_speed = system.f(xt, t_end).norm();
  const double window_start = t_end - 0.1 * (t_end - traj.times.front());
  traj.drift = 0.0;
  for (std::size_t i = traj.times.size(); i-- > 0 && traj.times[i] >= window_start;)
    traj.drift = std::max(traj.drift, (traj.states[i] - xt).norm());
  if (traj.terminal == Terminal::LeftDomain) return;
  traj.terminal = (traj.final_speed < cfg.eq_tol && traj.drift < cfg.drift_tol) ? Terminal::ConvergedToEquilibrium
                                                                                : Terminal::StillMoving;
}

}  // namespace

Trajectory integrate(const SystemModel& system, const Vector& x0, double t0, const SolverConfig& cfg) {
  if (static_cast<std::size_t>(x0.size()) != system.dim()) throw std::invalid_argument("x0 length mismatch");
  if (!system.domain().contains(x0)) throw std::invalid_argument("x0 is outside the domain of " + system.name());
  Trajectory traj;
  traj.times.push_back(t0);
  traj.states.push_back(x0);
  Vector y = x0;
  auto rhs = [&](double t, const Vector& x) { return system.f(x, t); };
  double last_t = t0;
  bool recorded_last = true;
  drive(rhs, y, t0, cfg, [&](std::size_t step, double t, Vector& x) {
    last_t = t;
    recorded_last = false;
    if (!system.domain().contains(x)) {
      traj.terminal = Terminal::LeftDomain;
      traj.times.push_back(t);
      traj.states.push_back(x);
      recorded_last = true;
      return false;
    }
    if (step % cfg.record_every == 0) {
      traj.times.push_back(t);
      traj.states.push_back(x);
      recorded_last = true;
    }
    return true;
  });
  if (!recorded_last) {
    traj.times.push_back(last_t);
    traj.states.push_back(y);
  }
  classify(system, traj, cfg);
  return traj;
}

// ------------------------------------------------------------ variational

namespace {

// Augmented state [x; vec(frame)] with the frame stored column-major.
struct Augmented {
  std::size_t n;
  std::size_t cols;

  Vector pack(const Vector& x, const Matrix& frame) const {
    Vector y(static_cast<Eigen::Index>(n + n * cols));
    y.head(static_cast<Eigen::Index>(n)) = x;
    y.tail(static_cast<Eigen::Index>(n * cols)) = Eigen::Map<const Vector>(frame.data(), frame.size());
    return y;
  }
  Vector state(const Vector& y) const { return y.head(static_cast<Eigen::Index>(n)); }
  Matrix frame(const Vector& y) const {
    return Eigen::Map<const Matrix>(y.data() + n, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
  }
  void set_frame(Vector& y, const Matrix& f) const {
    y.tail(static_cast<Eigen::Index>(n * cols)) = Eigen::Map<const Vector>(f.data(), f.size());
  }
};

auto variational_rhs(const SystemModel& system, const Augmented& aug) {
  return [&system, aug](double t, const Vector& y) {
    const Vector x = aug.state(y);
    const auto [fx, jac] = system.f_and_jacobian(x, t);
    const Matrix d = jac * aug.frame(y);
    Vector out(y.size());
    out.head(static_cast<Eigen::Index>(aug.n)) = fx;
    out.tail(static_cast<Eigen::Index>(aug.n * aug.cols)) = Eigen::Map<const Vector>(d.data(), d.size());
    return out;
  };
}

// Sum of log |R_jj| of the thin QR factor of z; throws on collapse.
double log_volume(const Matrix& z, Matrix* q_out = nullptr, std::vector<double>* logs = nullptr) {
  Eigen::HouseholderQR<Matrix> qr(z);
  const Matrix& packed = qr.matrixQR();
  double sum = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double r = std::abs(packed(j, j));
    if (!(r > std::numeric_limits<double>::min()) || !std::isfinite(r))
      throw IntegrationError("frame collapsed below representable floor; shorten the re-orthonormalization interval");
    sum += std::log(r);
    if (logs) logs->push_back(std::log(r));
  }
  if (q_out) {
    Matrix q = qr.householderQ() * Matrix::Identity(z.rows(), z.cols());
    // orient columns so that R has a positive diagonal
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      if (packed(j, j) < 0) q.col(j) = -q.col(j);
    *q_out = std::move(q);
  }
  return sum;
}

bool frame_badly_scaled(const Matrix& f) {
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    const double nrm = f.col(j).norm();
    if (!(nrm > 1e-13) || nrm > 1e13) return true;
  }
  return false;
}

}  // namespace

double tail_slope(const std::vector<double>& t, const std::vector<double>& y, double t_start) {
  double st = 0.0;
  double sy = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_start) continue;
    st += t[i];
    sy += y[i];
    ++cnt;
  }
  if (cnt < 2) throw std::invalid_argument("tail window holds fewer than two samples");
  const double mt = st / static_cast<double>(cnt);
  const double my = sy / static_cast<double>(cnt);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_start) continue;
    num += (t[i] - mt) * (y[i] - my);
    den += (t[i] - mt) * (t[i] - mt);
  }
  return num / den;
}

VolumeDecayRecord variational_flow(const SystemModel& system, const MetricTransform& metric, const Vector& x0,
                                   const Matrix& frame0, const SolverConfig& cfg, const VariationalOptions& opts) {
  const std::size_t n = system.dim();
  const auto order = static_cast<std::size_t>(frame0.cols());
  if (static_cast<std::size_t>(frame0.rows()) != n || order < 1 || order > n)
    throw std::invalid_argument("frame must be n x i with 1 <= i <= n");
  if (metric.dim() != n) throw std::invalid_argument("metric dimension mismatch");
  if (static_cast<std::size_t>(x0.size()) != n || !system.domain().contains(x0))
    throw std::invalid_argument("x0 is outside the domain of " + system.name());
  if (Eigen::FullPivLU<Matrix>(frame0).rank() < static_cast<Eigen::Index>(order))
    throw std::invalid_argument("frame columns are not independent");
  if (opts.reorth_interval < 1) throw std::invalid_argument("reorth_interval must be >= 1");

  const Augmented aug{n, order};
  VolumeDecayRecord rec;
  rec.order = order;
  double accumulated = 0.0;
  auto record = [&](double t, const Vector& y) {
    const Vector x = aug.state(y);
    rec.times.push_back(t);
    rec.log_volume.push_back(accumulated + log_volume(metric.theta(x, t) * aug.frame(y)));
  };
  Vector y = aug.pack(x0, frame0);
  record(0.0, y);
  drive(variational_rhs(system, aug), y, 0.0, cfg, [&](std::size_t step, double t, Vector& yy) {
    if (!system.domain().contains(aug.state(yy)))
      throw IntegrationError("trajectory left the domain at t=" + std::to_string(t));
    const Matrix f = aug.frame(yy);
    if (step % opts.reorth_interval == 0 || frame_badly_scaled(f)) {
      Matrix q;
      accumulated += log_volume(f, &q);
      aug.set_frame(yy, q);
    }
    if (step % cfg.record_every == 0 || t >= cfg.horizon) record(t, yy);
    return true;
  });
  if (rec.times.back() < cfg.horizon) record(cfg.horizon, y);
  rec.tail_start = cfg.horizon * (1.0 - opts.tail_fraction);
  rec.fitted_rate = tail_slope(rec.times, rec.log_volume, rec.tail_start);
  return rec;
}

void VolumeDecayRecord::attach_bound(const ContractionCertificate& cert) {
  bound = -cert.alpha;
  const double tol = 0.05 * std::abs(cert.alpha) + 1e-3;
  bound_satisfied = fitted_rate <= *bound + tol;
}

nlohmann::json VolumeDecayRecord::to_json() const {
  nlohmann::json j;
  j["order"] = order;
  j["fitted_rate"] = fitted_rate;
  j["tail_start"] = tail_start;
  j["horizon"] = times.empty() ? 0.0 : times.back();
  j["bound"] = bound ? nlohmann::json(*bound) : nlohmann::json(nullptr);
  j["bound_satisfied"] = bound_satisfied ? nlohmann::json(*bound_satisfied) : nlohmann::json(nullptr);
  return j;
}

double LyapunovSpectrum::sum() const {
  double s = 0.0;
  for (double e : exponents) s += e;
  return s;
}

nlohmann::json LyapunovSpectrum::to_json() const {
  return {{"exponents", exponents}, {"sum", sum()}, {"horizon", horizon}, {"reorth_interval", reorth_interval}};
}

LyapunovSpectrum lyapunov_spectrum(const SystemModel& system, const Vector& x0, std::size_t order,
                                   const SolverConfig& cfg, const LyapunovOptions& opts) {
  const std::size_t n = system.dim();
  if (order < 1 || order > n) throw std::invalid_argument("lyapunov order must be in [1, n]");
  if (static_cast<std::size_t>(x0.size()) != n || !system.domain().contains(x0))
    throw std::invalid_argument("x0 is outside the domain of " + system.name());
  if (opts.reorth_interval < 1) throw std::invalid_argument("reorth_interval must be >= 1");
  const Augmented aug{n, order};
  Vector y = aug.pack(x0, Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(order)));
  auto rhs = variational_rhs(system, aug);

  auto reorth_step = [&](Vector& yy, std::vector<double>* sums) {
    Matrix q;
    std::vector<double> logs;
    log_volume(aug.frame(yy), &q, &logs);
    aug.set_frame(yy, q);
    if (sums)
      for (std::size_t j = 0; j < order; ++j) (*sums)[j] += logs[j];
  };
  auto check_domain = [&](double t, const Vector& yy) {
    if (!system.domain().contains(aug.state(yy)))
      throw IntegrationError("trajectory left the domain at t=" + std::to_string(t));
  };

  double t0 = 0.0;
  if (opts.transient > 0.0) {
    SolverConfig pre = cfg;
    pre.horizon = opts.transient;
    drive(rhs, y, 0.0, pre, [&](std::size_t step, double t, Vector& yy) {
      check_domain(t, yy);
      if (step % opts.reorth_interval == 0 || frame_badly_scaled(aug.frame(yy))) reorth_step(yy, nullptr);
      return true;
    });
    reorth_step(y, nullptr);
    t0 = opts.transient;
  }
  std::vector<double> sums(order, 0.0);
  drive(rhs, y, t0, cfg, [&](std::size_t step, double t, Vector& yy) {
    check_domain(t, yy);
    if (step % opts.reorth_interval == 0 || frame_badly_scaled(aug.frame(yy))) reorth_step(yy, &sums);
    return true;
  });
  reorth_step(y, &sums);

  LyapunovSpectrum out;
  out.horizon = cfg.horizon;
  out.reorth_interval = opts.reorth_interval;
  out.final_state = aug.state(y);
  for (double s : sums) out.exponents.push_back(s / cfg.horizon);
  std::sort(out.exponents.begin(), out.exponents.end(), std::greater<double>());
  return out;
}

// ------------------------------------------------------------------ census

nlohmann::json CensusSummary::to_json() const {
  nlohmann::json eq = nlohmann::json::array();
  for (std::size_t i = 0; i < equilibria.size(); ++i) {
    nlohmann::json p = nlohmann::json::array();
    for (Eigen::Index a = 0; a < equilibria[i].size(); ++a) p.push_back(equilibria[i][a]);
    eq.push_back({{"point", p}, {"count", cluster_sizes[i]}});
  }
  return {{"total", total},
          {"converged", converged},
          {"left_domain", left_domain},
          {"fraction_converged", fraction_converged},
          {"equilibria", eq}};
}

CensusSummary equilibrium_census(const SystemModel& system, const Sampler& starts, const SolverConfig& cfg,
                                 double cluster_tol) {
  if (starts.dim() != system.dim()) throw std::invalid_argument("start sampler dimension mismatch");
  const std::size_t count = starts.state_count();
  std::vector<Terminal> terminals(count);
  std::vector<Vector> points(count);
  SolverConfig lean = cfg;
  lean.record_every = std::max<std::size_t>(1, cfg.record_every);
  parallel_for(count, [&](std::size_t i) {
    const Trajectory tr = integrate(system, starts.state(i), 0.0, lean);
    terminals[i] = tr.terminal;
    points[i] = tr.final_state();
  });

  CensusSummary s;
  s.total = count;
  s.terminals = terminals;
  s.terminal_points = points;
  for (std::size_t i = 0; i < count; ++i) {
    if (terminals[i] == Terminal::LeftDomain) ++s.left_domain;
    if (terminals[i] != Terminal::ConvergedToEquilibrium) continue;
    ++s.converged;
    bool placed = false;
    for (std::size_t c = 0; c < s.equilibria.size() && !placed; ++c) {
      if ((s.equilibria[c] - points[i]).norm() <= cluster_tol) {
        ++s.cluster_sizes[c];
        placed = true;
      }
    }
    if (!placed) {
      s.equilibria.push_back(points[i]);
      s.cluster_sizes.push_back(1);
    }
  }
  s.fraction_converged = count ? static_cast<double>(s.converged) / static_cast<double>(count) : 0.0;
  return s;
}

double integrate_lambda1(const SystemModel& system, const MetricTransform& metric, const Trajectory& traj) {
  double total = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double l1 = spectrum(generalized_jacobian(system, metric, traj.states[i], traj.times[i]).fs).lambda(0);
    if (i > 0) total += 0.5 * (traj.times[i] - traj.times[i - 1]) * (l1 + prev);
    prev = l1;
  }
  return total;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << std::setprecision(17);
  out << "t";
  const auto n = traj.states.empty() ? 0 : traj.states.front().size();
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  out << '\n';
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    out << traj.times[r];
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << traj.states[r][i];
    out << '\n';
  }
}

void write_volume_csv(const std::string& path, const VolumeDecayRecord& rec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << std::setprecision(17);
  out << "t,log_vol_" << rec.order << '\n';
  for (std::size_t r = 0; r < rec.times.size(); ++r) out << rec.times[r] << ',' << rec.log_volume[r] << '\n';
}

}  // namespace weakon
