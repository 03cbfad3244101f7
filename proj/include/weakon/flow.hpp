#pragma once

#include "weakon/certify.hpp"
#include "weakon/metrics.hpp"
#include "weakon/sampling.hpp"
#include "weakon/system.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace weakon {

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  enum class Method { Rk4, Rkf45 };

  Method method = Method::Rk4;
  double step = 0.01;  // fixed step, or initial step for rkf45
  double rtol = 1e-8;
  double atol = 1e-10;
  std::size_t max_steps = 50'000'000;
  double horizon = 100.0;
  std::size_t record_every = 1;
  double eq_tol = 1e-6;     // |f(x_T)| threshold for equilibrium
  double drift_tol = 1e-3;  // max |x(t) - x_T| over the last 10% of the horizon

  void validate() const;
};

enum class Terminal { ConvergedToEquilibrium, StillMoving, LeftDomain };
const char* to_string(Terminal t);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  Terminal terminal = Terminal::StillMoving;
  double final_speed = 0.0;  // |f(x_T)|
  double drift = 0.0;

  const Vector& final_state() const { return states.back(); }
};

Trajectory integrate(const SystemModel& system, const Vector& x0, double t0, const SolverConfig& cfg);

struct VariationalOptions {
  std::size_t reorth_interval = 10;  // steps between re-orthonormalizations
  double tail_fraction = 0.5;        // rate fitted over the last fraction of the horizon
};

struct VolumeDecayRecord {
  std::size_t order = 0;
  std::vector<double> times;
  std::vector<double> log_volume;  // log |dz_1 ^ ... ^ dz_i|, dz = Theta dx
  double fitted_rate = 0.0;
  double tail_start = 0.0;
  std::optional<double> bound;  // sup sampled S_i(F_s)
  std::optional<bool> bound_satisfied;

  // bound = -cert.alpha; satisfied when fitted <= bound + 0.05 |alpha| + 1e-3.
  void attach_bound(const ContractionCertificate& cert);
  nlohmann::json to_json() const;
};

// Co-integrates x and the frame dx_j' = J(x, t) dx_j from the given
// orthonormal columns; records log volumes of Theta dx at every step.
VolumeDecayRecord variational_flow(const SystemModel& system, const MetricTransform& metric, const Vector& x0,
                                   const Matrix& frame0, const SolverConfig& cfg, const VariationalOptions& opts = {});

struct LyapunovOptions {
  std::size_t reorth_interval = 10;
  double transient = 0.0;  // time discarded before accumulating
};

struct LyapunovSpectrum {
  std::vector<double> exponents;  // non-increasing
  double horizon = 0.0;
  std::size_t reorth_interval = 0;
  Vector final_state;

  double sum() const;
  nlohmann::json to_json() const;
};

// Benettin QR method; the frame starts as the first `order` unit vectors.
LyapunovSpectrum lyapunov_spectrum(const SystemModel& system, const Vector& x0, std::size_t order,
                                   const SolverConfig& cfg, const LyapunovOptions& opts = {});

struct CensusSummary {
  std::size_t total = 0;
  std::size_t converged = 0;
  std::size_t left_domain = 0;
  double fraction_converged = 0.0;
  std::vector<Vector> equilibria;
  std::vector<std::size_t> cluster_sizes;
  std::vector<Terminal> terminals;
  std::vector<Vector> terminal_points;

  nlohmann::json to_json() const;
};

CensusSummary equilibrium_census(const SystemModel& system, const Sampler& starts, const SolverConfig& cfg,
                                 double cluster_tol = 1e-3);

// Trapezoidal integral of lambda_1(F_s) along a recorded trajectory.
double integrate_lambda1(const SystemModel& system, const MetricTransform& metric, const Trajectory& traj);

// Least-squares slope of y against t over samples with t >= t_start.
double tail_slope(const std::vector<double>& t, const std::vector<double>& y, double t_start);

void write_trajectory_csv(const std::string& path, const Trajectory& traj);
void write_volume_csv(const std::string& path, const VolumeDecayRecord& rec);

}  // namespace weakon
