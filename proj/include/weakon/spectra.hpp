#pragma once

#include "weakon/linalg.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>

namespace weakon {

struct SpectraConfig {
  int max_sweeps = 100;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Eigenvalues ranked non-increasing, with cumulative[k-1] = S_k.
struct SymSpectrum {
  Vector eigenvalues;
  Vector cumulative;

  std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
  double lambda(std::size_t i) const { return eigenvalues[static_cast<Eigen::Index>(i)]; }  // 0-based
  double top_sum(std::size_t k) const { return cumulative[static_cast<Eigen::Index>(k) - 1]; }
};

struct Eigensystem {
  SymSpectrum spectrum;
  Matrix vectors;  // column j pairs with spectrum.eigenvalues[j]
};

// (M + M^T) / 2 with entry (i,j) stored identical to (j,i).
Matrix sym_part(const Matrix& m);

// Cyclic Jacobi rotations in row-major sweep order. Throws ConvergenceError
// when the off-diagonal mass is not reduced to rounding level within
// cfg.max_sweeps sweeps.
Eigensystem eigensystem(const Matrix& h, const SpectraConfig& cfg = {});
SymSpectrum spectrum(const Matrix& h, const SpectraConfig& cfg = {});

// S_k(H), 1 <= k <= n.
double sum_top_k(const Matrix& h, std::size_t k, const SpectraConfig& cfg = {});

// k x n matrix with orthonormal rows.
class OrthonormalFrame {
 public:
  // Throws std::invalid_argument unless V V^T = I_k within `tol` per entry.
  explicit OrthonormalFrame(Matrix rows, double tol = 1e-10);

  // Rows of a k x n standard-normal matrix, orthonormalized.
  static OrthonormalFrame random(std::size_t k, std::size_t n, std::mt19937_64& rng);

  const Matrix& rows() const { return rows_; }
  std::size_t k() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t n() const { return static_cast<std::size_t>(rows_.cols()); }

 private:
  Matrix rows_;
};

// Tr(V H V^T).
double ky_fan_trace(const Matrix& h, const OrthonormalFrame& v);

struct KyFanOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 0x5eedULL;
  bool refine = true;
  int max_refine_sweeps = 100;
};

struct KyFanResult {
  double value = 0.0;          // best trace found (refined when enabled)
  double best_sampled = 0.0;   // best over random frames only
  Matrix frame;                // k x n maximizing frame
  int refine_sweeps = 0;
};

// Lower-bound estimator of S_k that never calls the eigensolver: the best of
// `samples` random frames, then pairwise in/out plane rotations that raise the
// trace until the frame spans an invariant subspace.
KyFanResult ky_fan_search(const Matrix& h, std::size_t k, const KyFanOptions& opts = {});
double ky_fan_max(const Matrix& h, std::size_t k, std::size_t samples, std::uint64_t seed = 0x5eedULL);

}  // namespace weakon
