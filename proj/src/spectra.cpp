#include "weakon/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace weakon {

Matrix sym_part(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("sym_part: matrix must be square");
  Matrix s(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    s(i, i) = m(i, i);
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) s += a(i, j) * a(i, j);
  return std::sqrt(2.0 * s);
}

// Rotation (c, s) zeroing a(p,q) of the symmetric 2x2 block.
void jacobi_angle(double app, double aqq, double apq, double& c, double& s) {
  const double theta = (aqq - app) / (2.0 * apq);
  const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  c = 1.0 / std::sqrt(t * t + 1.0);
  s = t * c;
}

// A <- R^T A R for the plane rotation R acting on (p, q); a(p,q) set to zero.
void rotate(Matrix& a, Eigen::Index p, Eigen::Index q, double c, double s) {
  const Eigen::Index n = a.rows();
  const double app = a(p, p);
  const double aqq = a(q, q);
  const double apq = a(p, q);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const double arp = a(r, p);
    const double arq = a(r, q);
    a(r, p) = a(p, r) = c * arp - s * arq;
    a(r, q) = a(q, r) = s * arp + c * arq;
  }
  a(p, p) = c * c * app - 2.0 * s * c * apq + s * s * aqq;
  a(q, q) = s * s * app + 2.0 * s * c * apq + c * c * aqq;
  a(p, q) = a(q, p) = 0.0;
}

void check_square_finite(const Matrix& h) {
  if (h.rows() != h.cols() || h.rows() == 0) throw std::invalid_argument("matrix must be square and non-empty");
  if (!h.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
}

}  // namespace

Eigensystem eigensystem(const Matrix& h, const SpectraConfig& cfg) {
  check_square_finite(h);
  const Eigen::Index n = h.rows();
  Matrix a = sym_part(h);
  Matrix v = Matrix::Identity(n, n);
  const double scale = a.norm();
  const double tol = std::numeric_limits<double>::epsilon() * scale;

  bool converged = off_diagonal_norm(a) <= tol;
  for (int sweep = 0; sweep < cfg.max_sweeps && !converged; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        double c = 1.0;
        double s = 0.0;
        jacobi_angle(a(p, p), a(q, q), a(p, q), c, s);
        rotate(a, p, q, c, s);
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
    converged = off_diagonal_norm(a) <= tol;
  }
  if (!converged)
    throw ConvergenceError("symmetric eigensolver did not converge in " + std::to_string(cfg.max_sweeps) +
                           " sweeps");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });

  Eigensystem out;
  out.spectrum.eigenvalues.resize(n);
  out.spectrum.cumulative.resize(n);
  out.vectors.resize(n, n);
  double running = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.spectrum.eigenvalues[j] = a(src, src);
    running += a(src, src);
    out.spectrum.cumulative[j] = running;
    out.vectors.col(j) = v.col(src);
  }
  return out;
}

SymSpectrum spectrum(const Matrix& h, const SpectraConfig& cfg) { return eigensystem(h, cfg).spectrum; }

double sum_top_k(const Matrix& h, std::size_t k, const SpectraConfig& cfg) {
  if (k < 1 || k > static_cast<std::size_t>(h.rows()))
    throw std::invalid_argument("sum_top_k: k=" + std::to_string(k) + " out of range [1, " +
                                std::to_string(h.rows()) + "]");
  return spectrum(h, cfg).top_sum(k);
}

// ------------------------------------------------------------------- frames

namespace {

// Two passes of modified Gram-Schmidt over the rows.
Matrix orthonormalize_rows(Matrix m) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < i; ++j) m.row(i) -= m.row(i).dot(m.row(j)) * m.row(j);
      const double nrm = m.row(i).norm();
      if (nrm == 0.0) throw std::invalid_argument("frame rows are linearly dependent");
      m.row(i) /= nrm;
    }
  }
  return m;
}

}  // namespace

OrthonormalFrame::OrthonormalFrame(Matrix rows, double tol) : rows_(std::move(rows)) {
  if (rows_.rows() < 1 || rows_.rows() > rows_.cols())
    throw std::invalid_argument("frame must have 1 <= k <= n rows");
  const Matrix gram = rows_ * rows_.transpose();
  const Matrix err = gram - Matrix::Identity(rows_.rows(), rows_.rows());
  if (!(err.cwiseAbs().maxCoeff() <= tol)) throw std::invalid_argument("frame rows are not orthonormal");
}

OrthonormalFrame OrthonormalFrame::random(std::size_t k, std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng);
  return OrthonormalFrame(orthonormalize_rows(std::move(m)));
}

double ky_fan_trace(const Matrix& h, const OrthonormalFrame& v) {
  if (static_cast<std::size_t>(h.rows()) != v.n() || h.rows() != h.cols())
    throw std::invalid_argument("ky_fan_trace: dimension mismatch");
  return (v.rows() * h * v.rows().transpose()).trace();
}

namespace {

// Completes the k orthonormal rows of `frame` to an orthonormal basis of R^n.
Matrix complete_basis(const Matrix& frame) {
  const Eigen::Index k = frame.rows();
  const Eigen::Index n = frame.cols();
  Matrix q(n, n);
  q.topRows(k) = frame;
  Eigen::Index filled = k;
  for (Eigen::Index e = 0; e < n && filled < n; ++e) {
    Eigen::RowVectorXd cand = Eigen::RowVectorXd::Unit(n, e);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < filled; ++j) cand -= cand.dot(q.row(j)) * q.row(j);
    const double nrm = cand.norm();
    if (nrm < 1e-8) continue;
    q.row(filled++) = cand / nrm;
  }
  return q;
}

}  // namespace

KyFanResult ky_fan_search(const Matrix& h, std::size_t k, const KyFanOptions& opts) {
  check_square_finite(h);
  const auto n = static_cast<std::size_t>(h.rows());
  if (k < 1 || k > n) throw std::invalid_argument("ky_fan_search: k out of range");
  if (opts.samples < 1) throw std::invalid_argument("ky_fan_search: samples must be >= 1");
  const Matrix hs = sym_part(h);

  std::mt19937_64 rng(opts.seed);
  KyFanResult res;
  res.best_sampled = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < opts.samples; ++s) {
    OrthonormalFrame f = OrthonormalFrame::random(k, n, rng);
    const double tr = ky_fan_trace(hs, f);
    if (tr > res.best_sampled) {
      res.best_sampled = tr;
      res.frame = f.rows();
    }
  }
  res.value = res.best_sampled;
  if (!opts.refine || k == n) return res;

  // In basis Q the projected matrix is A = Q H Q^T; the frame is rows [0, k).
  Matrix q = complete_basis(res.frame);
  Matrix a = q * hs * q.transpose();
  a = sym_part(a);
  const double tol = std::numeric_limits<double>::epsilon() * std::max(hs.norm(), 1e-300);
  const auto kk = static_cast<Eigen::Index>(k);
  const auto nn = static_cast<Eigen::Index>(n);
  for (int sweep = 0; sweep < opts.max_refine_sweeps; ++sweep) {
    bool settled = true;
    for (Eigen::Index i = 0; i < kk; ++i) {
      for (Eigen::Index j = kk; j < nn; ++j) {
        const bool coupled = std::abs(a(i, j)) > tol;
        if (!coupled && a(i, i) >= a(j, j)) continue;
        settled = false;
        double c = 1.0;
        double s = 0.0;
        if (coupled) jacobi_angle(a(i, i), a(j, j), a(i, j), c, s);
        if (coupled) {
          rotate(a, i, j, c, s);
          const Eigen::RowVectorXd qi = q.row(i);
          const Eigen::RowVectorXd qj = q.row(j);
          q.row(i) = c * qi - s * qj;
          q.row(j) = s * qi + c * qj;
        }
        if (a(i, i) < a(j, j)) {
          // swap the in/out directions so the larger Rayleigh quotient stays in the frame
          for (Eigen::Index r = 0; r < nn; ++r) std::swap(a(r, i), a(r, j));
          for (Eigen::Index r = 0; r < nn; ++r) std::swap(a(i, r), a(j, r));
          q.row(i).swap(q.row(j));
        }
      }
    }
    res.refine_sweeps = sweep + 1;
    if (settled) break;
  }
  res.frame = q.topRows(kk);
  double tr = 0.0;
  for (Eigen::Index i = 0; i < kk; ++i) tr += a(i, i);
  res.value = std::max(res.best_sampled, tr);
  return res;
}

double ky_fan_max(const Matrix& h, std::size_t k, std::size_t samples, std::uint64_t seed) {
  KyFanOptions opts;
  opts.samples = samples;
  opts.seed = seed;
  return ky_fan_search(h, k, opts).value;
}

}  // namespace weakon
