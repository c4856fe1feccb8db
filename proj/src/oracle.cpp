#include "implreg/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace implreg {

std::string to_string(OracleStatus s) {
  switch (s) {
    case OracleStatus::optimal: return "optimal";
    case OracleStatus::infeasible: return "infeasible";
    case OracleStatus::max_iters: return "max_iters";
  }
  return "unknown";
}

namespace {

// Residual level below which a refit is attempted at window boundaries.
constexpr double kPolishGate = 1e-4;
// Stalls below this absolute gap are slow convergence, not infeasibility.
constexpr double kStallGapFloor = 1e-4;

Eigen::LDLT<Matrix> factor_gram(const MeasurementEnsemble& e) {
  const Matrix g = e.gram();
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  const Vector& ev = es.eigenvalues();
  if (!(ev(0) > tol::kGramIndependence * ev(ev.size() - 1))) {
    throw NumericalError("Gram matrix is singular; measurements are dependent");
  }
  return Eigen::LDLT<Matrix>(g);
}

// Projection onto {X : A(X) = y}.
class AffineProjector {
 public:
  explicit AffineProjector(const MeasurementEnsemble& e)
      : e_(e), gram_(factor_gram(e)) {}

  Matrix operator()(const Matrix& v) const {
    const Index n = e_.n();
    const Vector r =
        e_.stacked() * Eigen::Map<const Vector>(v.data(), n * n) - e_.y();
    const Vector s = gram_.solve(r);
    const Vector flat = e_.stacked().transpose() * s;
    return v - Eigen::Map<const Matrix>(flat.data(), n, n);
  }

 private:
  const MeasurementEnsemble& e_;
  Eigen::LDLT<Matrix> gram_;
};

Matrix psd_part(const Matrix& v) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (v + v.transpose()));
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

// Refits Z on its dominant eigenspace: X = V S V^T with the smallest change
// to S that satisfies A(X) = y. Returns nothing if the fit leaves the cone or
// does not reduce the residual.
bool is_checkpoint(int iter, int base) {
  if (base <= 0 || iter % base != 0) return false;
  const int q = iter / base;
  return (q & (q - 1)) == 0;
}

// Gauss-Newton on a rank-k factor started from the top-k eigenpairs of z.
std::optional<Matrix> polish(const MeasurementEnsemble& e, const Matrix& z,
                             const Eigen::SelfAdjointEigenSolver<Matrix>& es, Index k) {
  if (k == 0) return std::nullopt;
  const Index n = z.rows();
  const Index m = e.m();
  const Vector lam = es.eigenvalues().tail(k).cwiseMax(0.0);
  Matrix u = es.eigenvectors().rightCols(k) * lam.cwiseSqrt().asDiagonal();
  auto resid = [&](const Matrix& f) { return residual(e, SymMat(f * f.transpose())); };
  Vector r = resid(u);
  const double floor = 1e-14 * std::max(1.0, e.y().norm());
  Matrix jac(m, n * k);
  for (int it = 0; it < 30 && r.norm() > floor; ++it) {
    for (Index i = 0; i < m; ++i) {
      const Matrix g = 2.0 * e.mat(i).matrix() * u;
      jac.row(i) = Eigen::Map<const Vector>(g.data(), n * k).transpose();
    }
    const Vector step = jac.completeOrthogonalDecomposition().solve(-r);
    const Eigen::Map<const Matrix> dir(step.data(), n, k);
    bool moved = false;
    for (double h = 1.0; h > 1e-4 && !moved; h *= 0.5) {
      const Matrix next = u + h * dir;
      const Vector rn = resid(next);
      if (rn.norm() < r.norm()) {
        u = next;
        r = rn;
        moved = true;
      }
    }
    if (!moved) break;
  }
  Matrix x = u * u.transpose();
  return Matrix(0.5 * (x + x.transpose()));
}

// Refits at several eigenvalue cuts; the first one that certifies is returned.
std::optional<std::pair<SymMat, KKTCertificate>> certified_polish(
    const MeasurementEnsemble& e, const Matrix& z, const OracleOptions& opts) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(z);
  const Vector& lam = es.eigenvalues();
  const Index n = z.rows();
  const double top = std::max(1.0, lam(n - 1));
  std::vector<Index> ranks;
  for (double rel : {std::sqrt(opts.tol), 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    Index k = 0;
    while (k < n && lam(n - 1 - k) > rel * top) ++k;
    ranks.push_back(k);
  }
  // Smallest eigenspace with as many free parameters as constraints.
  Index exact = 0;
  while (exact < n && exact * (exact + 1) / 2 < e.m()) ++exact;
  ranks.push_back(exact);
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  for (Index k : ranks) {
    auto polished = polish(e, z, es, k);
    if (!polished) continue;
    SymMat x(*polished);
    KKTCertificate cert = kkt_check(x, e, opts.certify_tol);
    if (cert.passed) return std::make_pair(std::move(x), std::move(cert));
  }
  return std::nullopt;
}

}  // namespace

SymMat min_frobenius_solution(const MeasurementEnsemble& e) {
  const Eigen::LDLT<Matrix> gram = factor_gram(e);
  return adjoint(e, gram.solve(e.y()));
}

OracleResult min_nuclear_psd(const MeasurementEnsemble& e,
                             const OracleOptions& opts) {
  const Index n = e.n();
  const AffineProjector project(e);
  const Matrix eye = Matrix::Identity(n, n);

  Matrix z = Matrix::Zero(n, n);
  Matrix u = Matrix::Zero(n, n);
  Matrix x(n, n), z_prev(n, n);
  double rho = opts.penalty;
  constexpr double kRhoMin = 1e-6, kRhoMax = 1e6;

  OracleResult out{SymMat::zero(n)};
  double window_best = std::numeric_limits<double>::infinity();
  double prev_window_best = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool infeasible = false;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    x = project(z - u - eye / rho);
    z_prev = z;
    z = psd_part(x + u);
    u += x - z;

    const double rp = (x - z).norm();
    const double rd = rho * (z - z_prev).norm();
    const double p_scale = 1.0 + std::max(x.norm(), z.norm());
    const double d_scale = 1.0 + rho * u.norm();
    if (it % opts.history_stride == 0) {
      out.primal_history.push_back(rp);
      out.dual_history.push_back(rd);
    }
    if (rp <= opts.tol * p_scale && rd <= opts.tol * d_scale) {
      converged = true;
      ++it;
      break;
    }

    // Primal residual stuck at a positive gap for a full window: the affine
    // set misses the PSD cone. The gap is absolute since the iterates of an
    // infeasible problem drift off to infinity.
    window_best = std::min(window_best, rp);
    if ((it + 1) % opts.stall_window == 0) {
      if (rp <= kPolishGate * p_scale && rd <= kPolishGate * d_scale) {
        if (auto done = certified_polish(e, z, opts)) {
          out.X = std::move(done->first);
          out.certificate = std::move(done->second);
          out.objective = out.X.trace();
          out.iters = it + 1;
          out.status = OracleStatus::optimal;
          out.message = "certified after eigenspace refit";
          return out;
        }
      }
      const double gain = prev_window_best - window_best;
      if (window_best > kStallGapFloor * (1.0 + e.y().norm()) &&
          std::isfinite(prev_window_best) &&
          gain < opts.stall_improvement * window_best) {
        infeasible = true;
        ++it;
        break;
      }
      prev_window_best = window_best;
      window_best = std::numeric_limits<double>::infinity();
    }

    if (opts.adapt_penalty && it < opts.adapt_iters && it % 10 == 9) {
      const double rp_rel = rp / p_scale;
      const double rd_rel = rd / d_scale;
      if (rp_rel > 10.0 * rd_rel && rho < kRhoMax) {
        rho *= 2.0;
        u *= 0.5;
      } else if (rd_rel > 10.0 * rp_rel && rho > kRhoMin) {
        rho *= 0.5;
        u *= 2.0;
      }
    } else if (opts.adapt_penalty && it + 1 >= opts.adapt_iters && is_checkpoint(it + 1, opts.adapt_iters)) {
      // Rare rebalancing on a geometric schedule.
      const double ratio = (rp / p_scale) / std::max(rd / d_scale, 1e-300);
      if (ratio > 10.0 || ratio < 0.1) {
        const double factor = std::clamp(std::sqrt(ratio), 0.01, 100.0);
        const double next = std::clamp(rho * factor, kRhoMin, kRhoMax);
        u *= rho / next;
        rho = next;
      }
    }
  }

  out.X = SymMat(z);
  out.objective = z.trace();
  out.iters = it;
  if (infeasible) {
    out.status = OracleStatus::infeasible;
    out.message = "primal residual stalled";
    return out;
  }
  out.certificate = kkt_check(out.X, e, opts.certify_tol);
  if (out.certificate.passed) {
    // Keep the refit only when it also certifies.
    if (auto done = certified_polish(e, z, opts)) {
      out.X = std::move(done->first);
      out.objective = out.X.trace();
      out.certificate = std::move(done->second);
    }
    out.status = OracleStatus::optimal;
    if (!converged) out.message = "certified at the iteration limit";
    return out;
  }
  if (auto done = certified_polish(e, z, opts)) {
    out.X = std::move(done->first);
    out.objective = out.X.trace();
    out.certificate = std::move(done->second);
    out.status = OracleStatus::optimal;
    out.message = "certified after eigenspace refit";
    return out;
  }
  out.status = OracleStatus::max_iters;
  out.message = converged ? "residuals converged but KKT certificate failed"
                          : "iteration limit reached";
  return out;
}

L1Result min_l1_nonneg(const Matrix& coeffs, const Vector& y,
                       const OracleOptions& opts) {
  if (coeffs.rows() != y.size()) {
    throw DimensionError("min_l1_nonneg: coefficient rows must match y");
  }
  const MeasurementEnsemble e = diagonal_ensemble(coeffs, y);
  const OracleResult res = min_nuclear_psd(e, opts);
  L1Result out;
  out.x = res.X.matrix().diagonal();
  out.status = res.status;
  out.objective = out.x.sum();
  return out;
}

bool psd_completable(const MeasurementEnsemble& e, double tol) {
  OracleOptions opts;
  opts.tol = tol;
  return min_nuclear_psd(e, opts).status == OracleStatus::optimal;
}

}  // namespace implreg
