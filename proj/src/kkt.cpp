#include "implreg/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace implreg {

namespace {

struct DualEval {
  double lam_max = 0.0;
  double comp = 0.0;
};

DualEval evaluate_dual(const MeasurementEnsemble& e, const SymMat& x,
                       const Vector& nu) {
  const SymMat b = adjoint(e, nu);
  const Matrix slack = x.matrix() - b.matrix() * x.matrix();
  return {max_eigenvalue(b), slack.norm()};
}

// Smoothed lambda_max(W^T A*(nu0 + N w) W) and its gradient in w.
double smoothed_max_eig(const MeasurementEnsemble& e, const Vector& nu0,
                        const Matrix& null_basis, const Matrix& comp_basis,
                        const Vector& w, double mu, Vector* grad) {
  const Vector nu = nu0 + null_basis * w;
  const Matrix b = comp_basis.transpose() * adjoint(e, nu).matrix() * comp_basis;
  const EigenDecomp ed = eigh_sym(SymMat(b));
  const double top = ed.values(0);
  const Vector shifted = ((ed.values.array() - top) / mu).exp().matrix();
  const double total = shifted.sum();
  if (grad != nullptr) {
    const Vector p = shifted / total;
    const Matrix inner_w = ed.vectors * p.asDiagonal() * ed.vectors.transpose();
    const SymMat weight(comp_basis * inner_w * comp_basis.transpose());
    *grad = null_basis.transpose() * apply(e, weight);
  }
  return top + mu * std::log(total);
}

// Lowers the top eigenvalue of A*(nu) on the complement of range(X) while
// staying in nu0 + span(N).
Vector refine_dual(const MeasurementEnsemble& e, const Vector& nu0,
                   const Matrix& null_basis, const Matrix& comp_basis,
                   double target) {
  Vector w = Vector::Zero(null_basis.cols());
  Vector g;
  double step = 1.0;
  auto restricted_max = [&](const Vector& v) {
    const Matrix b = comp_basis.transpose() * adjoint(e, nu0 + null_basis * v).matrix() * comp_basis;
    return max_eigenvalue(SymMat(b));
  };
  for (double mu : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    for (int it = 0; it < 300; ++it) {
      const double val = smoothed_max_eig(e, nu0, null_basis, comp_basis, w, mu, &g);
      const double gg = g.squaredNorm();
      if (gg < 1e-30) break;
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt) {
        const Vector trial = w - step * g;
        if (smoothed_max_eig(e, nu0, null_basis, comp_basis, trial, mu, nullptr) <=
            val - 1e-4 * step * gg) {
          w = trial;
          moved = true;
          step *= 2.0;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
      if (restricted_max(w) <= target) return nu0 + null_basis * w;
    }
  }
  return nu0 + null_basis * w;
}

// Barrier method for min t subject to W^T A*(nu0 + N w) W <= t I.
// Stops as soon as the largest eigenvalue drops to `target`.
Vector barrier_dual(const MeasurementEnsemble& e, const Vector& nu0, const Matrix& null_basis,
                    const Matrix& comp_basis, double target) {
  const Index c = comp_basis.cols();
  const Index q = null_basis.cols();
  auto restrict_to = [&](const Vector& nu) {
    return Matrix(comp_basis.transpose() * adjoint(e, nu).matrix() * comp_basis);
  };
  const Matrix base = restrict_to(nu0);
  std::vector<Matrix> dirs(static_cast<size_t>(q));
  for (Index j = 0; j < q; ++j) dirs[static_cast<size_t>(j)] = restrict_to(null_basis.col(j));
  const Matrix eye = Matrix::Identity(c, c);

  auto assemble = [&](const Vector& w) {
    Matrix mw = base;
    for (Index j = 0; j < q; ++j) mw += w(j) * dirs[static_cast<size_t>(j)];
    return Matrix(0.5 * (mw + mw.transpose()));
  };
  auto top_eig = [&](const Matrix& mw) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(mw, Eigen::EigenvaluesOnly).eigenvalues()(c - 1);
  };

  Vector w = Vector::Zero(q);
  Matrix mw = base;
  double lam = top_eig(mw);
  if (lam <= target) return nu0;
  double t = lam + 1.0;
  auto phi = [&](double s, const Vector& wv, double tv, bool& ok) {
    Eigen::LLT<Matrix> llt(tv * eye - assemble(wv));
    ok = llt.info() == Eigen::Success;
    if (!ok) return 0.0;
    return s * tv - 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };

  for (double s = 1.0; s < 1e12 * c; s *= 8.0) {
    for (int newton = 0; newton < 60; ++newton) {
      Eigen::LLT<Matrix> llt(t * eye - mw);
      if (llt.info() != Eigen::Success) return nu0 + null_basis * w;
      const Matrix linv = llt.matrixL().solve(eye);
      std::vector<Matrix> ys(static_cast<size_t>(q + 1));
      Vector grad(q + 1);
      for (Index j = 0; j < q; ++j) {
        ys[static_cast<size_t>(j)] = -(linv * dirs[static_cast<size_t>(j)] * linv.transpose());
        grad(j) = -ys[static_cast<size_t>(j)].trace();
      }
      ys[static_cast<size_t>(q)] = linv * linv.transpose();
      grad(q) = s - ys[static_cast<size_t>(q)].trace();
      Matrix hess(q + 1, q + 1);
      for (Index a = 0; a <= q; ++a)
        for (Index b = a; b <= q; ++b)
          hess(a, b) = hess(b, a) =
              (ys[static_cast<size_t>(a)].array() * ys[static_cast<size_t>(b)].array()).sum();
      hess.diagonal().array() += 1e-12 * (1.0 + hess.diagonal().maxCoeff());
      const Vector step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (!std::isfinite(decrement) || decrement < 1e-10) break;
      bool ok = false;
      const double f0 = phi(s, w, t, ok);
      double h = 1.0;
      Vector wn;
      double tn = t;
      for (int ls = 0; ls < 60; ++ls, h *= 0.5) {
        wn = w + h * step.head(q);
        tn = t + h * step(q);
        const double f1 = phi(s, wn, tn, ok);
        if (ok && f1 <= f0 - 0.25 * h * decrement) break;
        ok = false;
      }
      if (!ok) break;
      w = wn;
      t = tn;
      mw = assemble(w);
      lam = top_eig(mw);
      if (lam <= target) return nu0 + null_basis * w;
    }
    // Within c / s of the optimum: stop once the target is provably out of reach.
    if (t - static_cast<double>(c) / s > target) break;
  }
  return nu0 + null_basis * w;
}

}  // namespace

KKTCertificate kkt_check(const SymMat& x, const MeasurementEnsemble& e,
                         double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("kkt_check: tol must be positive");
  require_same_dim(x, SymMat::zero(e.n()), "kkt_check");
  if (!x.all_finite()) throw NumericalError("kkt_check: X has non-finite entries");

  const Index n = e.n();
  const Index m = e.m();
  KKTCertificate cert;
  cert.tol = tol;

  cert.feas_residual = residual(e, x).norm();
  // Relative to ||y||; absolute when y vanishes.
  const double y_norm = e.y().norm();
  cert.feasible_ok = cert.feas_residual <= tol * (y_norm > 0.0 ? y_norm : 1.0);

  const double lam_min = min_eigenvalue(x);
  cert.psd_violation = std::max(0.0, -lam_min);
  cert.psd_ok = lam_min >= -tol;

  // Columns vec(A_i X); target vec(X).
  Matrix cols(n * n, m);
  for (Index i = 0; i < m; ++i) {
    const Matrix ax = e.mat(i).matrix() * x.matrix();
    cols.col(i) = Eigen::Map<const Vector>(ax.data(), n * n);
  }
  const Vector target = Eigen::Map<const Vector>(x.matrix().data(), n * n);

  Eigen::JacobiSVD<Matrix> svd(cols, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cutoff = std::max(tol, 1e-12) * (sv.size() > 0 ? sv(0) : 0.0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff && sv(rank) > 0.0) ++rank;

  Vector nu = Vector::Zero(m);
  if (rank > 0) {
    const Vector coef =
        svd.matrixU().leftCols(rank).transpose() * target;
    nu = svd.matrixV().leftCols(rank) *
         coef.cwiseQuotient(sv.head(rank));
  }
  DualEval ev = evaluate_dual(e, x, nu);

  const double comp_bound = tol * std::max(1.0, x.frobenius_norm());
  if (ev.lam_max > 1.0 + tol && rank < m) {
    const Matrix null_basis = svd.matrixV().rightCols(m - rank);
    // Complement of the numerical range of X.
    const EigenDecomp xd = eigh_sym(x);
    const double xcut = tol * std::max(1.0, xd.values(0));
    Index k = 0;
    while (k < n && xd.values(k) > xcut) ++k;
    const Matrix comp_basis = k < n ? Matrix(xd.vectors.rightCols(n - k)) : Matrix(Matrix::Identity(n, n));
    const double target = 1.0 + 0.5 * tol;
    for (int attempt = 0; attempt < 2 && ev.lam_max > 1.0 + tol; ++attempt) {
      const Vector refined =
          attempt == 0 ? refine_dual(e, nu, null_basis, comp_basis, target)
                       : barrier_dual(e, nu, null_basis, comp_basis, target);
      const DualEval ev2 = evaluate_dual(e, x, refined);
      if (ev2.lam_max < ev.lam_max && ev2.comp <= std::max(comp_bound, ev.comp)) {
        nu = refined;
        ev = ev2;
      }
    }
  }

  cert.nu = nu;
  cert.max_eig_dual = ev.lam_max;
  cert.comp_residual = ev.comp;
  cert.dual_ok = ev.lam_max <= 1.0 + tol;
  cert.comp_ok = ev.comp <= comp_bound;
  cert.passed = cert.feasible_ok && cert.psd_ok && cert.dual_ok && cert.comp_ok;
  return cert;
}

}  // namespace implreg
