#include "implreg/optimizers.hpp"

#include "implreg/constants.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace implreg {

namespace {

bool diverged(double obj, double obj0) {
  return !std::isfinite(obj) ||
         obj > tol::kDivergenceFactor * std::max(obj0, tol::kTiny);
}

// Real roots of c0 + c1 x + c2 x^2 + c3 x^3.
std::vector<double> real_roots(std::vector<double> c) {
  const double scale = std::max({std::abs(c[0]), std::abs(c[1]), std::abs(c[2]),
                                 std::abs(c[3])});
  if (scale == 0.0) return {};
  while (c.size() > 1 && std::abs(c.back()) <= 1e-14 * scale) c.pop_back();
  const auto deg = static_cast<Index>(c.size()) - 1;
  if (deg < 1) return {};
  Matrix companion = Matrix::Zero(deg, deg);
  for (Index i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (Index i = 0; i < deg; ++i) {
    companion(i, deg - 1) = -c[static_cast<size_t>(i)] / c.back();
  }
  Eigen::EigenSolver<Matrix> es(companion, false);
  std::vector<double> out;
  for (Index i = 0; i < deg; ++i) {
    const auto z = es.eigenvalues()(i);
    if (std::abs(z.imag()) <= 1e-8 * (1.0 + std::abs(z.real()))) {
      double x = z.real();
      // Newton polish on the cubic.
      for (int it = 0; it < 3; ++it) {
        double p = 0.0, dp = 0.0;
        for (Index j = deg; j >= 0; --j) {
          dp = dp * x + p;
          p = p * x + c[static_cast<size_t>(j)];
        }
        if (dp == 0.0) break;
        x -= p / dp;
      }
      out.push_back(x);
    }
  }
  return out;
}

}  // namespace

std::string to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::max_steps: return "max_steps";
    case Status::diverged: return "diverged";
  }
  return "unknown";
}

std::string StepPolicy::tag() const {
  std::ostringstream s;
  s << (kind == Kind::fixed ? "fixed" : "els") << "(" << eta << ")";
  return s.str();
}

double objective(const MeasurementEnsemble& e, const SymMat& x) {
  return residual(e, x).squaredNorm();
}

double residual_threshold(const MeasurementEnsemble& e, double residual_tol) {
  const double ny = e.y().norm();
  return ny > 0.0 ? residual_tol * ny : residual_tol;
}

SymMat outer(const Matrix& u) { return SymMat(u * u.transpose()); }

Matrix grad_f(const Matrix& u, const MeasurementEnsemble& e) {
  if (u.rows() != e.n()) {
    throw DimensionError("grad_f: U has " + std::to_string(u.rows()) +
                         " rows, ensemble expects " + std::to_string(e.n()));
  }
  const Vector r = residual(e, outer(u));
  return 4.0 * adjoint(e, r).matrix() * u;
}

double exact_line_search_step(const Matrix& u, const Matrix& g,
                              const MeasurementEnsemble& e, double eta_max) {
  if (g.squaredNorm() == 0.0) {
    throw std::invalid_argument("exact_line_search_step: zero search direction");
  }
  if (!(eta_max > 0.0)) {
    throw std::invalid_argument("exact_line_search_step: eta_max must be positive");
  }
  if (u.rows() != g.rows() || u.cols() != g.cols()) {
    throw DimensionError("exact_line_search_step: U and G shapes differ");
  }
  // phi(eta) = ||a + b eta + c eta^2||^2
  const Matrix ug = u * g.transpose();
  const Vector a = residual(e, outer(u));
  const Vector b = -apply(e, SymMat(ug + ug.transpose()));
  const Vector c = apply(e, outer(g));
  auto phi = [&](double eta) { return (a + eta * b + eta * eta * c).squaredNorm(); };

  const double ab = a.dot(b), bb = b.dot(b), ac = a.dot(c), bc = b.dot(c),
               cc = c.dot(c);
  // phi'/2 = ab + (bb + 2ac) eta + 3bc eta^2 + 2cc eta^3
  std::vector<double> cands = {0.0, eta_max};
  for (double root : real_roots({ab, bb + 2.0 * ac, 3.0 * bc, 2.0 * cc})) {
    if (root > 0.0 && root < eta_max) cands.push_back(root);
  }
  double best = 0.0, best_val = phi(0.0);
  for (double eta : cands) {
    const double v = phi(eta);
    if (v < best_val) {
      best_val = v;
      best = eta;
    }
  }
  return best;
}

Trajectory factored_gd(const MeasurementEnsemble& e, const Matrix& u0,
                       const GDConfig& cfg) {
  if (u0.rows() != e.n() || u0.cols() != cfg.d) {
    std::ostringstream msg;
    msg << "factored_gd: U0 is " << shape_string(u0) << ", expected " << e.n()
        << "x" << cfg.d;
    throw DimensionError(msg.str());
  }
  if (cfg.d < 1 || cfg.d > e.n() || !(cfg.step.eta > 0.0) ||
      !(cfg.residual_tol > 0.0) || cfg.max_steps < 0) {
    throw std::invalid_argument("factored_gd: invalid GDConfig");
  }
  if (u0.squaredNorm() == 0.0) {
    throw std::invalid_argument("factored_gd: U0 must be nonzero");
  }

  Matrix u = u0;
  SymMat x = outer(u);
  Vector r = residual(e, x);
  const double obj0 = r.squaredNorm();
  const double thr = residual_threshold(e, cfg.residual_tol);
  const long stride = std::max(1L, cfg.history_stride);

  Trajectory out{x};
  auto record = [&](long step) {
    out.history.push_back({step, static_cast<double>(step), r.squaredNorm(),
                           r.norm(), x.trace()});
  };
  record(0);

  long k = 0;
  for (;;) {
    if (r.norm() <= thr) {
      out.status = Status::converged;
      break;
    }
    if (k >= cfg.max_steps) {
      out.status = Status::max_steps;
      break;
    }
    const Matrix g = 4.0 * adjoint(e, r).matrix() * u;
    double eta = cfg.step.eta;
    if (cfg.step.kind == StepPolicy::Kind::clipped_exact_line_search) {
      if (g.squaredNorm() == 0.0) {
        out.status = Status::max_steps;
        out.message = "stationary point with nonzero residual";
        break;
      }
      eta = exact_line_search_step(u, g, e, cfg.step.eta);
    }
    u -= eta * g;
    x = outer(u);
    r = residual(e, x);
    ++k;
    if (diverged(r.squaredNorm(), obj0) || !u.allFinite()) {
      out.status = Status::diverged;
      out.message = "objective blew up at step " + std::to_string(k);
      break;
    }
    if (k % stride == 0) record(k);
  }
  if (out.history.back().step != k) record(k);
  out.final_X = x;
  out.final_U = u;
  out.steps = k;
  out.time = 4.0 * cfg.step.eta * static_cast<double>(k);
  return out;
}

Matrix svd_init(const SymMat& x_gd, Index d) {
  const Index n = x_gd.dim();
  if (d < 1 || d > n) {
    throw DimensionError("svd_init: need 1 <= d <= n");
  }
  const EigenDecomp eig = eigh_sym(x_gd);
  const double slack = 1e-8 * std::max(1.0, std::abs(eig.values(0)));
  for (Index k = 0; k < d; ++k) {
    if (eig.values(k) < -slack) {
      std::ostringstream msg;
      msg << "svd_init: eigenvalue " << k << " is " << eig.values(k)
          << "; X_gd is not PSD";
      throw NumericalError(msg.str());
    }
  }
  const Vector roots = eig.values.head(d).cwiseMax(0.0).cwiseSqrt();
  return eig.vectors.leftCols(d) * roots.asDiagonal();
}

Matrix random_init(Index n, Index d, double scale, std::uint64_t seed) {
  Rng rng(seed, 500);
  Matrix u(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) u(i, j) = rng.normal();
  return u * (scale / u.norm());
}

Matrix identity_init(Index n, double scale) {
  return Matrix::Identity(n, n) * (scale / std::sqrt(static_cast<double>(n)));
}

}  // namespace implreg
