#include "implreg/ode.hpp"
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

// Packed upper triangle, column by column.
void pack_upper(const Matrix& x, double* out) {
  const Index n = x.rows();
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i <= j; ++i) *out++ = x(i, j);
}

void unpack_upper(const double* in, Matrix& x) {
  const Index n = x.rows();
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i <= j; ++i) {
      x(i, j) = *in;
      x(j, i) = *in++;
    }
}

void require_psd(const SymMat& x, const char* who) {
  const double floor = -tol::kPsdSlack * std::max(1.0, x.frobenius_norm());
  const double lo = min_eigenvalue(x);
  if (lo < floor) {
    std::ostringstream msg;
    msg << who << ": X0 must be PSD, min eigenvalue " << lo;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

double gram_spectral_bound(const MeasurementEnsemble& e) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(e.gram(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

Trajectory gd_on_X(const MeasurementEnsemble& e, const SymMat& x0, double eta,
                   long max_steps, double residual_tol, bool project,
                   long history_stride) {
  require_same_dim(x0, SymMat::zero(e.n()), "gd_on_X");
  if (!(eta > 0.0) || !(residual_tol > 0.0)) {
    throw std::invalid_argument("gd_on_X: eta and residual_tol must be positive");
  }
  SymMat x = x0;
  Vector r = residual(e, x);
  const double obj0 = r.squaredNorm();
  const double thr = residual_threshold(e, residual_tol);
  const long stride = std::max(1L, history_stride);

  Trajectory out{x};
  auto record = [&](long step) {
    out.history.push_back({step, eta * static_cast<double>(step),
                           r.squaredNorm(), r.norm(), nuclear_norm(x)});
  };
  record(0);
  long k = 0;
  for (;;) {
    if (r.norm() <= thr) {
      out.status = Status::converged;
      break;
    }
    if (k >= max_steps) {
      out.status = Status::max_steps;
      break;
    }
    x -= eta * adjoint(e, r);
    if (project) x = psd_project(x);
    r = residual(e, x);
    ++k;
    if (diverged(r.squaredNorm(), obj0) || !x.all_finite()) {
      out.status = Status::diverged;
      out.message = "objective blew up at step " + std::to_string(k);
      break;
    }
    if (k % stride == 0) record(k);
  }
  if (out.status != Status::diverged && out.history.back().step != k) record(k);
  out.final_X = x;
  out.steps = k;
  out.time = eta * static_cast<double>(k);
  return out;
}

Trajectory gradient_flow_ode(const MeasurementEnsemble& e, const SymMat& x0,
                             const ODEConfig& cfg) {
  require_same_dim(x0, SymMat::zero(e.n()), "gradient_flow_ode");
  if (!(cfg.rel_tol > 0) || !(cfg.abs_tol > 0) || !(cfg.t_max > 0) ||
      !(cfg.residual_tol > 0)) {
    throw std::invalid_argument("gradient_flow_ode: ODEConfig values must be positive");
  }
  require_psd(x0, "gradient_flow_ode");

  const Index n = e.n();
  const Index m = e.m();
  const Index packed = n * (n + 1) / 2;
  const Index dim = packed + (cfg.track_dual ? m : 0);
  const Matrix& stacked = e.stacked();
  const Vector& y = e.y();
  const double thr = residual_threshold(e, cfg.residual_tol);
  const double abs_tol = cfg.abs_tol * std::min(1.0, x0.frobenius_norm());

  Trajectory out{x0};
  if (cfg.track_dual) out.integrated_dual = Vector::Zero(m);
  Vector r0 = residual(e, x0);
  const double obj0 = r0.squaredNorm();
  out.history.push_back({0, 0.0, obj0, r0.norm(), nuclear_norm(x0)});
  if (r0.norm() <= thr) {
    out.status = Status::converged;
    return out;
  }

  // Workspaces reused by the right-hand side.
  Matrix xw(n, n), bw(n, n), dw(n, n);
  Vector rw(m), flat(n * n);
  auto residual_of = [&](const double* packed_x) {
    unpack_upper(packed_x, xw);
    rw.noalias() = stacked * Eigen::Map<const Vector>(xw.data(), n * n);
    rw -= y;
  };
  ode::Rhs rhs = [&](double, const ode::State& s, ode::State& ds) {
    ds.resize(dim);
    residual_of(s.data());
    flat.noalias() = stacked.transpose() * rw;
    bw = Eigen::Map<const Matrix>(flat.data(), n, n);
    dw.noalias() = -bw * xw;
    dw -= xw * bw;
    pack_upper(dw, ds.data());
    if (cfg.track_dual) ds.tail(m) = -rw;
  };

  bool hit_residual = false;
  bool blew_up = false;
  const long stride = std::max(1L, cfg.history_stride);
  ode::Observer observe = [&](double t, const ode::State& s, long step) {
    residual_of(s.data());
    const double obj = rw.squaredNorm();
    if (diverged(obj, obj0)) {
      blew_up = true;
      return true;
    }
    hit_residual = rw.norm() <= thr;
    if (step % stride == 0 || hit_residual) {
      out.history.push_back({step, t, obj, rw.norm(), nuclear_norm(SymMat(xw))});
    }
    return hit_residual;
  };

  ode::State s0 = ode::State::Zero(dim);
  pack_upper(x0.matrix(), s0.data());
  ode::Options opts;
  opts.rel_tol = cfg.rel_tol;
  opts.abs_tol = abs_tol;
  opts.t_max = cfg.t_max;
  opts.max_steps = cfg.max_steps;
  // Round-off leaves slightly negative eigenvalues in directions the flow has
  // shrunk; the matrix flow amplifies them once those directions turn
  // unstable, so accepted states are clipped back to the cone.
  Matrix pw(n, n);
  Eigen::SelfAdjointEigenSolver<Matrix> pes(n);
  ode::Projection keep_psd = [&](ode::State& s) {
    unpack_upper(s.data(), pw);
    pes.compute(pw);
    if (pes.info() != Eigen::Success || pes.eigenvalues()(0) >= 0.0) return false;
    pw = pes.eigenvectors() * pes.eigenvalues().cwiseMax(0.0).asDiagonal() *
         pes.eigenvectors().transpose();
    pack_upper(pw, s.data());
    return true;
  };
  const ode::Result res =
      ode::integrate_dp45(rhs, std::move(s0), 0.0, opts, observe, keep_psd);

  Matrix xf(n, n);
  unpack_upper(res.y.data(), xf);
  out.final_X = SymMat(xf);
  out.steps = res.accepted;
  out.time = res.t;
  if (cfg.track_dual) out.integrated_dual = res.y.tail(m);

  switch (res.outcome) {
    case ode::Outcome::stopped:
      out.status = blew_up ? Status::diverged : Status::converged;
      if (blew_up) out.message = "objective blew up";
      break;
    case ode::Outcome::reached_t_max:
    case ode::Outcome::max_steps:
      out.status = Status::max_steps;
      break;
    case ode::Outcome::step_underflow:
      out.status = Status::diverged;
      out.message = "step size underflow at t = " + std::to_string(res.t);
      break;
    case ode::Outcome::non_finite:
      out.status = Status::diverged;
      out.message = "non-finite state at t = " + std::to_string(res.t);
      break;
  }
  if (out.history.back().step != res.accepted) {
    const Vector rf = residual(e, out.final_X);
    out.history.push_back({res.accepted, res.t, rf.squaredNorm(), rf.norm(),
                           nuclear_norm(out.final_X)});
  }
  if (out.final_X.all_finite()) {
    const double lo = min_eigenvalue(out.final_X);
    if (lo < -10.0 * abs_tol) {
      std::ostringstream msg;
      msg << (out.message.empty() ? "" : "; ") << "PSD violation: min eigenvalue "
          << lo;
      out.message += msg.str();
    }
  }
  return out;
}

SymMat time_ordered_exp_step(const SymMat& x, const Vector& r,
                             const MeasurementEnsemble& e, double eta) {
  if (!(eta > 0.0)) {
    throw std::invalid_argument("time_ordered_exp_step: eta must be positive");
  }
  require_same_dim(x, SymMat::zero(e.n()), "time_ordered_exp_step");
  const SymMat ex = expm_sym(-eta * adjoint(e, r));
  return SymMat(ex.matrix() * x.matrix() * ex.matrix());
}

Trajectory time_ordered_exp_solve(const MeasurementEnsemble& e,
                                  const SymMat& x0, double eta, long max_steps,
                                  double residual_tol, long history_stride) {
  if (!(residual_tol > 0.0)) {
    throw std::invalid_argument("time_ordered_exp_solve: residual_tol must be positive");
  }
  SymMat x = x0;
  Vector r = residual(e, x);
  const double obj0 = r.squaredNorm();
  const double thr = residual_threshold(e, residual_tol);
  const long stride = std::max(1L, history_stride);

  Trajectory out{x};
  auto record = [&](long step) {
    out.history.push_back({step, eta * static_cast<double>(step),
                           r.squaredNorm(), r.norm(), x.trace()});
  };
  record(0);
  long k = 0;
  for (;;) {
    if (r.norm() <= thr) {
      out.status = Status::converged;
      break;
    }
    if (k >= max_steps) {
      out.status = Status::max_steps;
      break;
    }
    try {
      x = time_ordered_exp_step(x, r, e, eta);
    } catch (const NumericalError& err) {
      out.status = Status::diverged;
      out.message = err.what();
      break;
    }
    r = residual(e, x);
    ++k;
    if (diverged(r.squaredNorm(), obj0) || !x.all_finite()) {
      out.status = Status::diverged;
      out.message = "objective blew up at step " + std::to_string(k);
      break;
    }
    if (k % stride == 0) record(k);
  }
  if (out.status != Status::diverged && out.history.back().step != k) record(k);
  out.final_X = x;
  out.steps = k;
  out.time = eta * static_cast<double>(k);
  return out;
}

SymMat closed_form_commutative_path(const MeasurementEnsemble& e,
                                    const SymMat& x0, const Vector& s) {
  const double comm = max_commutator_norm(e);
  if (comm > tol::kCommutation) {
    std::ostringstream msg;
    msg << "closed_form_commutative_path: ensemble does not commute, max "
           "commutator norm "
        << comm;
    throw std::invalid_argument(msg.str());
  }
  require_same_dim(x0, SymMat::zero(e.n()), "closed_form_commutative_path");
  require_psd(x0, "closed_form_commutative_path");
  const SymMat ex = expm_sym(adjoint(e, s));
  return SymMat(ex.matrix() * x0.matrix() * ex.matrix());
}

}  // namespace implreg
