#pragma once

#include "implreg/constants.hpp"
#include "implreg/linalg.hpp"
#include "implreg/measurements.hpp"

#include <optional>
#include <utility>
#include <string>
#include <vector>

namespace implreg {

enum class Status { converged, max_steps, diverged };

std::string to_string(Status s);

struct HistoryPoint {
  long step = 0;
  double time = 0.0;
  double objective = 0.0;
  double residual_norm = 0.0;
  double nuclear_norm = 0.0;
};

/// Output of every solver in this module.
struct Trajectory {
  explicit Trajectory(SymMat x) : final_X(std::move(x)) {}

  SymMat final_X;
  std::optional<Matrix> final_U;
  Status status = Status::max_steps;
  std::vector<HistoryPoint> history;
  long steps = 0;
  double time = 0.0;
  /// s_t = -int_0^t r_tau dtau, integrated alongside the gradient-flow ODE.
  std::optional<Vector> integrated_dual;
  std::string message;
};

struct StepPolicy {
  enum class Kind { fixed, clipped_exact_line_search };
  Kind kind = Kind::fixed;
  /// Fixed step size, or the clipping bound for line search.
  double eta = 1e-3;

  static StepPolicy fixed(double eta) { return {Kind::fixed, eta}; }
  static StepPolicy line_search(double eta_max = tol::kLineSearchMaxStep) {
    return {Kind::clipped_exact_line_search, eta_max};
  }
  std::string tag() const;
};

struct GDConfig {
  StepPolicy step;
  double init_scale = 1e-4;
  long max_steps = 200'000;
  /// Stop once ||r||_2 <= residual_tol * ||y||_2 (absolute when y = 0).
  double residual_tol = tol::kResidualRtol;
  Index d = 1;
  long history_stride = 1000;
};

struct ODEConfig {
  double rel_tol = tol::kOdeRelTol;
  /// Absolute tolerance relative to min(1, ||X0||_F).
  double abs_tol = tol::kOdeAbsTol;
  double t_max = tol::kOdeTmax;
  /// Same convention as GDConfig::residual_tol.
  double residual_tol = tol::kResidualRtol;
  long max_steps = 2'000'000;
  long history_stride = 200;
  bool track_dual = false;
};

/// f(X) = ||A(X) - y||^2.
double objective(const MeasurementEnsemble& e, const SymMat& x);

/// Absolute residual threshold for a relative tolerance.
double residual_threshold(const MeasurementEnsemble& e, double residual_tol);

/// X = U U^T.
SymMat outer(const Matrix& u);

/**
 * Gradient of f(U) = ||A(U U^T) - y||^2: 4 A*(r) U with r = A(U U^T) - y.
 * Each <A_i, U U^T> contributes 2 A_i U and the square contributes 2 r_i.
 */
Matrix grad_f(const Matrix& u, const MeasurementEnsemble& e);

/// Gradient descent U <- U - eta grad_f(U).
Trajectory factored_gd(const MeasurementEnsemble& e, const Matrix& u0,
                       const GDConfig& cfg);

/**
 * argmin over eta in [0, eta_max] of phi(eta) = ||A((U - eta G)(U - eta G)^T) - y||^2.
 * phi is a quartic; the minimum is taken over the real roots of phi' inside
 * the interval and the two endpoints.
 */
double exact_line_search_step(const Matrix& u, const Matrix& g,
                              const MeasurementEnsemble& e, double eta_max);

/// X <- X - eta A*(r), optionally followed by PSD projection.
Trajectory gd_on_X(const MeasurementEnsemble& e, const SymMat& x0, double eta,
                   long max_steps, double residual_tol, bool project,
                   long history_stride = 1000);

/// Largest eigenvalue of the Gram matrix; gd_on_X is stable for eta < 2 / L.
double gram_spectral_bound(const MeasurementEnsemble& e);

/**
 * Integrates dX/dt = -A*(r) X - X A*(r) with adaptive Dormand-Prince on the
 * packed upper triangle of X. Stops at the residual threshold, t_max or
 * max_steps.
 */
Trajectory gradient_flow_ode(const MeasurementEnsemble& e, const SymMat& x0,
                             const ODEConfig& cfg);

/// E X E with E = exp(-eta A*(r)).
SymMat time_ordered_exp_step(const SymMat& x, const Vector& r,
                             const MeasurementEnsemble& e, double eta);

Trajectory time_ordered_exp_solve(const MeasurementEnsemble& e,
                                  const SymMat& x0, double eta, long max_steps,
                                  double residual_tol,
                                  long history_stride = 1000);

/// exp(A*(s)) X0 exp(A*(s)) for a commuting ensemble.
SymMat closed_form_commutative_path(const MeasurementEnsemble& e,
                                    const SymMat& x0, const Vector& s);

/// U0 = V_d diag(sqrt(lambda_1..d)) from the top-d eigenpairs of X_gd.
Matrix svd_init(const SymMat& x_gd, Index d);

/// Gaussian n x d factor rescaled to ||U0||_F = scale.
Matrix random_init(Index n, Index d, double scale, std::uint64_t seed);

/// (scale / sqrt(n)) I, so ||U0||_F = scale and U0 U0^T = (scale^2 / n) I.
Matrix identity_init(Index n, double scale);

}  // namespace implreg
