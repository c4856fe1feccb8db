#pragma once

#include "implreg/constants.hpp"
#include "implreg/linalg.hpp"
#include "implreg/measurements.hpp"

#include <string>
#include <utility>
#include <vector>

namespace implreg {

/// Optimality certificate for min ||X||_* s.t. A(X) = y, X PSD.
struct KKTCertificate {
  Vector nu;
  double max_eig_dual = 0.0;   // lambda_max(A*(nu))
  double feas_residual = 0.0;  // ||A(X) - y||_2
  double comp_residual = 0.0;  // ||(I - A*(nu)) X||_F
  double psd_violation = 0.0;  // -min(lambda_min(X), 0)
  bool feasible_ok = false;
  bool psd_ok = false;
  bool dual_ok = false;
  bool comp_ok = false;
  bool passed = false;
  double tol = 0.0;
};

/**
 * Evaluates the four optimality conditions for X.
 *
 *   feasibility      ||A(X) - y|| <= tol ||y||
 *   PSD              lambda_min(X) >= -tol
 *   dual feasibility lambda_max(A*(nu)) <= 1 + tol
 *   complementarity  ||(I - A*(nu)) X||_F <= tol max(1, ||X||_F)
 *
 * nu is the least-squares minimizer of ||(I - A*(nu)) X||_F, computed from a
 * truncated SVD (singular values below tol * sigma_max are dropped). When
 * that solution is not dual feasible and the truncated directions leave
 * freedom, lambda_max(A*(nu)) is minimized over them. Never throws on a
 * suboptimal X; failures are reported in the certificate.
 */
KKTCertificate kkt_check(const SymMat& x, const MeasurementEnsemble& e,
                         double tol);

enum class OracleStatus { optimal, infeasible, max_iters };

std::string to_string(OracleStatus s);

struct OracleOptions {
  double tol = tol::kOracleTol;
  int max_iters = tol::kOracleMaxIters;
  double penalty = tol::kOraclePenalty;
  bool adapt_penalty = true;
  int adapt_iters = tol::kOracleAdaptIters;
  int stall_window = tol::kOracleStallWindow;
  double stall_improvement = tol::kOracleStallImprovement;
  /// Tolerance of the certificate that must pass for status == optimal.
  double certify_tol = 1e-5;
  int history_stride = 10;
};

struct OracleResult {
  explicit OracleResult(SymMat x) : X(std::move(x)) {}

  SymMat X;
  OracleStatus status = OracleStatus::max_iters;
  double objective = 0.0;
  int iters = 0;
  std::vector<double> primal_history;
  std::vector<double> dual_history;
  KKTCertificate certificate;
  std::string message;
};

/// Solves G s = y with G the Gram matrix and returns A*(s).
SymMat min_frobenius_solution(const MeasurementEnsemble& e);

/**
 * Trace minimization over the PSD cone subject to A(X) = y by ADMM.
 *
 *   X   <- Pi_affine(Z - U - I / rho)      (Gram-system projection)
 *   Z   <- psd_project(X + U)
 *   U   <- U + X - Z
 *
 * with residual balancing on rho during the first adapt_iters iterations. Converges when ||X - Z||_F and
 * rho ||Z - Z_prev||_F fall below tol (scaled by 1 + the iterate norms);
 * reports infeasible when the primal residual stalls above tolerance for a
 * full window. The returned X is the PSD iterate Z.
 */
OracleResult min_nuclear_psd(const MeasurementEnsemble& e,
                             const OracleOptions& opts = {});

struct L1Result {
  Vector x;
  OracleStatus status = OracleStatus::max_iters;
  double objective = 0.0;
};

/// argmin ||x||_1 over x >= 0 with coeffs x = y, through the diagonal
/// embedding into min_nuclear_psd.
L1Result min_l1_nonneg(const Matrix& coeffs, const Vector& y,
                       const OracleOptions& opts = {});

/// True iff min_nuclear_psd reaches status optimal.
bool psd_completable(const MeasurementEnsemble& e, double tol = tol::kOracleTol);

}  // namespace implreg
