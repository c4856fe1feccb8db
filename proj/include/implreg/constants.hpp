#pragma once

// Shared numerical tolerances. Solvers and tests read from here so that a
// threshold changed in one place changes everywhere.

namespace implreg::tol {

// Symmetric eigendecomposition quality bounds.
inline constexpr double kEigReconstruction = 1e-10;
inline constexpr double kEigOrthonormality = 1e-10;

// Largest argument accepted by std::exp before overflow (log(DBL_MAX) ~ 709.78).
inline constexpr double kExpOverflow = 700.0;

// Gram matrix conditioning required for a linearly independent ensemble.
inline constexpr double kGramIndependence = 1e-10;

// Planted ground truth must satisfy y == A(X*) to this absolute accuracy.
inline constexpr double kPlantedConsistency = 1e-12;

// PSD membership slack for planted matrices and congruence outputs.
inline constexpr double kPsdSlack = 1e-10;

// Pairwise commutator norm under which an ensemble counts as commuting.
inline constexpr double kCommutation = 1e-10;

// Floor for norms used as relative denominators.
inline constexpr double kTiny = 1e-12;

// Divergence: objective exceeding this multiple of the initial objective.
inline constexpr double kDivergenceFactor = 1e12;

// Default solver controls.
inline constexpr double kResidualRtol = 1e-8;
inline constexpr double kOdeRelTol = 1e-8;
inline constexpr double kOdeAbsTol = 1e-10;
inline constexpr double kOdeTmax = 1e7;
inline constexpr double kLineSearchMaxStep = 0.1;

// Operator-splitting oracle defaults.
inline constexpr double kOracleTol = 1e-8;
inline constexpr int kOracleMaxIters = 50000;
inline constexpr double kOraclePenalty = 1.0;
inline constexpr int kOracleStallWindow = 1000;
// Residual balancing stops after this many iterations; rho is fixed afterwards.
inline constexpr int kOracleAdaptIters = 1000;
// Relative decrease of the best primal gap between consecutive windows.
inline constexpr double kOracleStallImprovement = 1e-3;

// Default power-law exponent for completion sampling.
inline constexpr double kPowerLawGamma = 1.0;

}  // namespace implreg::tol
