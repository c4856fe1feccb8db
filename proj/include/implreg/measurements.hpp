#pragma once

#include "implreg/linalg.hpp"
#include "implreg/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace implreg {

/**
 * The linear measurement operator A(X)_i = <A_i, X> together with its
 * targets y.
 *
 * Invariants checked at construction: m >= 1, all A_i share one dimension,
 * and the A_i are linearly independent (Gram matrix minimum eigenvalue above
 * kGramIndependence times its maximum).
 */
class MeasurementEnsemble {
 public:
  explicit MeasurementEnsemble(std::vector<SymMat> mats);
  MeasurementEnsemble(std::vector<SymMat> mats, Vector y);

  Index n() const { return n_; }
  Index m() const { return static_cast<Index>(mats_.size()); }
  const std::vector<SymMat>& mats() const { return mats_; }
  const SymMat& mat(Index i) const { return mats_[static_cast<size_t>(i)]; }
  const Vector& y() const { return y_; }

  /// Copy of this ensemble with replaced targets.
  MeasurementEnsemble with_targets(Vector y) const;

  /// m x n^2 matrix whose i-th row is vec(A_i).
  const Matrix& stacked() const { return stacked_; }

  /// G_ij = <A_i, A_j>.
  Matrix gram() const;

 private:
  std::vector<SymMat> mats_;
  Vector y_;
  Matrix stacked_;
  Index n_ = 0;
};

/// A(X).
Vector apply(const MeasurementEnsemble& e, const SymMat& x);

/// A*(r) = sum_i r_i A_i.
SymMat adjoint(const MeasurementEnsemble& e, const Vector& r);

/// A(X) - y.
Vector residual(const MeasurementEnsemble& e, const SymMat& x);

/// Largest ||A_i A_j - A_j A_i||_F over all pairs.
double max_commutator_norm(const MeasurementEnsemble& e);

enum class ProblemKind {
  gaussian,
  completion_uniform,
  completion_powerlaw,
  diagonal,
  grid3x3,
};

enum class CompletionDist { uniform, powerlaw };

enum class PlantedKind { lowrank, decaying };

std::string to_string(ProblemKind k);
std::string to_string(PlantedKind k);
ProblemKind parse_problem_kind(const std::string& s);
PlantedKind parse_planted_kind(const std::string& s);

/**
 * m symmetric Gaussian measurements A_i = (G + G^T) / (2 sqrt(m)) with
 * G iid N(0, 1). The 1/sqrt(m) factor makes A a near-isometry,
 * E||A(X)||^2 = ||X||_F^2, so fixed step sizes mean the same thing at every
 * (n, m). Resamples until the ensemble is linearly independent.
 */
MeasurementEnsemble gen_gaussian(Index n, Index m, std::uint64_t seed);

/// Entry mask reading X_ab: e_a e_a^T on the diagonal, (e_a e_b^T + e_b e_a^T)/2
/// off it.
SymMat entry_mask(Index n, Index a, Index b);

/// Completion ensemble from explicit (a, b) index pairs.
MeasurementEnsemble completion_ensemble(
    Index n, const std::vector<std::pair<Index, Index>>& pairs);

/// Draws k in [0, n) with probability proportional to (k + 1)^-gamma.
Index sample_powerlaw_index(Rng& rng, Index n, double gamma);

/**
 * m distinct entry masks. Each pair (a <= b) is selected with probability
 * proportional to p_a p_b (doubled when a != b), i.e. two independent row
 * draws followed by sorting, sampled without replacement. p is uniform or
 * proportional to (k + 1)^-gamma.
 */
MeasurementEnsemble gen_completion(Index n, Index m, CompletionDist dist,
                                   std::uint64_t seed,
                                   double gamma = 1.0);

/// Diagonal ensemble A_i = diag(rows_i) for an m x n coefficient matrix.
MeasurementEnsemble diagonal_ensemble(const Matrix& coeffs,
                                      const Vector& y = Vector());

/// Diagonal ensemble with iid N(0, 1) coefficients, resampled until independent.
MeasurementEnsemble gen_diagonal(Index n, Index m, std::uint64_t seed);

/// Diagonal planted truth: r random coordinates with |N(0,1)| values,
/// scaled to unit Euclidean norm.
SymMat gen_planted_diagonal(Index n, Index r, std::uint64_t seed);

/**
 * Planted PSD ground truth scaled to ||X*||_F = frob_norm.
 *
 * lowrank: U U^T with U an n x r iid N(0,1) factor.
 * decaying: Q diag(lambda) Q^T with lambda_k = (k - 1 + s)^-1.5 and Q from
 * the QR of an n x n Gaussian matrix. The offset s > 0 is solved so that
 * ||X*||_* = sqrt(r) ||X*||_F. The ratio tends to 1 as s -> 0 and to
 * sqrt(n) as s -> inf, so r = 1 returns the rank-one limit and r = n the
 * flat spectrum.
 */
SymMat gen_planted(Index n, Index r, PlantedKind kind, std::uint64_t seed,
                   double frob_norm = 1.0);

/// Spectrum used by gen_planted(decaying) before scaling (descending).
Vector decaying_spectrum(Index n, Index r);

/**
 * Embeds n1 x n2 measurements B_i as [[0, B_i/2], [B_i^T/2, 0]] over
 * (n1 + n2) x (n1 + n2), so <embedded, [[W, X], [X^T, Z]]> = <B_i, X>.
 */
MeasurementEnsemble embed_asymmetric(const std::vector<Matrix>& rect_mats,
                                     const Vector& y);

/// Single-matrix form of the embedding above.
SymMat embed_block(const Matrix& rect);

/// Ensemble plus optional planted ground truth and provenance.
struct ProblemInstance {
  MeasurementEnsemble ensemble;
  std::optional<SymMat> planted;
  ProblemKind kind = ProblemKind::gaussian;
  std::uint64_t seed = 0;
};

/// Sets y = A(X*) and checks the planted invariants.
ProblemInstance make_planted_instance(const MeasurementEnsemble& e,
                                      const SymMat& planted, ProblemKind kind,
                                      std::uint64_t seed);

/// Recipe for generated instances used by the experiment drivers.
struct InstanceSpec {
  ProblemKind kind = ProblemKind::gaussian;
  PlantedKind planted = PlantedKind::lowrank;
  Index n = 20;
  Index r = 2;
  Index m = 120;
  double powerlaw_gamma = 1.0;
};

ProblemInstance build_instance(const InstanceSpec& spec, std::uint64_t seed);

}  // namespace implreg
