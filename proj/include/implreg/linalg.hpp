#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace implreg {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when argument shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on non-finite data, overflow or an ill-posed numerical request.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Dense real symmetric n x n matrix.
 *
 * Construction symmetrizes its argument as (M + M^T) / 2, so entries are
 * exactly symmetric afterwards. Every arithmetic helper below preserves
 * that property.
 */
class SymMat {
 public:
  explicit SymMat(const Matrix& m);

  static SymMat zero(Index n);
  static SymMat identity(Index n);
  static SymMat diagonal(const Vector& d);

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

  double trace() const { return m_.trace(); }
  double frobenius_norm() const { return m_.norm(); }
  bool all_finite() const { return m_.allFinite(); }

  SymMat& operator+=(const SymMat& o);
  SymMat& operator-=(const SymMat& o);
  SymMat& operator*=(double s);

  friend SymMat operator+(SymMat a, const SymMat& b) { return a += b; }
  friend SymMat operator-(SymMat a, const SymMat& b) { return a -= b; }
  friend SymMat operator*(SymMat a, double s) { return a *= s; }
  friend SymMat operator*(double s, SymMat a) { return a *= s; }

 private:
  Matrix m_;
};

/// Trace inner product <A, B>.
double inner(const SymMat& a, const SymMat& b);

/// Eigenpairs sorted by descending eigenvalue; columns of `vectors` are
/// orthonormal.
struct EigenDecomp {
  Vector values;
  Matrix vectors;
};

/// Eigendecomposition of a symmetric matrix. Throws NumericalError on
/// non-finite input.
EigenDecomp eigh_sym(const SymMat& m);

/// Rebuild V diag(f(lambda)) V^T.
SymMat spectral_apply(const EigenDecomp& eig, const Vector& mapped_values);

/// Matrix exponential V exp(Lambda) V^T. Throws NumericalError naming the
/// eigenvalue when exp would overflow.
SymMat expm_sym(const SymMat& m);

/// Frobenius-nearest PSD matrix: eigenvalues clamped at zero.
SymMat psd_project(const SymMat& m);

/// Sum of |lambda_k| for symmetric input.
double nuclear_norm(const SymMat& m);

/// Sum of singular values of a rectangular matrix, computed from the
/// eigenvalues of M^T M with square roots clamped at zero.
double nuclear_norm(const Matrix& m);

double min_eigenvalue(const SymMat& m);
double max_eigenvalue(const SymMat& m);

/// Throws DimensionError unless a and b are both n x n.
void require_same_dim(const SymMat& a, const SymMat& b, const char* what);

std::string shape_string(const Matrix& m);

}  // namespace implreg
