#include "implreg/linalg.hpp"

#include "implreg/constants.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace implreg {

SymMat::SymMat(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw DimensionError("SymMat requires a non-empty square matrix, got " +
                         shape_string(m));
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMat SymMat::zero(Index n) { return SymMat(Matrix::Zero(n, n)); }

SymMat SymMat::identity(Index n) { return SymMat(Matrix::Identity(n, n)); }

SymMat SymMat::diagonal(const Vector& d) {
  return SymMat(Matrix(d.asDiagonal()));
}

SymMat& SymMat::operator+=(const SymMat& o) {
  require_same_dim(*this, o, "SymMat +=");
  m_ += o.m_;
  return *this;
}

SymMat& SymMat::operator-=(const SymMat& o) {
  require_same_dim(*this, o, "SymMat -=");
  m_ -= o.m_;
  return *this;
}

SymMat& SymMat::operator*=(double s) {
  m_ *= s;
  return *this;
}

double inner(const SymMat& a, const SymMat& b) {
  require_same_dim(a, b, "inner");
  return a.matrix().cwiseProduct(b.matrix()).sum();
}

EigenDecomp eigh_sym(const SymMat& m) {
  if (!m.all_finite()) {
    throw NumericalError("eigh_sym: input has non-finite entries");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigh_sym: eigensolver did not converge");
  }
  // Eigen sorts ascending; callers expect descending.
  EigenDecomp out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

SymMat spectral_apply(const EigenDecomp& eig, const Vector& mapped_values) {
  const Matrix& v = eig.vectors;
  return SymMat(v * mapped_values.asDiagonal() * v.transpose());
}

SymMat expm_sym(const SymMat& m) {
  EigenDecomp eig = eigh_sym(m);
  const double top = eig.values(0);
  if (top > tol::kExpOverflow) {
    std::ostringstream msg;
    msg << "expm_sym: eigenvalue " << top << " overflows exp";
    throw NumericalError(msg.str());
  }
  return spectral_apply(eig, eig.values.array().exp().matrix());
}

SymMat psd_project(const SymMat& m) {
  EigenDecomp eig = eigh_sym(m);
  return spectral_apply(eig, eig.values.cwiseMax(0.0));
}

double nuclear_norm(const SymMat& m) {
  return eigh_sym(m).values.cwiseAbs().sum();
}

double nuclear_norm(const Matrix& m) {
  if (!m.allFinite()) {
    throw NumericalError("nuclear_norm: input has non-finite entries");
  }
  if (m.rows() == m.cols() && m.rows() > 0 && m == m.transpose()) {
    return nuclear_norm(SymMat(m));
  }
  // Work with the smaller Gram matrix.
  Matrix gram = m.rows() < m.cols() ? Matrix(m * m.transpose())
                                    : Matrix(m.transpose() * m);
  if (gram.size() == 0) return 0.0;
  Vector ev = eigh_sym(SymMat(gram)).values;
  return ev.cwiseMax(0.0).cwiseSqrt().sum();
}

double min_eigenvalue(const SymMat& m) {
  const EigenDecomp e = eigh_sym(m);
  return e.values(e.values.size() - 1);
}

double max_eigenvalue(const SymMat& m) { return eigh_sym(m).values(0); }

void require_same_dim(const SymMat& a, const SymMat& b, const char* what) {
  if (a.dim() != b.dim()) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch " << a.dim() << " vs " << b.dim();
    throw DimensionError(msg.str());
  }
}

std::string shape_string(const Matrix& m) {
  std::ostringstream s;
  s << m.rows() << "x" << m.cols();
  return s.str();
}

}  // namespace implreg
