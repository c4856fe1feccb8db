#include "implreg/constants.hpp"
#include "implreg/linalg.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace implreg;
using implreg::testing::Gen;
using implreg::testing::vec;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST(SymMat, SymmetrizesOnConstruction) {
  const SymMat s(mat2(1, 2, 4, 3));
  EXPECT_EQ(s(0, 1), 3.0);
  EXPECT_EQ(s(1, 0), 3.0);
  EXPECT_EQ(s(0, 0), 1.0);
}

TEST(SymMat, RejectsEmptyAndNonSquare) {
  EXPECT_THROW(SymMat(Matrix(0, 0)), DimensionError);
  EXPECT_THROW(SymMat(Matrix::Zero(2, 3)), DimensionError);
}

TEST(SymMat, ArithmeticAndInner) {
  const SymMat a(mat2(1, 2, 2, 3));
  const SymMat b = SymMat::identity(2);
  EXPECT_DOUBLE_EQ(inner(a, b), 4.0);
  EXPECT_DOUBLE_EQ((a + b).trace(), 6.0);
  EXPECT_DOUBLE_EQ((2.0 * a - a).frobenius_norm(), a.frobenius_norm());
  EXPECT_THROW(inner(a, SymMat::identity(3)), DimensionError);
}

TEST(Eigh, Identity) {
  const EigenDecomp d = eigh_sym(SymMat::identity(3));
  for (Index k = 0; k < 3; ++k) EXPECT_NEAR(d.values(k), 1.0, 1e-15);
}

TEST(Eigh, DiagonalGivesStandardBasis) {
  const EigenDecomp d = eigh_sym(SymMat::diagonal(vec({3.0, 1.0})));
  EXPECT_NEAR(d.values(0), 3.0, 1e-15);
  EXPECT_NEAR(d.values(1), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(d.vectors(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(d.vectors(1, 1)), 1.0, 1e-15);
}

TEST(Eigh, SwapMatrixMatchesCharacteristicPolynomial) {
  // lambda^2 - 1 = 0.
  const EigenDecomp d = eigh_sym(SymMat(mat2(0, 1, 1, 0)));
  EXPECT_NEAR(d.values(0), 1.0, 1e-15);
  EXPECT_NEAR(d.values(1), -1.0, 1e-15);
}

TEST(Eigh, TwoByTwoMatchesQuadraticFormula) {
  Gen g(11);
  for (int t = 0; t < 100; ++t) {
    const double a = g.normal(), b = g.normal(), c = g.normal();
    const double mid = 0.5 * (a + c);
    const double rad = std::hypot(0.5 * (a - c), b);
    const EigenDecomp d = eigh_sym(SymMat(mat2(a, b, b, c)));
    EXPECT_NEAR(d.values(0), mid + rad, 1e-12);
    EXPECT_NEAR(d.values(1), mid - rad, 1e-12);
  }
}

TEST(Eigh, ReconstructionAndOrthonormalityProperty) {
  Gen g(1);
  for (int t = 0; t < 100; ++t) {
    const Index n = g.index(1, 30);
    const SymMat m = g.sym(n, g.uniform(0.01, 10.0));
    const EigenDecomp d = eigh_sym(m);
    const Matrix rebuilt = d.vectors * d.values.asDiagonal() * d.vectors.transpose();
    EXPECT_LE((rebuilt - m.matrix()).norm(),
              tol::kEigReconstruction * std::max(1.0, m.frobenius_norm()));
    EXPECT_LE((d.vectors.transpose() * d.vectors - Matrix::Identity(n, n)).norm(),
              tol::kEigOrthonormality);
    for (Index k = 1; k < n; ++k) EXPECT_GE(d.values(k - 1), d.values(k));
  }
}

TEST(Eigh, RejectsNonFinite) {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(eigh_sym(SymMat(m)), NumericalError);
}

TEST(Expm, ZeroGivesIdentity) {
  EXPECT_LE((expm_sym(SymMat::zero(2)).matrix() - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(Expm, DiagonalLog2) {
  const SymMat e = expm_sym(SymMat::diagonal(vec({std::log(2.0), 0.0})));
  EXPECT_NEAR(e(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(e(1, 1), 1.0, 1e-14);
  EXPECT_NEAR(e(0, 1), 0.0, 1e-15);
}

TEST(Expm, HyperbolicRotation) {
  const double t = 0.3;
  const SymMat e = expm_sym(SymMat(mat2(0, t, t, 0)));
  EXPECT_NEAR(e(0, 0), std::cosh(t), 1e-12);
  EXPECT_NEAR(e(0, 1), std::sinh(t), 1e-12);
  EXPECT_NEAR(e(1, 1), std::cosh(t), 1e-12);
  const Matrix series = implreg::testing::expm_series(mat2(0, t, t, 0));
  EXPECT_LE((series - e.matrix()).norm(), 1e-12);
}

TEST(Expm, MatchesPowerSeriesProperty) {
  Gen g(2);
  for (int t = 0; t < 100; ++t) {
    const Index n = g.index(1, 30);
    const SymMat m = g.sym(n, g.uniform(0.01, 3.0) / std::sqrt(static_cast<double>(n)));
    const SymMat e = expm_sym(m);
    const Matrix ref = implreg::testing::expm_series(m.matrix());
    EXPECT_LE((e.matrix() - ref).norm(), 1e-10 * ref.norm());
  }
}

TEST(Expm, CommutesWithArgumentProperty) {
  Gen g(3);
  for (int t = 0; t < 100; ++t) {
    const Index n = g.index(1, 30);
    const SymMat m = g.sym(n, g.uniform(0.01, 2.0));
    const Matrix e = expm_sym(m).matrix();
    const Matrix comm = e * m.matrix() - m.matrix() * e;
    EXPECT_LE(comm.norm(), 1e-9 * m.frobenius_norm() * e.norm());
  }
}

TEST(Expm, OverflowThrows) {
  EXPECT_THROW(expm_sym(SymMat::diagonal(vec({800.0, 0.0}))), NumericalError);
}

TEST(PsdProject, ClampsNegativeEigenvalue) {
  const SymMat p = psd_project(SymMat::diagonal(vec({2.0, -1.0})));
  EXPECT_NEAR(p(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(p(1, 1), 0.0, 1e-15);
}

TEST(PsdProject, SwapMatrix) {
  const SymMat p = psd_project(SymMat(mat2(0, 1, 1, 0)));
  EXPECT_LE((p.matrix() - Matrix::Constant(2, 2, 0.5)).norm(), 1e-14);
}

TEST(PsdProject, NearestPointProperty) {
  // P is the projection iff P is PSD, X - P is NSD and <P, X - P> = 0.
  Gen g(4);
  for (int t = 0; t < 100; ++t) {
    const Index n = g.index(1, 30);
    const SymMat x = g.sym(n);
    const SymMat p = psd_project(x);
    const SymMat rest = x - p;
    const double scale = std::max(1.0, x.frobenius_norm());
    EXPECT_GE(min_eigenvalue(p), -1e-10 * scale);
    EXPECT_LE(max_eigenvalue(rest), 1e-10 * scale);
    EXPECT_NEAR(inner(p, rest), 0.0, 1e-10 * scale * scale);
    EXPECT_LE((psd_project(p) - p).frobenius_norm(), 1e-10 * scale);
  }
}

TEST(PsdProject, IdentityOnTheCone) {
  Gen g(5);
  for (int t = 0; t < 20; ++t) {
    const SymMat x = g.psd(8, 3);
    EXPECT_LE((psd_project(x) - x).frobenius_norm(), 1e-10 * std::max(1.0, x.frobenius_norm()));
  }
}

TEST(NuclearNorm, SmallCases) {
  EXPECT_NEAR(nuclear_norm(SymMat::identity(3)), 3.0, 1e-14);
  EXPECT_NEAR(nuclear_norm(SymMat::diagonal(vec({2.0, -1.0}))), 3.0, 1e-14);
  const Vector u = vec({2.0, 0.0, 0.0});
  const Matrix uu = u * u.transpose();
  EXPECT_NEAR(nuclear_norm(SymMat(uu)), 4.0, 1e-13);
  EXPECT_NEAR(nuclear_norm(Matrix(u)), 2.0, 1e-13);
}

TEST(NuclearNorm, SymmetricAndPsdProperty) {
  Gen g(6);
  for (int t = 0; t < 100; ++t) {
    const Index n = g.index(1, 30);
    const SymMat m = g.sym(n);
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(m.matrix()).eigenvalues();
    EXPECT_LE(implreg::testing::rel_diff(nuclear_norm(m), ev.cwiseAbs().sum()), 1e-9);
    const SymMat p = g.psd(n, g.index(1, n));
    EXPECT_LE(implreg::testing::rel_diff(nuclear_norm(p), p.trace()), 1e-9);
  }
}

TEST(NuclearNorm, RectangularMatchesSvd) {
  Gen g(7);
  for (int t = 0; t < 50; ++t) {
    const Matrix m = g.matrix(g.index(1, 12), g.index(1, 12));
    const double ref = Eigen::JacobiSVD<Matrix>(m).singularValues().sum();
    EXPECT_LE(implreg::testing::rel_diff(nuclear_norm(m), ref), 1e-8);
  }
}
