#pragma once

// Random inputs and independent reference computations shared by the tests.

#include "implreg/linalg.hpp"
#include "implreg/measurements.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

namespace implreg::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double normal() { return std::normal_distribution<double>()(eng_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  Index index(Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(eng_);
  }

  Matrix matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }
  Vector vector(Index n) { return matrix(n, 1).col(0); }
  SymMat sym(Index n, double scale = 1.0) { return SymMat(scale * matrix(n, n)); }
  SymMat psd(Index n, Index rank) {
    const Matrix u = matrix(n, rank);
    return SymMat(u * u.transpose());
  }

 private:
  std::mt19937_64 eng_;
};

/// exp(M) from the Taylor series with scaling and squaring.
inline Matrix expm_series(const Matrix& m) {
  int squarings = 0;
  double norm = m.norm();
  while (norm > 0.5) {
    norm /= 2.0;
    ++squarings;
  }
  const Matrix a = m / std::ldexp(1.0, squarings);
  Matrix sum = Matrix::Identity(m.rows(), m.cols());
  Matrix term = sum;
  for (int k = 1; k < 60; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
    if (term.norm() < 1e-18 * sum.norm()) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

/// Reference SplitMix64: state += golden gamma, then the finalizer.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Central differences of a scalar function of a matrix.
template <typename F>
Matrix finite_difference(const F& f, const Matrix& u, double h) {
  Matrix g(u.rows(), u.cols());
  for (Index j = 0; j < u.cols(); ++j) {
    for (Index i = 0; i < u.rows(); ++i) {
      Matrix up = u, dn = u;
      up(i, j) += h;
      dn(i, j) -= h;
      g(i, j) = (f(up) - f(dn)) / (2.0 * h);
    }
  }
  return g;
}

/**
 * min sum(x) over x >= 0, A x = y by enumerating every basis of m columns.
 * Returns +inf when no basic feasible solution exists.
 */
inline double l1_vertex_enumeration(const Matrix& a, const Vector& y, Vector* best_x = nullptr) {
  const Index m = a.rows();
  const Index n = a.cols();
  double best = std::numeric_limits<double>::infinity();
  std::vector<Index> pick;
  // Subsets of size <= m cover degenerate vertices with fewer support columns.
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    pick.clear();
    for (Index j = 0; j < n; ++j)
      if (bits >> j & 1U) pick.push_back(j);
    if (static_cast<Index>(pick.size()) > m) continue;
    Matrix sub(m, static_cast<Index>(pick.size()));
    for (size_t k = 0; k < pick.size(); ++k) sub.col(static_cast<Index>(k)) = a.col(pick[k]);
    Vector xs = Vector::Zero(static_cast<Index>(pick.size()));
    if (!pick.empty()) {
      Eigen::ColPivHouseholderQR<Matrix> qr(sub);
      if (qr.rank() < static_cast<Index>(pick.size())) continue;
      xs = qr.solve(y);
    }
    if ((sub * xs - y).norm() > 1e-9 * std::max(1.0, y.norm())) continue;
    if (xs.size() > 0 && xs.minCoeff() < -1e-12) continue;
    const double value = xs.sum();
    if (value < best) {
      best = value;
      if (best_x) {
        *best_x = Vector::Zero(n);
        for (size_t k = 0; k < pick.size(); ++k) (*best_x)(pick[k]) = xs(static_cast<Index>(k));
      }
    }
  }
  return best;
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

}  // namespace implreg::testing
