#include "implreg/measurements.hpp"

#include "implreg/constants.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace implreg {

namespace {

// Stream ids keep the generators independent when they share one seed.
constexpr std::uint64_t kStreamGaussian = 100;
constexpr std::uint64_t kStreamCompletion = 200;
constexpr std::uint64_t kStreamPlanted = 300;
constexpr std::uint64_t kStreamDiagonal = 400;
constexpr int kMaxResample = 64;

Index sym_dim_count(Index n) { return n * (n + 1) / 2; }

Matrix gaussian_matrix(Rng& rng, Index rows, Index cols) {
  Matrix g(rows, cols);
  // Row-major fill order so the stream layout reads naturally.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) g(i, j) = rng.normal();
  return g;
}

bool independent(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  const Vector& ev = es.eigenvalues();
  const double top = ev(ev.size() - 1);
  return top > 0.0 && ev(0) > tol::kGramIndependence * top;
}

}  // namespace

MeasurementEnsemble::MeasurementEnsemble(std::vector<SymMat> mats)
    : MeasurementEnsemble(std::move(mats), Vector()) {}

MeasurementEnsemble::MeasurementEnsemble(std::vector<SymMat> mats, Vector y)
    : mats_(std::move(mats)), y_(std::move(y)) {
  if (mats_.empty()) {
    throw DimensionError("MeasurementEnsemble: needs at least one matrix");
  }
  n_ = mats_.front().dim();
  const Index m = static_cast<Index>(mats_.size());
  if (y_.size() == 0) y_ = Vector::Zero(m);
  if (y_.size() != m) {
    std::ostringstream msg;
    msg << "MeasurementEnsemble: " << m << " matrices but " << y_.size()
        << " targets";
    throw DimensionError(msg.str());
  }
  stacked_.resize(m, n_ * n_);
  for (Index i = 0; i < m; ++i) {
    const SymMat& a = mats_[static_cast<size_t>(i)];
    if (a.dim() != n_) {
      throw DimensionError("MeasurementEnsemble: matrices differ in dimension");
    }
    if (!a.all_finite()) {
      throw NumericalError("MeasurementEnsemble: non-finite measurement matrix");
    }
    stacked_.row(i) = Eigen::Map<const Vector>(a.matrix().data(), n_ * n_);
  }
  if (!independent(gram())) {
    throw NumericalError(
        "MeasurementEnsemble: measurement matrices are linearly dependent");
  }
}

MeasurementEnsemble MeasurementEnsemble::with_targets(Vector y) const {
  MeasurementEnsemble copy = *this;
  if (y.size() != m()) {
    throw DimensionError("with_targets: target length does not match m");
  }
  copy.y_ = std::move(y);
  return copy;
}

Matrix MeasurementEnsemble::gram() const {
  return stacked_ * stacked_.transpose();
}

Vector apply(const MeasurementEnsemble& e, const SymMat& x) {
  if (x.dim() != e.n()) {
    std::ostringstream msg;
    msg << "apply: X is " << x.dim() << "x" << x.dim() << ", ensemble expects "
        << e.n();
    throw DimensionError(msg.str());
  }
  return e.stacked() *
         Eigen::Map<const Vector>(x.matrix().data(), e.n() * e.n());
}

SymMat adjoint(const MeasurementEnsemble& e, const Vector& r) {
  if (r.size() != e.m()) {
    std::ostringstream msg;
    msg << "adjoint: r has length " << r.size() << ", ensemble has m = "
        << e.m();
    throw DimensionError(msg.str());
  }
  const Vector flat = e.stacked().transpose() * r;
  return SymMat(Eigen::Map<const Matrix>(flat.data(), e.n(), e.n()));
}

Vector residual(const MeasurementEnsemble& e, const SymMat& x) {
  return apply(e, x) - e.y();
}

double max_commutator_norm(const MeasurementEnsemble& e) {
  double worst = 0.0;
  for (Index i = 0; i < e.m(); ++i) {
    for (Index j = i + 1; j < e.m(); ++j) {
      const Matrix& a = e.mat(i).matrix();
      const Matrix& b = e.mat(j).matrix();
      worst = std::max(worst, (a * b - b * a).norm());
    }
  }
  return worst;
}

std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::gaussian: return "gaussian";
    case ProblemKind::completion_uniform: return "completion-uniform";
    case ProblemKind::completion_powerlaw: return "completion-powerlaw";
    case ProblemKind::diagonal: return "diagonal";
    case ProblemKind::grid3x3: return "grid3x3";
  }
  return "unknown";
}

std::string to_string(PlantedKind k) {
  return k == PlantedKind::lowrank ? "lowrank" : "decaying";
}

ProblemKind parse_problem_kind(const std::string& s) {
  for (ProblemKind k :
       {ProblemKind::gaussian, ProblemKind::completion_uniform,
        ProblemKind::completion_powerlaw, ProblemKind::diagonal,
        ProblemKind::grid3x3}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown problem kind '" + s + "'");
}

PlantedKind parse_planted_kind(const std::string& s) {
  if (s == "lowrank") return PlantedKind::lowrank;
  if (s == "decaying") return PlantedKind::decaying;
  throw std::invalid_argument("unknown planted kind '" + s + "'");
}

MeasurementEnsemble gen_gaussian(Index n, Index m, std::uint64_t seed) {
  if (n < 1 || m < 1 || m > sym_dim_count(n)) {
    std::ostringstream msg;
    msg << "gen_gaussian: need 1 <= m <= n(n+1)/2 = " << sym_dim_count(n)
        << ", got m = " << m;
    throw DimensionError(msg.str());
  }
  const double scale = 0.5 / std::sqrt(static_cast<double>(m));
  for (int attempt = 0; attempt < kMaxResample; ++attempt) {
    Rng rng(seed, kStreamGaussian + static_cast<std::uint64_t>(attempt));
    std::vector<SymMat> mats;
    mats.reserve(static_cast<size_t>(m));
    for (Index i = 0; i < m; ++i) {
      const Matrix g = gaussian_matrix(rng, n, n);
      mats.emplace_back(scale * (g + g.transpose()));
    }
    try {
      return MeasurementEnsemble(std::move(mats));
    } catch (const NumericalError&) {
      // dependent draw; resample
    }
  }
  throw NumericalError("gen_gaussian: could not draw an independent ensemble");
}

SymMat entry_mask(Index n, Index a, Index b) {
  if (a < 0 || b < 0 || a >= n || b >= n) {
    throw DimensionError("entry_mask: index out of range");
  }
  Matrix m = Matrix::Zero(n, n);
  if (a == b) {
    m(a, a) = 1.0;
  } else {
    m(a, b) = 0.5;
    m(b, a) = 0.5;
  }
  return SymMat(m);
}

MeasurementEnsemble completion_ensemble(
    Index n, const std::vector<std::pair<Index, Index>>& pairs) {
  std::vector<SymMat> mats;
  mats.reserve(pairs.size());
  for (auto [a, b] : pairs) mats.push_back(entry_mask(n, a, b));
  return MeasurementEnsemble(std::move(mats));
}

Index sample_powerlaw_index(Rng& rng, Index n, double gamma) {
  double total = 0.0;
  for (Index k = 0; k < n; ++k) total += std::pow(k + 1.0, -gamma);
  double u = rng.uniform() * total;
  for (Index k = 0; k < n; ++k) {
    u -= std::pow(k + 1.0, -gamma);
    if (u < 0.0) return k;
  }
  return n - 1;
}

MeasurementEnsemble gen_completion(Index n, Index m, CompletionDist dist,
                                   std::uint64_t seed, double gamma) {
  if (n < 1 || m < 1 || m > sym_dim_count(n)) {
    std::ostringstream msg;
    msg << "gen_completion: need 1 <= m <= n(n+1)/2 = " << sym_dim_count(n)
        << " distinct entries, got m = " << m;
    throw DimensionError(msg.str());
  }
  Vector p(n);
  for (Index k = 0; k < n; ++k) {
    p(k) = dist == CompletionDist::uniform ? 1.0 : std::pow(k + 1.0, -gamma);
  }
  p /= p.sum();

  struct Cand {
    Index a, b;
    double w;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<size_t>(sym_dim_count(n)));
  for (Index a = 0; a < n; ++a)
    for (Index b = a; b < n; ++b)
      cands.push_back({a, b, p(a) * p(b) * (a == b ? 1.0 : 2.0)});

  Rng rng(seed, kStreamCompletion);
  std::vector<std::pair<Index, Index>> chosen;
  chosen.reserve(static_cast<size_t>(m));
  for (Index i = 0; i < m; ++i) {
    double total = 0.0;
    for (const Cand& c : cands) total += c.w;
    double u = rng.uniform() * total;
    size_t pick = cands.size() - 1;
    for (size_t j = 0; j < cands.size(); ++j) {
      u -= cands[j].w;
      if (u < 0.0) {
        pick = j;
        break;
      }
    }
    chosen.emplace_back(cands[pick].a, cands[pick].b);
    cands.erase(cands.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return completion_ensemble(n, chosen);
}

MeasurementEnsemble diagonal_ensemble(const Matrix& coeffs, const Vector& y) {
  std::vector<SymMat> mats;
  mats.reserve(static_cast<size_t>(coeffs.rows()));
  for (Index i = 0; i < coeffs.rows(); ++i) {
    mats.push_back(SymMat::diagonal(coeffs.row(i).transpose()));
  }
  return MeasurementEnsemble(std::move(mats), y);
}

MeasurementEnsemble gen_diagonal(Index n, Index m, std::uint64_t seed) {
  if (n < 1 || m < 1 || m > n) {
    throw DimensionError("gen_diagonal: need 1 <= m <= n");
  }
  for (int attempt = 0; attempt < kMaxResample; ++attempt) {
    Rng rng(seed, kStreamDiagonal + static_cast<std::uint64_t>(attempt));
    try {
      return diagonal_ensemble(gaussian_matrix(rng, m, n));
    } catch (const NumericalError&) {
    }
  }
  throw NumericalError("gen_diagonal: could not draw an independent ensemble");
}

SymMat gen_planted_diagonal(Index n, Index r, std::uint64_t seed) {
  if (r < 1 || r > n) throw DimensionError("gen_planted_diagonal: r out of range");
  Rng rng(seed, kStreamPlanted + 1);
  std::vector<Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  // Partial Fisher-Yates for the support.
  for (Index i = 0; i < r; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  Vector x = Vector::Zero(n);
  for (Index i = 0; i < r; ++i) {
    x(idx[static_cast<size_t>(i)]) = std::abs(rng.normal());
  }
  x /= x.norm();
  return SymMat::diagonal(x);
}

Vector decaying_spectrum(Index n, Index r) {
  if (r < 1 || r > n) throw DimensionError("decaying_spectrum: r out of range");
  Vector lam = Vector::Zero(n);
  if (r == 1) {
    lam(0) = 1.0;
    return lam;
  }
  if (r == n) return Vector::Ones(n);

  auto spectrum = [n](double s) {
    Vector v(n);
    for (Index k = 0; k < n; ++k) v(k) = std::pow(static_cast<double>(k) + s, -1.5);
    return v;
  };
  auto ratio = [&](double s) {
    const Vector v = spectrum(s);
    return v.sum() / v.norm();
  };
  const double target = std::sqrt(static_cast<double>(r));
  double lo = -40.0, hi = 40.0;  // log(s)
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ratio(std::exp(mid)) < target ? lo : hi) = mid;
  }
  return spectrum(std::exp(0.5 * (lo + hi)));
}

SymMat gen_planted(Index n, Index r, PlantedKind kind, std::uint64_t seed,
                   double frob_norm) {
  if (n < 1 || r < 1 || r > n) {
    std::ostringstream msg;
    msg << "gen_planted: need 1 <= r <= n, got n = " << n << ", r = " << r;
    throw DimensionError(msg.str());
  }
  Rng rng(seed, kStreamPlanted);
  Matrix x;
  if (kind == PlantedKind::lowrank) {
    const Matrix u = gaussian_matrix(rng, n, r);
    x = u * u.transpose();
  } else {
    const Matrix g = gaussian_matrix(rng, n, n);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix rr = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < n; ++j) {
      if (rr(j, j) < 0.0) q.col(j) *= -1.0;
    }
    const Vector lam = decaying_spectrum(n, r);
    x = q * lam.asDiagonal() * q.transpose();
  }
  x *= frob_norm / x.norm();
  return SymMat(x);
}

SymMat embed_block(const Matrix& rect) {
  const Index n1 = rect.rows();
  const Index n2 = rect.cols();
  Matrix big = Matrix::Zero(n1 + n2, n1 + n2);
  big.topRightCorner(n1, n2) = 0.5 * rect;
  big.bottomLeftCorner(n2, n1) = 0.5 * rect.transpose();
  return SymMat(big);
}

MeasurementEnsemble embed_asymmetric(const std::vector<Matrix>& rect_mats,
                                     const Vector& y) {
  if (rect_mats.empty()) throw DimensionError("embed_asymmetric: no matrices");
  const Index n1 = rect_mats.front().rows();
  const Index n2 = rect_mats.front().cols();
  std::vector<SymMat> mats;
  mats.reserve(rect_mats.size());
  for (const Matrix& b : rect_mats) {
    if (b.rows() != n1 || b.cols() != n2) {
      throw DimensionError("embed_asymmetric: shape mismatch, expected " +
                           std::to_string(n1) + "x" + std::to_string(n2) +
                           ", got " + shape_string(b));
    }
    mats.push_back(embed_block(b));
  }
  return MeasurementEnsemble(std::move(mats), y);
}

ProblemInstance make_planted_instance(const MeasurementEnsemble& e,
                                      const SymMat& planted, ProblemKind kind,
                                      std::uint64_t seed) {
  const double floor = -tol::kPsdSlack * std::max(1.0, planted.frobenius_norm());
  if (min_eigenvalue(planted) < floor) {
    throw NumericalError("make_planted_instance: planted matrix is not PSD");
  }
  return ProblemInstance{e.with_targets(apply(e, planted)), planted, kind, seed};
}

ProblemInstance build_instance(const InstanceSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case ProblemKind::gaussian:
      return make_planted_instance(gen_gaussian(spec.n, spec.m, seed),
                                   gen_planted(spec.n, spec.r, spec.planted, seed),
                                   spec.kind, seed);
    case ProblemKind::completion_uniform:
    case ProblemKind::completion_powerlaw: {
      const auto dist = spec.kind == ProblemKind::completion_uniform
                            ? CompletionDist::uniform
                            : CompletionDist::powerlaw;
      return make_planted_instance(
          gen_completion(spec.n, spec.m, dist, seed, spec.powerlaw_gamma),
          gen_planted(spec.n, spec.r, spec.planted, seed), spec.kind, seed);
    }
    case ProblemKind::diagonal:
      return make_planted_instance(gen_diagonal(spec.n, spec.m, seed),
                                   gen_planted_diagonal(spec.n, spec.r, seed),
                                   spec.kind, seed);
    case ProblemKind::grid3x3:
      break;
  }
  throw std::invalid_argument("build_instance: kind " + to_string(spec.kind) +
                              " is enumerated by the grid search, not generated");
}

}  // namespace implreg
