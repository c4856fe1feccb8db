#include "implreg/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace implreg::ode {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

double rms(const State& v) {
  return v.size() == 0 ? 0.0 : v.norm() / std::sqrt(static_cast<double>(v.size()));
}

State scale_of(const State& a, const State& b, const Options& o) {
  return (o.abs_tol + o.rel_tol * a.cwiseAbs().cwiseMax(b.cwiseAbs()).array())
      .matrix();
}

double initial_step(const Rhs& f, double t0, const State& y0, const State& f0,
                    const Options& o) {
  const State sc = scale_of(y0, y0, o);
  const double d0 = rms(y0.cwiseQuotient(sc));
  const double d1 = rms(f0.cwiseQuotient(sc));
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  const State y1 = y0 + h0 * f0;
  State f1(y0.size());
  f(t0 + h0, y1, f1);
  const double d2 = rms((f1 - f0).cwiseQuotient(sc)) / h0;
  const double dmax = std::max(d1, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                  : std::pow(0.01 / dmax, 1.0 / 5.0);
  return std::min(100.0 * h0, h1);
}

}  // namespace

Result integrate_dp45(const Rhs& f, State y, double t, const Options& opts,
                      const Observer& observer, const Projection& project) {
  const Eigen::Index dim = y.size();
  State k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim);
  State ytmp(dim), ynew(dim);

  Result res;
  f(t, y, k1);
  if (!k1.allFinite()) {
    res.y = y;
    res.t = t;
    res.outcome = Outcome::non_finite;
    return res;
  }
  double h = opts.initial_step > 0 ? opts.initial_step
                                   : initial_step(f, t, y, k1, opts);
  if (opts.max_step > 0) h = std::min(h, opts.max_step);
  bool last_rejected = false;

  for (;;) {
    if (t >= opts.t_max) {
      res.outcome = Outcome::reached_t_max;
      break;
    }
    if (res.accepted >= opts.max_steps) {
      res.outcome = Outcome::max_steps;
      break;
    }
    const double h_floor =
        16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < h_floor) {
      res.outcome = Outcome::step_underflow;
      break;
    }
    h = std::min(h, opts.t_max - t);

    ytmp = y + h * a21 * k1;
    f(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(t + h, ynew, k7);

    const State err =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double enorm = rms(err.cwiseQuotient(scale_of(y, ynew, opts)));
    if (!std::isfinite(enorm) || !k7.allFinite()) enorm = 1e10;

    if (enorm <= 1.0) {
      t += h;
      y.swap(ynew);
      k1.swap(k7);
      ++res.accepted;
      double fac = enorm == 0.0 ? kMaxFactor
                                : kSafety * std::pow(enorm, -1.0 / 5.0);
      fac = std::clamp(fac, kMinFactor, last_rejected ? 1.0 : kMaxFactor);
      h *= fac;
      if (opts.max_step > 0) h = std::min(h, opts.max_step);
      last_rejected = false;
      if (!y.allFinite()) {
        res.outcome = Outcome::non_finite;
        break;
      }
      if (project && project(y)) f(t, y, k1);
      if (observer && observer(t, y, res.accepted)) {
        res.outcome = Outcome::stopped;
        break;
      }
    } else {
      ++res.rejected;
      h *= std::max(kMinFactor, kSafety * std::pow(enorm, -1.0 / 5.0));
      last_rejected = true;
    }
  }
  res.y = std::move(y);
  res.t = t;
  return res;
}

}  // namespace implreg::ode
