#pragma once

#include <Eigen/Core>

#include <functional>

namespace implreg::ode {

using State = Eigen::VectorXd;

/// dy/dt = f(t, y), written into `dy`.
using Rhs = std::function<void(double t, const State& y, State& dy)>;

/// Called after every accepted step; return true to stop integration.
using Observer = std::function<bool(double t, const State& y, long step)>;

/// Maps an accepted state back onto a constraint set; returns true when it
/// changed the state.
using Projection = std::function<bool(State& y)>;

struct Options {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double t_max = 1e7;
  long max_steps = 1'000'000;
  double initial_step = 0.0;  // <= 0 selects the step automatically
  double max_step = 0.0;      // <= 0 means unbounded
};

enum class Outcome { stopped, reached_t_max, max_steps, step_underflow, non_finite };

struct Result {
  State y;
  double t = 0.0;
  long accepted = 0;
  long rejected = 0;
  Outcome outcome = Outcome::reached_t_max;
};

/**
 * Adaptive Dormand-Prince 5(4) integration with FSAL, error norm
 * ||err_i / (abs_tol + rel_tol * max(|y_i|, |y_new_i|))||_rms and the
 * standard 0.9 * err^(-1/5) step controller.
 */
Result integrate_dp45(const Rhs& f, State y0, double t0, const Options& opts,
                      const Observer& observer = {}, const Projection& project = {});

}  // namespace implreg::ode
