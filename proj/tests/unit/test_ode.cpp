#include "implreg/ode.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace implreg::ode;

TEST(Dp45, ExponentialDecay) {
  Options o;
  o.t_max = 5.0;
  const Result r = integrate_dp45([](double, const State& y, State& dy) { dy = -y; },
                                  State::Constant(1, 1.0), 0.0, o);
  EXPECT_EQ(r.outcome, Outcome::reached_t_max);
  EXPECT_NEAR(r.t, 5.0, 1e-12);
  EXPECT_NEAR(r.y(0), std::exp(-5.0), 1e-9);
}

TEST(Dp45, HarmonicOscillatorConservesPhase) {
  Options o;
  o.t_max = 2.0 * M_PI;
  o.rel_tol = 1e-10;
  o.abs_tol = 1e-12;
  State y0(2);
  y0 << 1.0, 0.0;
  const Result r = integrate_dp45(
      [](double, const State& y, State& dy) {
        dy(0) = y(1);
        dy(1) = -y(0);
      },
      y0, 0.0, o);
  EXPECT_NEAR(r.y(0), 1.0, 1e-8);
  EXPECT_NEAR(r.y(1), 0.0, 1e-8);
}

TEST(Dp45, TimeDependentRhs) {
  // y' = cos t, y(0) = 0.
  Options o;
  o.t_max = 3.0;
  const Result r = integrate_dp45([](double t, const State&, State& dy) { dy(0) = std::cos(t); },
                                  State::Zero(1), 0.0, o);
  EXPECT_NEAR(r.y(0), std::sin(3.0), 1e-8);
}

TEST(Dp45, ObserverStops) {
  Options o;
  o.t_max = 100.0;
  const Result r = integrate_dp45([](double, const State& y, State& dy) { dy = -y; },
                                  State::Constant(1, 1.0), 0.0, o,
                                  [](double, const State& y, long) { return y(0) < 0.5; });
  EXPECT_EQ(r.outcome, Outcome::stopped);
  EXPECT_LT(r.y(0), 0.5);
  EXPECT_NEAR(r.y(0), std::exp(-r.t), 1e-8);
}

TEST(Dp45, MaxStepsAndNonFinite) {
  Options o;
  o.t_max = 1e6;
  o.max_steps = 5;
  o.max_step = 1e-3;
  const Result r = integrate_dp45([](double, const State& y, State& dy) { dy = -y; },
                                  State::Constant(1, 1.0), 0.0, o);
  EXPECT_EQ(r.outcome, Outcome::max_steps);
  EXPECT_EQ(r.accepted, 5);

  Options blow;
  blow.t_max = 10.0;
  const Result b = integrate_dp45([](double, const State& y, State& dy) { dy = y.array().square(); },
                                  State::Constant(1, 1.0), 0.0, blow);
  EXPECT_TRUE(b.outcome == Outcome::non_finite || b.outcome == Outcome::step_underflow);
}
