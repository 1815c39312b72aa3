#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "saferl/errors.hpp"
#include "saferl/envs.hpp"
#include "saferl/safety.hpp"
#include "saferl/stochastics.hpp"

namespace saferl {
namespace {

PendulumCbfParams unit_pendulum() {
  PendulumCbfParams p;
  p.dt = 0.05;
  p.mass = 1.0;
  p.length = 1.0;
  p.gravity = 10.0;
  return p;
}

TEST(PendulumStep, UprightFixedPoint) {
  const auto r = pendulum_step({0.0, 0.0}, 0.0, unit_pendulum());
  EXPECT_EQ(r.next.theta, 0.0);
  EXPECT_EQ(r.next.theta_dot, 0.0);
  EXPECT_EQ(r.reward, 0.0);
}

TEST(PendulumStep, HandEvaluatedUpdate) {
  const auto r = pendulum_step({0.1, 0.0}, 0.0, unit_pendulum());
  EXPECT_NEAR(r.next.theta, 0.1 + 0.0025 * 15.0 * std::sin(0.1), 1e-15);
  EXPECT_NEAR(r.next.theta, 0.1037437, 1e-7);
  EXPECT_NEAR(r.next.theta_dot, 0.05 * 15.0 * std::sin(0.1), 1e-15);
  EXPECT_NEAR(r.next.theta_dot, 0.0748751, 1e-7);
  EXPECT_NEAR(r.reward, -0.01, 1e-15);
}

TEST(PendulumStep, HangingFixedPoint) {
  const auto r = pendulum_step({std::numbers::pi, 0.0}, 0.0, unit_pendulum());
  EXPECT_NEAR(r.next.theta, std::numbers::pi, 1e-15);
  EXPECT_NEAR(std::abs(r.next.theta_dot), 0.0, 1e-14);
  EXPECT_NEAR(r.reward, -std::numbers::pi * std::numbers::pi, 1e-12);
}

TEST(PendulumStep, RewardUsesPreStepStateAndTorque) {
  const auto r = pendulum_step({0.2, -1.5}, 4.0, unit_pendulum());
  EXPECT_NEAR(r.reward, -(0.04 + 0.1 * 2.25 + 0.001 * 16.0), 1e-15);
}

TEST(PendulumStep, ClampsSpeedAndWrapsAngle) {
  const auto fast = pendulum_step({0.0, 7.99}, 15.0, unit_pendulum());
  EXPECT_EQ(fast.next.theta_dot, kPendulumMaxSpeed);
  const auto wrapped = pendulum_step({3.1, 8.0}, 0.0, unit_pendulum());
  EXPECT_GT(wrapped.next.theta, -std::numbers::pi);
  EXPECT_LT(wrapped.next.theta, 0.0);
  EXPECT_NEAR(wrapped.next.theta,
              3.1 + 0.4 + 0.0025 * 15 * std::sin(3.1) - 2 * std::numbers::pi,
              1e-12);
}

TEST(WrapAngle, RangeIsHalfOpen) {
  EXPECT_EQ(wrap_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(wrap_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(wrap_angle(-7.0), -7.0 + 2 * std::numbers::pi, 1e-15);
  EXPECT_EQ(wrap_angle(0.25), 0.25);
}

TEST(QuadStep, RestWithoutThrustStaysPut) {
  const QuadWorld w;
  const auto r = quad_step({{1.5, -0.5}, {0.0, 0.0}}, {0.0, 0.0}, w, 0.1);
  EXPECT_EQ(r.next.r[0], 1.5);
  EXPECT_EQ(r.next.r[1], -0.5);
}

TEST(QuadStep, HandEvaluatedUpdate) {
  const QuadWorld w;
  const auto r = quad_step({{0.0, 0.0}, {0.0, 0.0}}, {1.0, 0.0}, w, 0.1);
  EXPECT_NEAR(r.next.r[0], 0.005, 1e-16);
  EXPECT_EQ(r.next.r[1], 0.0);
  EXPECT_NEAR(r.next.r_dot[0], 0.1, 1e-16);
  EXPECT_EQ(r.next.r_dot[1], 0.0);
}

TEST(QuadStep, MatchesMatrixExponentialOfDoubleIntegrator) {
  // exp([[0, I], [0, 0]] dt) = [[I, dt I], [0, I]]; the input integral gives
  // [dt^2/2 I; dt I]. Composing two half steps must equal one full step.
  const QuadWorld w;
  const QuadState s{{0.3, -1.2}, {0.7, 2.0}};
  const Vec2 u = {-2.5, 1.25};
  const auto full = quad_step(s, u, w, 0.1);
  const auto half = quad_step(quad_step(s, u, w, 0.05).next, u, w, 0.05);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(full.next.r[i], half.next.r[i], 1e-14);
    EXPECT_NEAR(full.next.r_dot[i], half.next.r_dot[i], 1e-14);
  }
}

TEST(QuadStep, GoalBranch) {
  const QuadWorld w;
  const auto r = quad_step({{4.9, 5.1}, {0.0, 0.0}}, {0.0, 0.0}, w, 0.1);
  EXPECT_TRUE(r.reached_goal);
  EXPECT_EQ(r.reward, 50.0);
  EXPECT_EQ(r.branch, QuadRewardBranch::kGoal);
}

TEST(QuadReward, InsideAndOutsideBranches) {
  const QuadWorld w;
  EXPECT_NEAR(quad_reward({2.0, 1.0}, w), -5.0, 1e-15);
  EXPECT_EQ(quad_reward_branch({2.0, 1.0}, w), QuadRewardBranch::kInside);
  EXPECT_NEAR(quad_reward({9.0, 8.0}, w), -5.0 - 400.0, 1e-12);
  EXPECT_EQ(quad_reward_branch({9.0, 8.0}, w), QuadRewardBranch::kOutside);
  // Touching a boundary counts as outside.
  EXPECT_EQ(quad_reward_branch({-2.0, 3.0}, w), QuadRewardBranch::kOutside);
  EXPECT_EQ(quad_reward_branch({5.0 + 0.25, 5.0}, w), QuadRewardBranch::kInside);
}

TEST(QuadReward, BranchesPartitionThePlane) {
  Rng rng(1);
  const QuadWorld w;
  for (int i = 0; i < 100000; ++i) {
    const Vec2 r = {rng.uniform(-5, 11), rng.uniform(-5, 11)};
    const double d = std::hypot(r[0] - 5.0, r[1] - 5.0);
    const bool goal = d < 0.25;
    const bool outside = !goal && (r[0] <= -2 || r[0] >= 8 || r[1] <= -2 || r[1] >= 8);
    const bool inside = !goal && !outside;
    ASSERT_EQ(goal + outside + inside, 1);
    const auto b = quad_reward_branch(r, w);
    EXPECT_EQ(b == QuadRewardBranch::kGoal, goal);
    EXPECT_EQ(b == QuadRewardBranch::kOutside, outside);
    EXPECT_EQ(b == QuadRewardBranch::kInside, inside);
  }
}

TEST(QuadWorld, GoalMustBeInsideBounds) {
  QuadWorld w;
  w.r_goal = {9.0, 5.0};
  EXPECT_THROW(w.validate(), ConfigError);
  w = QuadWorld{};
  w.eps_goal = 0.0;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(PendulumEnv, OriginSafeSetIsTorqueBox) {
  PendulumConfig cfg;
  cfg.cbf.eta = 0.5;
  cfg.cbf.theta_bound = 1.0;
  const PendulumEnv env(cfg);
  const auto c = env.safe_action_set({0.0, 0.0});
  EXPECT_EQ(c.outer_box().lower[0], -15.0);
  EXPECT_EQ(c.outer_box().upper[0], 15.0);
}

TEST(PendulumEnv, ResetDrawsInsideShrunkenBound) {
  const PendulumEnv env(PendulumConfig{});
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const auto s = env.reset(rng);
    EXPECT_LE(std::abs(s[0]), 0.9 * 0.5);
    EXPECT_LE(std::abs(s[1]), 1.0);
    EXPECT_TRUE(env.is_safe(s));
  }
}

TEST(PendulumEnv, ResetIsDeterministicPerSeed) {
  const PendulumEnv env(PendulumConfig{});
  Rng a(99), b(99);
  EXPECT_EQ(env.reset(a), env.reset(b));
}

TEST(PendulumEnv, StepIsPure) {
  const PendulumEnv env(PendulumConfig{});
  const EnvState s = {0.2, 0.4};
  const std::vector<double> u = {1.5};
  const auto a = env.step(s, u);
  const auto b = env.step(s, u);
  EXPECT_EQ(a.next, b.next);
  EXPECT_EQ(a.reward, b.reward);
}

TEST(PendulumEnv, SafetyClosureUnderSafeActions) {
  const PendulumEnv env(PendulumConfig{});
  const double bound = env.config().cbf.theta_bound;
  Rng rng(5);
  int checked = 0;
  while (checked < 100000) {
    const EnvState s = {rng.uniform(-bound, bound), rng.uniform(-8, 8)};
    SafeActionSet c = SafeActionSet::interval(0, 1);
    try {
      c = env.safe_action_set(s);
    } catch (const SafeSetEmpty&) {
      continue;
    }
    ++checked;
    const double u = checked % 3 == 0   ? c.outer_box().lower[0]
                     : checked % 3 == 1 ? c.outer_box().upper[0]
                                        : c.sample_uniform(rng)[0];
    const auto next = env.step(s, std::vector<double>{u}).next;
    ASSERT_LE(std::abs(next[0]), bound + 1e-9) << s[0] << " " << s[1] << " " << u;
  }
}

TEST(PendulumEnv, UnsafeStartRejected) {
  PendulumConfig cfg;
  cfg.start = {0.8, 0.0};
  EXPECT_THROW(PendulumEnv{cfg}, ConfigError);
}

TEST(QuadcopterEnv, FarFromObstacleSetIsWholeBox) {
  const QuadcopterEnv env(QuadConfig{});
  const auto c = env.safe_action_set({7.0, -1.0, 0.1, -0.1});
  EXPECT_EQ(c.sampling_box(), env.actuator_box());
  const auto& a = c.halfspace_row();
  for (double x : {-5.0, 5.0}) {
    for (double y : {-5.0, 5.0}) {
      EXPECT_LE(a[0] * x + a[1] * y, c.halfspace_offset());
    }
  }
}

TEST(QuadcopterEnv, UnsafeStateIsPreconditionViolation) {
  const QuadcopterEnv env(QuadConfig{});
  EXPECT_THROW(env.safe_action_set({2.5, 2.5, 0.0, 0.0}), PreconditionViolated);
  EXPECT_FALSE(env.is_safe({2.5, 2.5, 0.0, 0.0}));
}

TEST(QuadcopterEnv, ResetIsFixedSafeStartAtRest) {
  const QuadcopterEnv env(QuadConfig{});
  Rng a(1), b(2);
  const auto s = env.reset(a);
  EXPECT_EQ(s, env.reset(b));
  EXPECT_EQ(s, (EnvState{0.0, 0.0, 0.0, 0.0}));
  EXPECT_GT(env.safety_margin(s), 0.0);
}

TEST(QuadcopterEnv, StartInsideObstacleRejected) {
  QuadConfig cfg;
  cfg.start = {2.5, 2.6};
  EXPECT_THROW(QuadcopterEnv{cfg}, ConfigError);
}

TEST(QuadcopterEnv, SafetyClosureUnderUniformInnerBoxActions) {
  const QuadcopterEnv env(QuadConfig{});
  Rng root(7);
  for (int rollout = 0; rollout < 100; ++rollout) {
    Rng rng = root.split(static_cast<std::uint64_t>(rollout));
    EnvState s = env.reset(rng);
    for (int k = 0; k < 500; ++k) {
      const auto c = env.safe_action_set(s);
      s = env.step(s, c.sampling_box().sample_uniform(rng)).next;
      ASSERT_GE(env.safety_margin(s), -1e-3) << rollout << " step " << k;
    }
  }
}

TEST(QuadcopterEnv, FeaturesAreBoundedAndFinite) {
  const QuadcopterEnv env(QuadConfig{});
  for (double x : {-1e6, -3.0, 0.0, 4.0, 1e6}) {
    const auto f = env.features({x, -x, x, 0.5 * x});
    ASSERT_EQ(f.size(), env.feature_dim());
    for (double v : f) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_LE(std::abs(v), 2.0);
    }
  }
}

}  // namespace
}  // namespace saferl
