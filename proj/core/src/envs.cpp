#include "saferl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "saferl/errors.hpp"

namespace saferl {

double wrap_angle(double theta) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::fmod(theta + std::numbers::pi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  r -= std::numbers::pi;
  return r == -std::numbers::pi ? std::numbers::pi : r;
}

PendulumStep pendulum_step(const PendulumState& s, double u,
                           const PendulumCbfParams& p) {
  const double accel =
      p.gravity_gain() * std::sin(s.theta) + p.input_gain() * u;
  PendulumStep out;
  const double th = wrap_angle(s.theta);
  out.reward = -(th * th + 0.1 * s.theta_dot * s.theta_dot + 0.001 * u * u);
  out.next.theta = wrap_angle(s.theta + p.dt * s.theta_dot + p.dt * p.dt * accel);
  out.next.theta_dot = std::clamp(s.theta_dot + p.dt * accel,
                                  -kPendulumMaxSpeed, kPendulumMaxSpeed);
  return out;
}

void QuadWorld::validate() const {
  if (!(eps_goal > 0.0)) throw ConfigError("quadcopter: eps_goal must be positive");
  for (int i = 0; i < 2; ++i) {
    if (!(r_min[i] < r_goal[i] && r_goal[i] < r_max[i])) {
      throw ConfigError("quadcopter: r_goal must lie strictly inside the bounds");
    }
  }
}

QuadRewardBranch quad_reward_branch(const Vec2& r, const QuadWorld& w) {
  const double dist = std::hypot(r[0] - w.r_goal[0], r[1] - w.r_goal[1]);
  if (dist < w.eps_goal) return QuadRewardBranch::kGoal;
  for (int i = 0; i < 2; ++i) {
    if (r[i] <= w.r_min[i] || r[i] >= w.r_max[i]) {
      return QuadRewardBranch::kOutside;
    }
  }
  return QuadRewardBranch::kInside;
}

double quad_reward(const Vec2& r, const QuadWorld& w) {
  const double dist = std::hypot(r[0] - w.r_goal[0], r[1] - w.r_goal[1]);
  switch (quad_reward_branch(r, w)) {
    case QuadRewardBranch::kGoal:
      return w.goal_bonus;
    case QuadRewardBranch::kInside:
      return -dist;
    case QuadRewardBranch::kOutside:
      return -dist - w.boundary_penalty;
  }
  return -dist;
}

QuadStep quad_step(const QuadState& s, const Vec2& u, const QuadWorld& w,
                   double dt) {
  QuadStep out;
  for (int i = 0; i < 2; ++i) {
    out.next.r[i] = s.r[i] + s.r_dot[i] * dt + 0.5 * u[i] * dt * dt;
    out.next.r_dot[i] = s.r_dot[i] + u[i] * dt;
  }
  out.branch = quad_reward_branch(out.next.r, w);
  out.reward = quad_reward(out.next.r, w);
  out.reached_goal = out.branch == QuadRewardBranch::kGoal;
  return out;
}

std::string to_string(EnvKind kind) {
  return kind == EnvKind::kPendulum ? "pendulum" : "quadcopter";
}

PendulumState to_pendulum_state(const EnvState& s) {
  if (s.size() != 2) throw DimensionMismatch("pendulum state has 2 entries");
  return {s[0], s[1]};
}

EnvState from_pendulum_state(const PendulumState& s) {
  return {s.theta, s.theta_dot};
}

QuadState to_quad_state(const EnvState& s) {
  if (s.size() != 4) throw DimensionMismatch("quadcopter state has 4 entries");
  return {{s[0], s[1]}, {s[2], s[3]}};
}

EnvState from_quad_state(const QuadState& s) {
  return {s.r[0], s.r[1], s.r_dot[0], s.r_dot[1]};
}

// ------------------------------------------------------------ PendulumEnv --

PendulumEnv::PendulumEnv(PendulumConfig config) : config_(std::move(config)) {
  config_.cbf.validate();
  if (config_.episode_length == 0) {
    throw ConfigError("pendulum: episode_length must be positive");
  }
  if (std::abs(config_.start.theta) > config_.cbf.theta_bound) {
    throw ConfigError("pendulum: start state lies outside the safe set");
  }
}

EnvState PendulumEnv::reset(Rng& rng) const {
  const double bound = 0.9 * config_.cbf.theta_bound;
  const double theta = rng.uniform(-bound, bound);
  const double theta_dot = rng.uniform(-config_.reset_speed, config_.reset_speed);
  return {theta, theta_dot};
}

EnvState PendulumEnv::start_state() const {
  return from_pendulum_state(config_.start);
}

EnvTransition PendulumEnv::step(const EnvState& state,
                                std::span<const double> u) const {
  if (u.size() != 1) throw DimensionMismatch("pendulum action is 1-D");
  const auto r = pendulum_step(to_pendulum_state(state), u[0], config_.cbf);
  return {from_pendulum_state(r.next), r.reward, false};
}

std::vector<double> PendulumEnv::features(const EnvState& state) const {
  const auto s = to_pendulum_state(state);
  return {std::cos(s.theta), std::sin(s.theta), s.theta_dot / kPendulumMaxSpeed};
}

SafeActionSet PendulumEnv::safe_action_set(const EnvState& state) const {
  const auto s = to_pendulum_state(state);
  return pendulum_safe_interval(s.theta, s.theta_dot, config_.cbf);
}

bool PendulumEnv::is_safe(const EnvState& state) const {
  return safety_margin(state) >= -kPendulumSafetyTolerance;
}

double PendulumEnv::safety_margin(const EnvState& state) const {
  const auto h = pendulum_barrier(to_pendulum_state(state).theta,
                                  config_.cbf.theta_bound);
  return std::min(h[0], h[1]);
}

// ---------------------------------------------------------- QuadcopterEnv --

QuadcopterEnv::QuadcopterEnv(QuadConfig config) : config_(std::move(config)) {
  config_.ecbf.validate();
  config_.world.validate();
  if (config_.episode_length == 0) {
    throw ConfigError("quadcopter: episode_length must be positive");
  }
  if (!(quad_h(config_.start, config_.ecbf) > 0.0)) {
    throw ConfigError("quadcopter: start position must satisfy h(r) > 0");
  }
}

EnvState QuadcopterEnv::reset(Rng&) const { return start_state(); }

EnvState QuadcopterEnv::start_state() const {
  return from_quad_state({config_.start, {0.0, 0.0}});
}

EnvTransition QuadcopterEnv::step(const EnvState& state,
                                  std::span<const double> u) const {
  if (u.size() != 2) throw DimensionMismatch("quadcopter action is 2-D");
  const auto r = quad_step(to_quad_state(state), {u[0], u[1]}, config_.world,
                           config_.ecbf.dt);
  return {from_quad_state(r.next), r.reward, r.reached_goal};
}

std::vector<double> QuadcopterEnv::features(const EnvState& state) const {
  const auto s = to_quad_state(state);
  // Slope 0.2 near the origin, bounded by 2 so far-off states stay distinct
  // without saturating the hidden layers.
  const auto squash = [](double v) { return 2.0 * std::tanh(0.1 * v); };
  const auto& g = config_.world.r_goal;
  const auto& o = config_.ecbf.r_obs;
  return {squash(s.r[0] - g[0]),  squash(s.r[1] - g[1]),
          squash(s.r_dot[0]),     squash(s.r_dot[1]),
          squash(s.r[0] - o[0]),  squash(s.r[1] - o[1])};
}

SafeActionSet QuadcopterEnv::safe_action_set(const EnvState& state) const {
  const auto s = to_quad_state(state);
  if (quad_h(s.r, config_.ecbf) < -kQuadSafetyTolerance) {
    throw PreconditionViolated("quadcopter: state violates h(r) >= -1e-3");
  }
  return quad_safe_action_set(s.r, s.r_dot, config_.ecbf);
}

bool QuadcopterEnv::is_safe(const EnvState& state) const {
  return safety_margin(state) >= -kQuadSafetyTolerance;
}

double QuadcopterEnv::safety_margin(const EnvState& state) const {
  return quad_h(to_quad_state(state).r, config_.ecbf);
}

}  // namespace saferl
