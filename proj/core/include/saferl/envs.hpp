#ifndef SAFERL_ENVS_HPP_
#define SAFERL_ENVS_HPP_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "saferl/action_sets.hpp"
#include "saferl/safety.hpp"
#include "saferl/stochastics.hpp"

namespace saferl {

// ------------------------------------------------------------- pendulum --

struct PendulumState {
  double theta = 0.0;      // rad, wrapped to (-pi, pi]
  double theta_dot = 0.0;  // rad/s, clamped to [-max_speed, max_speed]
};

inline constexpr double kPendulumMaxSpeed = 8.0;

struct PendulumStep {
  PendulumState next;
  double reward = 0.0;
};

double wrap_angle(double theta);

// theta' = theta + dt theta_dot + dt^2 (3g/(2l) sin theta + 3/(m l^2) u), the
// matching velocity update, then wrap and clamp. The reward uses the pre-step
// state: -(theta^2 + 0.1 theta_dot^2 + 0.001 u^2).
PendulumStep pendulum_step(const PendulumState& s, double u,
                           const PendulumCbfParams& p);

// ------------------------------------------------------------ quadcopter --

struct QuadState {
  Vec2 r{};
  Vec2 r_dot{};
};

struct QuadWorld {
  Vec2 r_goal = {5.0, 5.0};
  Vec2 r_min = {-2.0, -2.0};
  Vec2 r_max = {8.0, 8.0};
  double eps_goal = 0.25;
  double goal_bonus = 50.0;
  double boundary_penalty = 400.0;

  void validate() const;
};

enum class QuadRewardBranch { kGoal, kInside, kOutside };

struct QuadStep {
  QuadState next;
  double reward = 0.0;
  bool reached_goal = false;
  QuadRewardBranch branch = QuadRewardBranch::kInside;
};

QuadRewardBranch quad_reward_branch(const Vec2& r, const QuadWorld& w);
double quad_reward(const Vec2& r, const QuadWorld& w);

// Exact zero-order-hold double integrator; reward evaluated at the successor.
QuadStep quad_step(const QuadState& s, const Vec2& u, const QuadWorld& w,
                   double dt);

// ---------------------------------------------------- generic interface --

enum class EnvKind { kPendulum, kQuadcopter };

std::string to_string(EnvKind kind);

using EnvState = std::vector<double>;

struct EnvTransition {
  EnvState next;
  double reward = 0.0;
  bool reached_goal = false;
};

// Deterministic MDP consumed by the trainers. Implementations are immutable;
// states are plain values.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvKind kind() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::size_t episode_length() const = 0;

  virtual EnvState reset(Rng& rng) const = 0;
  // Fixed start state used by the random-horizon policy gradient.
  virtual EnvState start_state() const = 0;
  virtual EnvTransition step(const EnvState& state,
                             std::span<const double> u) const = 0;
  virtual std::vector<double> features(const EnvState& state) const = 0;

  // C(x). Throws SafeSetEmpty, or PreconditionViolated for unsafe states.
  virtual SafeActionSet safe_action_set(const EnvState& state) const = 0;
  virtual bool is_safe(const EnvState& state) const = 0;
  // Signed barrier margin (>= 0 inside the safe set).
  virtual double safety_margin(const EnvState& state) const = 0;

  // Box a clipped Gaussian policy is clipped to.
  virtual ActionBox actuator_box() const = 0;
};

struct PendulumConfig {
  PendulumCbfParams cbf;
  std::size_t episode_length = 300;
  PendulumState start{0.3, 0.0};
  double reset_speed = 1.0;  // theta_dot ~ U(-reset_speed, reset_speed)
};

class PendulumEnv final : public Environment {
 public:
  explicit PendulumEnv(PendulumConfig config);

  const PendulumConfig& config() const { return config_; }

  EnvKind kind() const override { return EnvKind::kPendulum; }
  std::size_t state_dim() const override { return 2; }
  std::size_t feature_dim() const override { return 3; }
  std::size_t action_dim() const override { return 1; }
  std::size_t episode_length() const override { return config_.episode_length; }

  EnvState reset(Rng& rng) const override;
  EnvState start_state() const override;
  EnvTransition step(const EnvState& state,
                     std::span<const double> u) const override;
  std::vector<double> features(const EnvState& state) const override;
  SafeActionSet safe_action_set(const EnvState& state) const override;
  bool is_safe(const EnvState& state) const override;
  double safety_margin(const EnvState& state) const override;
  ActionBox actuator_box() const override { return config_.cbf.torque_box; }

 private:
  PendulumConfig config_;
};

struct QuadConfig {
  QuadEcbfParams ecbf;
  QuadWorld world;
  Vec2 start = {0.0, 0.0};
  std::size_t episode_length = 180;
};

// States with h(r) below this are outside the (discretized) safe set.
inline constexpr double kQuadSafetyTolerance = 1e-3;

class QuadcopterEnv final : public Environment {
 public:
  explicit QuadcopterEnv(QuadConfig config);

  const QuadConfig& config() const { return config_; }

  EnvKind kind() const override { return EnvKind::kQuadcopter; }
  std::size_t state_dim() const override { return 4; }
  std::size_t feature_dim() const override { return 6; }
  std::size_t action_dim() const override { return 2; }
  std::size_t episode_length() const override { return config_.episode_length; }

  EnvState reset(Rng& rng) const override;
  EnvState start_state() const override;
  EnvTransition step(const EnvState& state,
                     std::span<const double> u) const override;
  std::vector<double> features(const EnvState& state) const override;
  SafeActionSet safe_action_set(const EnvState& state) const override;
  bool is_safe(const EnvState& state) const override;
  double safety_margin(const EnvState& state) const override;
  ActionBox actuator_box() const override { return config_.ecbf.accel_box; }

 private:
  QuadConfig config_;
};

PendulumState to_pendulum_state(const EnvState& s);
EnvState from_pendulum_state(const PendulumState& s);
QuadState to_quad_state(const EnvState& s);
EnvState from_quad_state(const QuadState& s);

}  // namespace saferl

#endif  // SAFERL_ENVS_HPP_
