#ifndef SAFERL_SAFETY_HPP_
#define SAFERL_SAFETY_HPP_

#include <array>
#include <span>

#include "saferl/action_sets.hpp"

namespace saferl {

// Discrete-time CBF for the torque-controlled pendulum with barrier
// h(theta) = [theta + theta_bound, theta_bound - theta].
// Slack on |theta| <= theta_bound absorbing floating-point rounding.
inline constexpr double kPendulumSafetyTolerance = 1e-9;

struct PendulumCbfParams {
  double eta = 0.2;
  double dt = 0.05;
  double mass = 1.0;
  double length = 1.0;
  double gravity = 10.0;
  double theta_bound = 0.5;
  ActionBox torque_box = ActionBox::cube(1, -15.0, 15.0);

  void validate() const;
  // 3g/(2l) and 3/(m l^2): the drift and input gains of the angular update.
  double gravity_gain() const { return 1.5 * gravity / length; }
  double input_gain() const { return 3.0 / (mass * length * length); }
};

// Control set keeping both barrier components decaying no faster than
// (1 - eta) per step, intersected with the torque box.
// Throws SafeSetEmpty if the intersection is empty, PreconditionViolated if
// |theta| > theta_bound.
SafeActionSet pendulum_safe_interval(double theta, double theta_dot,
                                     const PendulumCbfParams& p);

// The two barrier components at theta.
std::array<double, 2> pendulum_barrier(double theta, double theta_bound);

// Exponential CBF for a double integrator around a super-ellipsoidal
// obstacle, h(r) = sum_i (dr_i / semi_i)^4 - r_s, navigation in x-y.
struct QuadEcbfParams {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
  double r_s = 1.0;
  double k1 = 6.0;
  double k2 = 8.0;
  std::array<double, 2> r_obs = {2.5, 2.5};
  ActionBox accel_box = ActionBox::cube(2, -5.0, 5.0);
  double dt = 0.1;

  void validate() const;
};

using Vec2 = std::array<double, 2>;

double quad_h(const Vec2& r, const QuadEcbfParams& p);
// dh/dt along velocity r_dot.
double quad_h_dot(const Vec2& r, const Vec2& r_dot, const QuadEcbfParams& p);

struct Halfspace {
  Vec2 a_row{};  // A_r
  double b = 0.0;  // b_r
};

// Coefficients of A_r u <= b_r, the ECBF condition
// h_ddot + K1 h + K2 h_dot >= 0 rewritten for u = r_ddot.
Halfspace quad_ecbf_halfspace(const Vec2& r, const Vec2& r_dot,
                              const QuadEcbfParams& p);

// h_ddot + K1 h + K2 h_dot evaluated from the closed-form derivatives.
double quad_ecbf_residual(const Vec2& r, const Vec2& r_dot, const Vec2& u,
                          const QuadEcbfParams& p);

// Largest-area axis-aligned rectangle inside box ∩ {a . u <= b} (2-D).
// Throws SafeSetEmpty when the intersection is empty.
ActionBox max_inner_hyperrectangle(std::span<const double> a_row, double b,
                                   const ActionBox& box);

// quad_ecbf_halfspace followed by max_inner_hyperrectangle, packaged as a
// HalfspaceBox SafeActionSet.
SafeActionSet quad_safe_action_set(const Vec2& r, const Vec2& r_dot,
                                   const QuadEcbfParams& p);

}  // namespace saferl

#endif  // SAFERL_SAFETY_HPP_
