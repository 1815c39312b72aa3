#include "saferl/safety.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "saferl/errors.hpp"

namespace saferl {

void PendulumCbfParams::validate() const {
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("pendulum: eta must lie in (0, 1)");
  if (!(dt > 0.0)) throw ConfigError("pendulum: dt must be positive");
  if (!(mass > 0.0) || !(length > 0.0)) {
    throw ConfigError("pendulum: mass and length must be positive");
  }
  if (!(theta_bound > 0.0)) throw ConfigError("pendulum: theta_bound must be positive");
  torque_box.validate();
  if (torque_box.dim() != 1) throw ConfigError("pendulum: torque box must be 1-D");
}

std::array<double, 2> pendulum_barrier(double theta, double theta_bound) {
  return {theta + theta_bound, theta_bound - theta};
}

SafeActionSet pendulum_safe_interval(double theta, double theta_dot,
                                     const PendulumCbfParams& p) {
  if (std::abs(theta) > p.theta_bound + kPendulumSafetyTolerance) {
    throw PreconditionViolated("pendulum_safe_interval: state outside safe set");
  }
  // theta_{k+1} - theta_k = dt*theta_dot + dt^2 (gg sin(theta) + gi u), and
  // both barrier components must keep at least (1 - eta) of their value.
  const double dt2 = p.dt * p.dt;
  const double drift = p.dt * theta_dot + dt2 * p.gravity_gain() * std::sin(theta);
  const double gain = dt2 * p.input_gain();
  const auto h = pendulum_barrier(theta, p.theta_bound);
  const double cbf_lo = (-p.eta * h[0] - drift) / gain;
  const double cbf_hi = (p.eta * h[1] - drift) / gain;
  const double lo = std::max(cbf_lo, p.torque_box.lower[0]);
  const double hi = std::min(cbf_hi, p.torque_box.upper[0]);
  if (!(lo <= hi)) {
    throw SafeSetEmpty("pendulum: CBF interval [" + std::to_string(cbf_lo) +
                       ", " + std::to_string(cbf_hi) +
                       "] misses the torque box");
  }
  return SafeActionSet::interval(lo, hi);
}

void QuadEcbfParams::validate() const {
  if (!(a > 0.0 && b > 0.0 && c > 0.0)) {
    throw ConfigError("quadcopter: obstacle semi-axes must be positive");
  }
  if (!(r_s > 0.0)) throw ConfigError("quadcopter: r_s must be positive");
  if (!(k1 > 0.0 && k2 > 0.0)) throw ConfigError("quadcopter: ECBF gains must be positive");
  if (!(dt > 0.0)) throw ConfigError("quadcopter: dt must be positive");
  accel_box.validate();
  if (accel_box.dim() != 2) throw ConfigError("quadcopter: accel box must be 2-D");
}

namespace {

Vec2 semi_axes(const QuadEcbfParams& p) { return {p.a, p.b}; }

}  // namespace

double quad_h(const Vec2& r, const QuadEcbfParams& p) {
  const Vec2 s = semi_axes(p);
  double h = -p.r_s;
  for (int i = 0; i < 2; ++i) {
    const double q = (r[i] - p.r_obs[i]) / s[i];
    h += (q * q) * (q * q);
  }
  return h;
}

double quad_h_dot(const Vec2& r, const Vec2& r_dot, const QuadEcbfParams& p) {
  const Vec2 s = semi_axes(p);
  double hd = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double d = r[i] - p.r_obs[i];
    hd += 4.0 * d * d * d / std::pow(s[i], 4) * r_dot[i];
  }
  return hd;
}

Halfspace quad_ecbf_halfspace(const Vec2& r, const Vec2& r_dot,
                              const QuadEcbfParams& p) {
  const Vec2 s = semi_axes(p);
  Halfspace hs;
  double quad_form = 0.0;  // r_dot^T D_r r_dot
  double a_dot_v = 0.0;    // A_r r_dot
  for (int i = 0; i < 2; ++i) {
    const double d = r[i] - p.r_obs[i];
    const double s4 = std::pow(s[i], 4);
    hs.a_row[i] = -4.0 * d * d * d / s4;
    quad_form += 12.0 * d * d / s4 * r_dot[i] * r_dot[i];
    a_dot_v += hs.a_row[i] * r_dot[i];
  }
  hs.b = quad_form + p.k1 * quad_h(r, p) - p.k2 * a_dot_v;
  return hs;
}

double quad_ecbf_residual(const Vec2& r, const Vec2& r_dot, const Vec2& u,
                          const QuadEcbfParams& p) {
  const Vec2 s = semi_axes(p);
  double h_ddot = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double q = (r[i] - p.r_obs[i]) / s[i];
    h_ddot += 12.0 * q * q * r_dot[i] * r_dot[i] / (s[i] * s[i]) +
              4.0 * q * q * q * u[i] / s[i];
  }
  return h_ddot + p.k1 * quad_h(r, p) + p.k2 * quad_h_dot(r, r_dot, p);
}

ActionBox max_inner_hyperrectangle(std::span<const double> a_row, double b,
                                   const ActionBox& box) {
  box.validate();
  if (box.dim() != 2 || a_row.size() != 2) {
    throw DimensionMismatch("max_inner_hyperrectangle: 2-D only");
  }
  const double width[2] = {box.upper[0] - box.lower[0],
                           box.upper[1] - box.lower[1]};

  if (a_row[0] == 0.0 && a_row[1] == 0.0) {
    if (b >= 0.0) return box;
    throw SafeSetEmpty("max_inner_hyperrectangle: 0 <= b fails with A = 0");
  }

  // Each candidate anchors one corner of the box and grows the rectangle
  // inward by (w0, w1). Only the far corner can bind: along a dimension with
  // positive slope k_i the constraint tightens as w_i grows, with k_i <= 0 it
  // never binds. Cases are tried starting from the u_min corner so ties go
  // to it.
  struct Best {
    double area = -1.0;
    ActionBox rect;
  } best;

  for (int corner = 0; corner < 4; ++corner) {
    const bool from_upper[2] = {corner == 2 || corner == 3,
                                corner == 1 || corner == 2};
    double anchor[2];
    double k[2];
    for (int i = 0; i < 2; ++i) {
      anchor[i] = from_upper[i] ? box.upper[i] : box.lower[i];
      k[i] = from_upper[i] ? -a_row[i] : a_row[i];
    }
    const double slack = b - (a_row[0] * anchor[0] + a_row[1] * anchor[1]);
    if (slack < 0.0) continue;

    double w[2] = {width[0], width[1]};
    const bool bind0 = k[0] > 0.0;
    const bool bind1 = k[1] > 0.0;
    if (bind0 && bind1) {
      if (k[0] * width[0] + k[1] * width[1] > slack) {
        // Far corner on the line k0 w0 + k1 w1 = slack; area
        // w0 (slack - k0 w0) / k1 is concave with peak at slack / (2 k0).
        const double lo = std::max(0.0, (slack - k[1] * width[1]) / k[0]);
        const double hi = std::min(width[0], slack / k[0]);
        const double w0 = std::clamp(slack / (2.0 * k[0]), lo, hi);
        w[0] = w0;
        w[1] = std::clamp((slack - k[0] * w0) / k[1], 0.0, width[1]);
      }
    } else if (bind0) {
      w[0] = std::min(width[0], slack / k[0]);
    } else if (bind1) {
      w[1] = std::min(width[1], slack / k[1]);
    }

    const double area = w[0] * w[1];
    if (area > best.area) {
      ActionBox rect;
      rect.lower.resize(2);
      rect.upper.resize(2);
      for (int i = 0; i < 2; ++i) {
        if (from_upper[i]) {
          rect.upper[i] = box.upper[i];
          rect.lower[i] = std::max(box.lower[i], box.upper[i] - w[i]);
        } else {
          rect.lower[i] = box.lower[i];
          rect.upper[i] = std::min(box.upper[i], box.lower[i] + w[i]);
        }
      }
      best = {area, std::move(rect)};
    }
  }
  if (best.area < 0.0) {
    throw SafeSetEmpty("max_inner_hyperrectangle: halfspace misses the box");
  }
  return best.rect;
}

SafeActionSet quad_safe_action_set(const Vec2& r, const Vec2& r_dot,
                                   const QuadEcbfParams& p) {
  const Halfspace hs = quad_ecbf_halfspace(r, r_dot, p);
  ActionBox inner = max_inner_hyperrectangle(hs.a_row, hs.b, p.accel_box);
  return SafeActionSet::halfspace_box({hs.a_row[0], hs.a_row[1]}, hs.b,
                                      p.accel_box, std::move(inner));
}

}  // namespace saferl
