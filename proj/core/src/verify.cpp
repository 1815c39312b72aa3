#include "saferl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "saferl/errors.hpp"
#include "saferl/policies.hpp"
#include "saferl/safety.hpp"
#include "saferl/trainers.hpp"

namespace saferl {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0,
                double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) r.mean += x;
  r.mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(ss / (n - 1.0) / n);
  return r;
}

// Continuing deterministic chain: state i pays rewards[i] whatever the action
// and moves to (i + 1) mod n.
class ChainEnv final : public Environment {
 public:
  ChainEnv(std::vector<double> rewards) : rewards_(std::move(rewards)) {}

  EnvKind kind() const override { return EnvKind::kPendulum; }
  std::size_t state_dim() const override { return 1; }
  std::size_t feature_dim() const override { return 1; }
  std::size_t action_dim() const override { return 1; }
  std::size_t episode_length() const override { return 1; }
  EnvState reset(Rng&) const override { return {0.0}; }
  EnvState start_state() const override { return {0.0}; }
  EnvTransition step(const EnvState& s, std::span<const double>) const override {
    const auto i = static_cast<std::size_t>(s[0]);
    return {{static_cast<double>((i + 1) % rewards_.size())}, rewards_[i], false};
  }
  std::vector<double> features(const EnvState& s) const override { return s; }
  SafeActionSet safe_action_set(const EnvState&) const override {
    return SafeActionSet::interval(-1.0, 1.0);
  }
  bool is_safe(const EnvState&) const override { return true; }
  double safety_margin(const EnvState&) const override { return 1.0; }
  ActionBox actuator_box() const override { return ActionBox::cube(1, -1, 1); }

 private:
  std::vector<double> rewards_;
};

ActionSampler uniform_sampler(const Environment& env) {
  return [&env](const EnvState& x, Rng& rng) {
    return env.safe_action_set(x).sample_uniform(rng);
  };
}

// ------------------------------------------------------------------ estq --

std::vector<CheckResult> suite_estq(std::uint64_t seed) {
  std::vector<CheckResult> out;
  constexpr int kCalls = 100000;
  const double c = 1.5;
  for (double gamma : {0.5, 0.9, 0.99}) {
    ChainEnv env({c});
    const auto sampler = uniform_sampler(env);
    Rng rng = Rng(seed).split(static_cast<std::uint64_t>(gamma * 1000));
    std::vector<double> qs(kCalls);
    const std::vector<double> u0{0.0};
    for (double& q : qs) q = est_q(env, sampler, {0.0}, u0, gamma, rng);
    const auto s = mean_se(qs);
    const double truth = c / (1.0 - gamma);
    const double z = std::abs(s.mean - truth) / s.se;
    out.push_back({fmt("constant reward, gamma=%.2f", gamma), z <= 3.0,
                   fmt("mean %.5g vs %.5g (z=%.2f)", s.mean, truth, z)});
  }

  // Two-state alternating chain against truncated value iteration.
  const double gamma = 0.5;
  ChainEnv env({1.0, -2.0});
  std::array<double, 2> v{0.0, 0.0};
  for (int it = 0; it < 10000; ++it) {
    v = {1.0 + gamma * v[1], -2.0 + gamma * v[0]};
  }
  Rng rng = Rng(seed).split(77);
  std::vector<double> qs(kCalls);
  const auto sampler = uniform_sampler(env);
  const std::vector<double> u0{0.0};
  for (double& q : qs) q = est_q(env, sampler, {0.0}, u0, gamma, rng);
  const auto s = mean_se(qs);
  const double z = std::abs(s.mean - v[0]) / s.se;
  out.push_back({"two-state chain, gamma=0.50", z <= 3.0,
                 fmt("mean %.5g vs %.5g (z=%.2f)", s.mean, v[0], z)});
  return out;
}

// ---------------------------------------------------------------- scores --

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

template <class F>
std::vector<double> central_diff(const Policy& policy, F f, double h) {
  std::vector<double> g(policy.params().size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    ParamVector plus = policy.params(), minus = policy.params();
    plus.values[i] += h;
    minus.values[i] -= h;
    g[i] = (f(policy.with_params(plus)) - f(policy.with_params(minus))) /
           (2.0 * h);
  }
  return g;
}

std::vector<CheckResult> suite_scores(std::uint64_t seed) {
  std::vector<CheckResult> out;
  constexpr int kConfigs = 25;
  Rng rng = Rng(seed).split(5);

  double worst_beta = 0.0;
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = 1 + rng.uniform_index(2);
    Policy p = Policy::beta_box(3, n, {6}, rng);
    std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1),
                          rng.uniform(-1, 1)};
    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = rng.uniform(-3, 0);
      hi[i] = lo[i] + rng.uniform(0.5, 3);
    }
    const ActionBox box = ActionBox::make(lo, hi);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = lo[i] + (hi[i] - lo[i]) * rng.uniform(0.05, 0.95);
    }
    const auto analytic = beta_policy_score(p, x, u, box).values;
    const auto fd = central_diff(
        p, [&](const Policy& q) { return beta_policy_log_prob(q, x, u, box); },
        1e-5);
    worst_beta = std::max(worst_beta, rel_error(analytic, fd));
  }
  out.push_back({"beta box score vs finite differences", worst_beta <= 1e-4,
                 fmt("max relative error %.3g over %g configs", worst_beta,
                     kConfigs)});

  double worst_gauss = 0.0;
  for (int k = 0; k < kConfigs; ++k) {
    Policy p = Policy::gaussian_clipped(2, 1, {5}, ActionBox::cube(1, -10, 10),
                                        rng);
    ParamVector params = p.params();
    params.values.back() = rng.uniform(-1.0, 0.5);  // log-std
    p.set_params(params);
    std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double lo = rng.uniform(-2, 0.5);
    const SafeActionSet c = SafeActionSet::interval(lo, lo + rng.uniform(0.3, 2));
    const std::vector<double> u{
        lo + c.volume() * rng.uniform(0.05, 0.95)};
    const auto analytic =
        truncated_score_quadrature(p, x, u, c).score.values;
    const auto fd = central_diff(
        p,
        [&](const Policy& q) {
          return ConditionedPolicy(q, x).log_density(u) -
                 std::log(estimate_normalization_quadrature(q, x, c));
        },
        1e-5);
    worst_gauss = std::max(worst_gauss, rel_error(analytic, fd));
  }
  out.push_back({"truncated Gaussian score (quadrature) vs finite differences",
                 worst_gauss <= 1e-4,
                 fmt("max relative error %.3g over %g configs", worst_gauss,
                     kConfigs)});

  // Beta support equal to C: the truncation correction vanishes.
  Policy p = Policy::beta_box(3, 1, {4}, rng);
  const std::vector<double> x{0.1, -0.2, 0.3};
  const SafeActionSet c = SafeActionSet::interval(-2.0, 1.0);
  const std::vector<double> u{0.25};
  const auto est = truncated_score(p, x, u, c, 64, rng, &c.sampling_box());
  const auto base = beta_policy_score(p, x, u, c.sampling_box());
  out.push_back({"beta support = C gives zero correction",
                 est.score == base && est.normalization == 1.0,
                 fmt("normalization %.17g", est.normalization)});
  return out;
}

// --------------------------------------------------------------- maxrect --

// Best rectangle whose x-edges lie on a 201-point lattice, with the y-extent
// solved exactly for each pair of x-edges.
double grid_max_rectangle(const std::vector<double>& a, double b,
                          const ActionBox& box) {
  constexpr int kGrid = 200;
  double best = 0.0;
  for (int i = 0; i <= kGrid; ++i) {
    const double x1 = box.lower[0] + (box.upper[0] - box.lower[0]) * i / kGrid;
    for (int j = i + 1; j <= kGrid; ++j) {
      const double x2 =
          box.lower[0] + (box.upper[0] - box.lower[0]) * j / kGrid;
      const double slack = b - std::max(a[0] * x1, a[0] * x2);
      double y_lo = box.lower[1], y_hi = box.upper[1];
      if (a[1] > 0.0) {
        y_hi = std::min(y_hi, slack / a[1]);
      } else if (a[1] < 0.0) {
        y_lo = std::max(y_lo, slack / a[1]);
      } else if (slack < 0.0) {
        continue;
      }
      if (y_hi > y_lo) best = std::max(best, (x2 - x1) * (y_hi - y_lo));
    }
  }
  return best;
}

std::vector<CheckResult> suite_maxrect(std::uint64_t seed) {
  constexpr int kInstances = 500;
  Rng rng = Rng(seed).split(9);
  int area_fail = 0, corner_fail = 0, empty_mismatch = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kInstances; ++k) {
    const ActionBox box = ActionBox::make(
        {rng.uniform(-6, -1), rng.uniform(-6, -1)},
        {rng.uniform(1, 6), rng.uniform(1, 6)});
    const std::vector<double> a{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const double b = rng.uniform(-4, 8);
    const double oracle = grid_max_rectangle(a, b, box);
    try {
      const ActionBox r = max_inner_hyperrectangle(a, b, box);
      const double area = r.volume();
      if (oracle > 0.0) worst_ratio = std::min(worst_ratio, area / oracle);
      if (area < 0.99 * oracle) ++area_fail;
      for (int corner = 0; corner < 4; ++corner) {
        const double x = (corner & 1) ? r.upper[0] : r.lower[0];
        const double y = (corner & 2) ? r.upper[1] : r.lower[1];
        if (a[0] * x + a[1] * y > b + 1e-9 || !box.contains(std::vector{x, y}, 1e-12)) {
          ++corner_fail;
        }
      }
    } catch (const SafeSetEmpty&) {
      if (oracle > 0.0) ++empty_mismatch;
    }
  }
  return {
      {"area within 1% of grid oracle", area_fail == 0 && empty_mismatch == 0,
       fmt("%g failures, %g wrongly empty, worst ratio %.4f", area_fail,
           empty_mismatch, worst_ratio)},
      {"corners satisfy A u <= b + 1e-9", corner_fail == 0,
       fmt("%g violating corners", corner_fail)}};
}

// ------------------------------------------------------------ invariance --

std::vector<CheckResult> suite_invariance(std::uint64_t seed) {
  std::vector<CheckResult> out;
  Rng rng = Rng(seed).split(13);
  const PendulumCbfParams p;
  constexpr int kStates = 100000;
  int failures = 0, empty = 0;
  for (int k = 0; k < kStates;) {
    const PendulumState s{rng.uniform(-p.theta_bound, p.theta_bound),
                          rng.uniform(-kPendulumMaxSpeed, kPendulumMaxSpeed)};
    SafeActionSet c = SafeActionSet::interval(0, 1);
    try {
      c = pendulum_safe_interval(s.theta, s.theta_dot, p);
    } catch (const SafeSetEmpty&) {
      ++empty;
      continue;
    }
    ++k;
    const auto& box = c.sampling_box();
    for (double u : {box.lower[0], box.upper[0], c.sample_uniform(rng)[0]}) {
      const auto next = pendulum_step(s, u, p).next;
      const auto h0 = pendulum_barrier(s.theta, p.theta_bound);
      const auto h1 = pendulum_barrier(next.theta, p.theta_bound);
      const bool ok = h1[0] - h0[0] >= -p.eta * h0[0] - 1e-9 &&
                      h1[1] - h0[1] >= -p.eta * h0[1] - 1e-9 &&
                      std::abs(next.theta) <= p.theta_bound + 1e-9;
      if (!ok) ++failures;
    }
  }
  out.push_back({"pendulum one-step closure", failures == 0,
                 fmt("%g failures over %g states (%g states with empty sets "
                     "redrawn)",
                     failures, kStates, empty)});

  // Quadcopter: random and goal-seeking controls inside the inner box.
  const QuadcopterEnv quad{QuadConfig{}};
  double min_h = std::numeric_limits<double>::infinity();
  int quad_empty = 0;
  for (int ep = 0; ep < 200; ++ep) {
    EnvState x = quad.start_state();
    const bool seek = ep % 2 == 0;
    for (std::size_t t = 0; t < quad.episode_length(); ++t) {
      SafeActionSet c = SafeActionSet::interval(0, 1);
      try {
        c = quad.safe_action_set(x);
      } catch (const SafeSetEmpty&) {
        ++quad_empty;
        break;
      }
      std::vector<double> u;
      if (seek) {
        const auto q = to_quad_state(x);
        const Vec2 goal = quad.config().world.r_goal;
        u = c.sampling_box().clip(std::vector{
            2.0 * (goal[0] - q.r[0]) - 2.5 * q.r_dot[0],
            2.0 * (goal[1] - q.r[1]) - 2.5 * q.r_dot[1]});
      } else {
        u = c.sampling_box().sample_uniform(rng);
      }
      x = quad.step(x, u).next;
      min_h = std::min(min_h, quad.safety_margin(x));
    }
  }
  out.push_back({"quadcopter rollouts keep h >= -1e-3",
                 min_h >= -kQuadSafetyTolerance && quad_empty == 0,
                 fmt("min h %.4g, %g empty sets", min_h, quad_empty)});
  return out;
}

// --------------------------------------------------------- normalization --

// Beta policy whose heads evaluate to alpha = beta = 1 for every input.
Policy uniform_beta_policy() {
  MlpSpec spec = MlpSpec::make(
      1, {},
      {OutputHead{"alpha", 1, HeadTransform::kSoftplusPlusOne},
       OutputHead{"beta", 1, HeadTransform::kSoftplusPlusOne}});
  ParamVector params;
  params.values.assign(spec.param_count(), 0.0);
  const auto layout = param_layout(spec);
  for (std::size_t i = 0; i < 2; ++i) {
    params.values[layout.back().bias_offset + i] = -800.0;
  }
  return Policy::from_parts(PolicyFamily::kBetaBox, spec, params);
}

// Standard normal policy: zero mean, zero log-std.
Policy standard_normal_policy() {
  MlpSpec spec =
      MlpSpec::make(1, {}, {OutputHead{"mean", 1, HeadTransform::kIdentity}});
  ParamVector params;
  params.values.assign(spec.param_count() + 1, 0.0);
  return Policy::from_parts(PolicyFamily::kGaussianClipped, spec, params,
                            ActionBox::cube(1, -50, 50));
}

// Per-draw values mu(C) * pi(u) for a standard error estimate.
MeanSe mc_spread(const Policy& p, const SafeActionSet& c, int m, Rng& rng,
                 const ActionBox* support) {
  const ConditionedPolicy cp(p, std::vector<double>{0.0});
  std::vector<double> vals(static_cast<std::size_t>(m));
  for (double& v : vals) {
    v = c.volume() * std::exp(cp.log_density(c.sample_uniform(rng), support));
  }
  return mean_se(vals);
}

std::vector<CheckResult> suite_normalization(std::uint64_t seed) {
  std::vector<CheckResult> out;
  Rng rng = Rng(seed).split(17);
  const std::vector<double> x{0.0};
  const ActionBox unit = ActionBox::cube(1, 0.0, 1.0);

  const Policy uni = uniform_beta_policy();
  const SafeActionSet sub = SafeActionSet::interval(0.2, 0.6);
  {
    const double est = estimate_normalization(uni, x, sub, 10000, rng, &unit);
    const auto spread = mc_spread(uni, sub, 10000, rng, &unit);
    const double tol = 3.0 * spread.se + 1e-12;
    out.push_back({"uniform base on [0.2, 0.6], Monte Carlo",
                   std::abs(est - 0.4) <= tol,
                   fmt("estimate %.10g, tolerance %.3g", est, tol)});
    const double quad = estimate_normalization_quadrature(uni, x, sub, &unit);
    out.push_back({"uniform base on [0.2, 0.6], quadrature",
                   std::abs(quad - 0.4) <= 1e-10, fmt("estimate %.15g", quad)});
    const SafeActionSet full = SafeActionSet::interval(0.0, 1.0);
    const double whole = estimate_normalization(uni, x, full, 10000, rng, &unit);
    out.push_back({"uniform base on its full support",
                   std::abs(whole - 1.0) <= 1e-12, fmt("estimate %.15g", whole)});
  }

  const Policy gauss = standard_normal_policy();
  {
    const SafeActionSet c = SafeActionSet::interval(-1.0, 1.0);
    const double est = estimate_normalization(gauss, x, c, 100000, rng);
    const auto spread = mc_spread(gauss, c, 100000, rng, nullptr);
    const double truth = std::erf(1.0 / std::sqrt(2.0));
    const double z = std::abs(est - truth) / spread.se;
    out.push_back({"standard normal on [-1, 1] vs erf", z <= 3.0,
                   fmt("estimate %.7g vs %.7g (z=%.2f)", est, truth, z)});
  }
  {
    const SafeActionSet c = SafeActionSet::interval(-0.5, 1.5);
    const double quad = estimate_normalization_quadrature(gauss, x, c);
    std::vector<double> ests(200);
    for (double& e : ests) e = estimate_normalization(gauss, x, c, 100, rng);
    const auto s = mean_se(ests);
    const double z = std::abs(s.mean - quad) / s.se;
    out.push_back({"200 estimates at M=100 are unbiased", z <= 3.0,
                   fmt("grand mean %.6g vs quadrature %.6g (z=%.2f)", s.mean,
                       quad, z)});
  }
  return out;
}

}  // namespace

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{"estq", "scores", "maxrect",
                                              "invariance", "normalization"};
  return names;
}

std::vector<CheckResult> run_verify_suite(const std::string& name,
                                          std::uint64_t seed) {
  if (name == "estq") return suite_estq(seed);
  if (name == "scores") return suite_scores(seed);
  if (name == "maxrect") return suite_maxrect(seed);
  if (name == "invariance") return suite_invariance(seed);
  if (name == "normalization") return suite_normalization(seed);
  throw ConfigError("unknown verify suite '" + name +
                    "' (expected estq, scores, maxrect, invariance or "
                    "normalization)");
}

std::string format_check_table(const std::vector<CheckResult>& results) {
  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::ostringstream out;
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name
        << std::string(width - r.name.size() + 2, ' ') << r.detail << '\n';
  }
  return out.str();
}

}  // namespace saferl
