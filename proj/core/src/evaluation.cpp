#include <cmath>
#include <utility>

#include "saferl/errors.hpp"
#include "saferl/trainers.hpp"

namespace saferl {

ControlMode default_control_mode(const Policy& policy) {
  return policy.family() == PolicyFamily::kBetaBox
             ? ControlMode::kBetaSafe
             : ControlMode::kGaussianClipped;
}

ControlDecision decide_control(const Environment& env, const Policy& policy,
                               ControlMode mode, const EnvState& state,
                               Rng* rng, int max_rejection_attempts) {
  const bool beta = policy.family() == PolicyFamily::kBetaBox;
  if (beta != (mode == ControlMode::kBetaSafe)) {
    throw PreconditionViolated("control mode does not match policy family");
  }
  const auto features = env.features(state);
  const ConditionedPolicy cp(policy, features);
  ControlDecision d;

  switch (mode) {
    case ControlMode::kBetaSafe: {
      const SafeActionSet c = env.safe_action_set(state);
      d.support = c.sampling_box();
      d.raw = rng ? cp.sample(*rng, &*d.support) : cp.mean_action(&*d.support);
      d.applied = d.raw;
      return d;
    }
    case ControlMode::kGaussianClipped: {
      d.raw = rng ? cp.sample(*rng) : cp.mean_action();
      d.applied = env.actuator_box().clip(d.raw);
      return d;
    }
    case ControlMode::kGaussianProjected: {
      const SafeActionSet c = env.safe_action_set(state);
      d.raw = rng ? cp.sample(*rng) : cp.mean_action();
      d.applied = c.sampling_box().clip(d.raw);
      return d;
    }
    case ControlMode::kGaussianTruncated: {
      const SafeActionSet c = env.safe_action_set(state);
      if (rng) {
        d.raw = rejection_truncated_sample(
            policy, features,
            [&c](std::span<const double> u) { return c.contains(u, 0.0); },
            *rng, max_rejection_attempts);
        d.applied = d.raw;
      } else {
        d.raw = cp.mean_action();
        d.applied = c.sampling_box().clip(d.raw);
      }
      return d;
    }
  }
  throw PreconditionViolated("unknown control mode");
}

ActionSampler make_safe_sampler(const Environment& env, const Policy& policy,
                                ControlMode mode, int max_rejection_attempts) {
  return [&env, &policy, mode, max_rejection_attempts](const EnvState& x,
                                                       Rng& rng) {
    return decide_control(env, policy, mode, x, &rng, max_rejection_attempts)
        .applied;
  };
}

EvalResult evaluate_policy(const Environment& env, const Policy& policy,
                           ControlMode mode, std::size_t episodes,
                           std::uint64_t seed) {
  EvalResult out;
  const Rng base(seed);
  for (std::size_t e = 0; e < episodes; ++e) {
    Rng rng = base.split(e);
    EnvState state = env.reset(rng);
    double ret = 0.0;
    bool reached = false;
    for (std::size_t t = 0; t < env.episode_length(); ++t) {
      ControlDecision d;
      try {
        d = decide_control(env, policy, mode, state, nullptr);
      } catch (const SafeSetEmpty&) {
        ++out.counters.safe_set_empty_events;
        break;
      }
      const auto tr = env.step(state, d.applied);
      ret += tr.reward;
      reached = reached || tr.reached_goal;
      state = tr.next;
      ++out.counters.steps;
      if (!env.is_safe(state)) ++out.counters.violations;
    }
    out.returns.push_back(ret);
    if (reached) ++out.goal_episodes;
  }
  double sum = 0.0;
  for (double r : out.returns) sum += r;
  out.mean_return = episodes ? sum / static_cast<double>(episodes) : 0.0;
  return out;
}

std::vector<double> projection_baseline_action(const Policy& gaussian_policy,
                                               std::span<const double> features,
                                               const ActionBox& inner_box,
                                               Rng& rng) {
  if (gaussian_policy.family() != PolicyFamily::kGaussianClipped) {
    throw PreconditionViolated("projection baseline needs a Gaussian policy");
  }
  inner_box.validate();
  const auto raw = ConditionedPolicy(gaussian_policy, features).sample(rng);
  return inner_box.clip(raw);
}

}  // namespace saferl
