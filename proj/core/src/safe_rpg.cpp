#include <cmath>
#include <vector>

#include "saferl/errors.hpp"
#include "saferl/trainers.hpp"

namespace saferl {

void SafeRpgConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("safe_rpg: gamma must lie in (0, 1)");
  }
  if (!(stepsize_decay > 0.5 && stepsize_decay <= 1.0)) {
    throw ConfigError(
        "safe_rpg: stepsize_decay must lie in (0.5, 1] so that the stepsizes "
        "sum to infinity while their squares stay summable");
  }
  if (!(alpha0 >= 0.0) || !std::isfinite(alpha0)) {
    throw ConfigError("safe_rpg: alpha0 must be finite and >= 0");
  }
  if (mc_samples < 1) throw ConfigError("safe_rpg: mc_samples must be >= 1");
  if (max_rejection_attempts < 1) {
    throw ConfigError("safe_rpg: max_rejection_attempts must be >= 1");
  }
  if (plateau_stop && plateau_window == 0) {
    throw ConfigError("safe_rpg: plateau_window must be >= 1");
  }
}

double SafeRpgConfig::stepsize(std::size_t k) const {
  return alpha0 / std::pow(1.0 + static_cast<double>(k), stepsize_decay);
}

SafeRpgStep safe_rpg_iteration(const Policy& policy, const Environment& env,
                               ControlMode mode, const SafeRpgConfig& cfg,
                               std::size_t k, Rng& rng) {
  if (mode != ControlMode::kBetaSafe && mode != ControlMode::kGaussianTruncated) {
    throw PreconditionViolated(
        "safe_rpg: needs a Beta or truncated-Gaussian policy");
  }
  for (double v : policy.params().values) {
    if (!std::isfinite(v)) throw DomainError("safe_rpg: non-finite parameters");
  }

  SafeRpgStep out;
  const ActionSampler inner =
      make_safe_sampler(env, policy, mode, cfg.max_rejection_attempts);
  // Each sampler call inside est_q follows one environment step.
  const ActionSampler sampler = [&](const EnvState& x, Rng& r) {
    ++out.counters.steps;
    if (!env.is_safe(x)) ++out.counters.violations;
    return inner(x, r);
  };

  const std::uint64_t horizon = geometric_sample(1.0 - cfg.gamma, rng);
  EnvState x = env.start_state();
  ControlDecision d =
      decide_control(env, policy, mode, x, &rng, cfg.max_rejection_attempts);
  for (std::uint64_t t = 0; t < horizon; ++t) {
    x = env.step(x, d.applied).next;
    ++out.counters.steps;
    if (!env.is_safe(x)) ++out.counters.violations;
    d = decide_control(env, policy, mode, x, &rng, cfg.max_rejection_attempts);
  }

  GradientEstimate& est = out.estimate;
  est.horizon = static_cast<std::size_t>(horizon);
  est.q_hat = est_q(env, sampler, x, d.applied, cfg.gamma, rng);

  const SafeActionSet c = env.safe_action_set(x);
  const auto features = env.features(x);
  const ActionBox* support = d.support ? &*d.support : nullptr;
  ScoreEstimate score =
      truncated_score(policy, features, d.raw, c, cfg.mc_samples, rng, support);
  est.score = std::move(score.score);
  est.normalization = score.normalization;

  const double scale = est.q_hat / (1.0 - cfg.gamma);
  est.update.values.resize(est.score.size());
  for (std::size_t i = 0; i < est.score.size(); ++i) {
    est.update.values[i] = scale * est.score.values[i];
    if (!std::isfinite(est.update.values[i])) {
      throw NonFiniteLoss("safe_rpg: non-finite gradient estimate");
    }
  }

  const double step = cfg.stepsize(k);
  out.next_params = policy.params();
  for (std::size_t i = 0; i < out.next_params.size(); ++i) {
    out.next_params.values[i] += step * est.update.values[i];
  }
  return out;
}

}  // namespace saferl
