#ifndef SAFERL_TRAINERS_HPP_
#define SAFERL_TRAINERS_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "saferl/envs.hpp"
#include "saferl/nets.hpp"
#include "saferl/policies.hpp"
#include "saferl/stochastics.hpp"

namespace saferl {

// How a policy's output becomes the control applied to the environment.
enum class ControlMode {
  // Beta policy scaled onto the sampling box of C(x); safe by construction.
  kBetaSafe,
  // Gaussian sample clipped to the actuator box; no safety layer.
  kGaussianClipped,
  // Gaussian sample clipped onto the sampling box of C(x) (safety filter).
  kGaussianProjected,
  // Gaussian truncated to C(x) by rejection sampling.
  kGaussianTruncated,
};

// One control decision at a state.
struct ControlDecision {
  std::vector<double> applied;  // sent to the environment
  std::vector<double> raw;      // what the density is evaluated at
  std::optional<ActionBox> support;  // Beta support box at this state
};

// Stochastic (sample) or deterministic (distribution mean) control. Throws
// SafeSetEmpty from C(x) construction for modes that need it.
ControlDecision decide_control(const Environment& env, const Policy& policy,
                               ControlMode mode, const EnvState& state,
                               Rng* rng, int max_rejection_attempts = 10000);

ControlMode default_control_mode(const Policy& policy);

// Draws u ~ pi^C(.|x).
using ActionSampler =
    std::function<std::vector<double>(const EnvState&, Rng&)>;

ActionSampler make_safe_sampler(const Environment& env, const Policy& policy,
                                ControlMode mode,
                                int max_rejection_attempts = 10000);

// Unbiased estimate of Q(x0, u0) from a random horizon T ~ Geom(1 - sqrt(gamma))
// with rewards weighted by gamma^(t/2). Runs as a continuing task.
double est_q(const Environment& env, const ActionSampler& sampler,
             const EnvState& x0, std::span<const double> u0, double gamma,
             Rng& rng);

struct SafeRpgConfig {
  double gamma = 0.9;
  double alpha0 = 1e-3;
  double stepsize_decay = 0.75;
  int mc_samples = 128;
  std::size_t max_iterations = 2000;
  std::uint64_t seed = 0;
  // Plateau stop: relative change of the evaluation return below tol across
  // `plateau_window` iterations.
  bool plateau_stop = false;
  std::size_t plateau_window = 500;
  double plateau_tol = 1e-3;
  int max_rejection_attempts = 10000;

  // Rejects gamma outside (0, 1), decay outside (0.5, 1], alpha0 < 0, M < 1.
  void validate() const;
  // alpha0 / (1 + k)^decay: sum diverges, sum of squares converges.
  double stepsize(std::size_t k) const;
};

struct GradientEstimate {
  double q_hat = 0.0;
  ParamVector score;
  // q_hat * score / (1 - gamma); the iterate moves by stepsize * update.
  ParamVector update;
  std::size_t horizon = 0;
  double normalization = 1.0;
};

// Environment steps taken while producing an estimate, with safety counts.
struct StepCounters {
  std::size_t steps = 0;
  std::size_t violations = 0;
  std::size_t safe_set_empty_events = 0;

  StepCounters& operator+=(const StepCounters& o) {
    steps += o.steps;
    violations += o.violations;
    safe_set_empty_events += o.safe_set_empty_events;
    return *this;
  }
};

struct SafeRpgStep {
  ParamVector next_params;
  GradientEstimate estimate;
  StepCounters counters;
};

// One pass of the random-horizon loop from env.start_state(): roll out
// T ~ Geom(1 - gamma) steps under pi^C, estimate Q at the terminal pair, build
// the truncated score there, and take a gradient-ascent step.
SafeRpgStep safe_rpg_iteration(const Policy& policy, const Environment& env,
                               ControlMode mode, const SafeRpgConfig& cfg,
                               std::size_t k, Rng& rng);

struct EvalResult {
  double mean_return = 0.0;
  std::vector<double> returns;
  std::size_t goal_episodes = 0;  // episodes that entered the goal region
  StepCounters counters;
};

// Deterministic-action episodes from env.reset(Rng(seed).split(i)).
EvalResult evaluate_policy(const Environment& env, const Policy& policy,
                           ControlMode mode, std::size_t episodes,
                           std::uint64_t seed);

// Gaussian draw clipped componentwise onto the inner box of C(x).
std::vector<double> projection_baseline_action(const Policy& gaussian_policy,
                                               std::span<const double> features,
                                               const ActionBox& inner_box,
                                               Rng& rng);

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  // Gradient-descent step on `params` with loss gradient `grad`.
  void step(std::span<double> params, std::span<const double> grad);

  double lr() const { return lr_; }
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct PpoConfig {
  double policy_lr = 3e-4;
  double value_lr = 3e-4;
  double clip_range = 0.2;
  double entropy_coef = 0.0;
  std::size_t batch_size = 64;
  std::size_t buffer_size = 300;
  std::size_t n_epochs = 10;
  double gamma = 0.99;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  bool normalize_advantages = false;
  // Multiplies rewards before computing returns; logged returns are unscaled.
  double reward_scale = 1.0;
  std::vector<std::size_t> value_hidden = {64, 64};
  std::uint64_t seed = 0;

  void validate() const;
};

struct RunMetrics {
  std::size_t iteration = 0;
  double episodic_return = 0.0;
  double safety_rate = 1.0;
  std::size_t violations = 0;
  std::size_t safe_set_empty_events = 0;
  std::size_t steps = 0;
  double min_safety_margin = 0.0;
  std::size_t goal_episodes = 0;
  std::size_t episodes = 0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
};

// One stored transition of a PPO rollout.
struct PpoSample {
  std::vector<double> features;
  std::vector<double> action;  // density argument (raw for Gaussian)
  std::optional<ActionBox> support;
  double old_log_prob = 0.0;
  double value = 0.0;
  double ret = 0.0;
  double advantage = 0.0;
};

// Minimal clipped-surrogate PPO with a separate value network. Advantages are
// discounted returns-to-go minus value predictions.
class PpoTrainer {
 public:
  PpoTrainer(const Environment& env, Policy policy, ControlMode mode,
             PpoConfig cfg);

  // Collects buffer_size steps, then runs n_epochs of minibatch updates.
  RunMetrics iterate();

  const Policy& policy() const { return policy_; }
  const ParamVector& value_params() const { return value_params_; }
  const Mlp& value_net() const { return value_net_; }
  const PpoConfig& config() const { return cfg_; }
  std::size_t iterations_done() const { return iteration_; }

  // Gradient (to ascend) of the mean clipped surrogate plus entropy bonus
  // over `batch`; exposed for verification.
  ParamVector surrogate_gradient(std::span<const PpoSample> batch) const;
  double surrogate_objective(std::span<const PpoSample> batch) const;

  // One Adam step on the policy from `batch` (after optional clipping).
  void update_policy(std::span<const PpoSample> batch);

 private:
  std::vector<PpoSample> collect(RunMetrics& metrics);
  void update(std::vector<PpoSample>& buffer);
  double value_of(std::span<const double> features) const;

  const Environment* env_;
  Policy policy_;
  ControlMode mode_;
  PpoConfig cfg_;
  Rng rng_;
  Mlp value_net_;
  ParamVector value_params_;
  Adam policy_opt_;
  Adam value_opt_;
  EnvState state_;
  std::size_t episode_step_ = 0;
  double episode_return_ = 0.0;
  bool episode_reached_goal_ = false;
  std::size_t iteration_ = 0;
};

// Runs `iterations` PPO iterations; returns the trained policy and history.
struct PpoResult {
  Policy policy;
  std::vector<RunMetrics> history;
};

PpoResult ppo_train(const Environment& env, Policy policy, ControlMode mode,
                    const PpoConfig& cfg, std::size_t iterations);

// Clips the global L2 norm of `grad` to max_norm (no-op for max_norm <= 0).
void clip_grad_norm(std::span<double> grad, double max_norm);

}  // namespace saferl

#endif  // SAFERL_TRAINERS_HPP_
