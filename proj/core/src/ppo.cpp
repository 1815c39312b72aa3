#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "saferl/errors.hpp"
#include "saferl/trainers.hpp"

namespace saferl {

// ------------------------------------------------------------------ Adam --

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr >= 0.0)) throw DomainError("adam: learning rate must be >= 0");
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) {
    throw DimensionMismatch("adam: gradient size does not match parameters");
  }
  if (m_.empty()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  } else if (m_.size() != params.size()) {
    throw DimensionMismatch("adam: parameter count changed between steps");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

void clip_grad_norm(std::span<double> grad, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
}

void PpoConfig::validate() const {
  if (!(policy_lr >= 0.0) || !(value_lr >= 0.0)) {
    throw ConfigError("ppo: learning rates must be >= 0");
  }
  if (!(clip_range > 0.0)) throw ConfigError("ppo: clip_range must be > 0");
  if (!(entropy_coef >= 0.0)) {
    throw ConfigError("ppo: entropy_coef must be >= 0");
  }
  if (batch_size == 0) throw ConfigError("ppo: batch_size must be >= 1");
  if (buffer_size == 0) throw ConfigError("ppo: buffer_size must be >= 1");
  if (n_epochs == 0) throw ConfigError("ppo: n_epochs must be >= 1");
  if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) {
    throw ConfigError("ppo: reward_scale must be finite and > 0");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("ppo: gamma must lie in (0, 1)");
  }
  for (std::size_t h : value_hidden) {
    if (h == 0) throw ConfigError("ppo: value_hidden sizes must be >= 1");
  }
}

// ------------------------------------------------------------ PpoTrainer --

namespace {

MlpSpec value_spec(std::size_t input, const std::vector<std::size_t>& hidden) {
  return MlpSpec::make(input, hidden,
                       {OutputHead{"value", 1, HeadTransform::kIdentity}});
}

bool ppo_mode_supported(ControlMode mode) {
  return mode == ControlMode::kBetaSafe ||
         mode == ControlMode::kGaussianClipped ||
         mode == ControlMode::kGaussianProjected;
}

}  // namespace

PpoTrainer::PpoTrainer(const Environment& env, Policy policy, ControlMode mode,
                       PpoConfig cfg)
    : env_(&env),
      policy_(std::move(policy)),
      mode_(mode),
      cfg_(std::move(cfg)),
      rng_(cfg_.seed),
      value_net_(value_spec(env.feature_dim(), cfg_.value_hidden)),
      policy_opt_(cfg_.policy_lr),
      value_opt_(cfg_.value_lr) {
  cfg_.validate();
  if (!ppo_mode_supported(mode_)) {
    throw PreconditionViolated("ppo: unsupported control mode");
  }
  if (policy_.feature_dim() != env.feature_dim() ||
      policy_.action_dim() != env.action_dim()) {
    throw DimensionMismatch("ppo: policy does not match the environment");
  }
  Rng init = rng_.split(0x76616c7565ULL);
  value_params_ = glorot_init(value_net_.spec(), init);
  state_ = env_->reset(rng_);
}

double PpoTrainer::value_of(std::span<const double> features) const {
  return value_net_.forward(value_params_.values, features)[0];
}

std::vector<PpoSample> PpoTrainer::collect(RunMetrics& metrics) {
  std::vector<PpoSample> buffer;
  buffer.reserve(cfg_.buffer_size);
  std::vector<double> rewards;
  // Value used in place of the next return where an episode is cut: V(x') at
  // a time limit or safe-set failure, NaN when the return continues.
  std::vector<double> cut_value;
  rewards.reserve(cfg_.buffer_size);
  cut_value.reserve(cfg_.buffer_size);

  double completed_return_sum = 0.0;
  std::size_t completed = 0;
  metrics.min_safety_margin = std::numeric_limits<double>::infinity();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto end_episode = [&](bool count) {
    if (count) {
      completed_return_sum += episode_return_;
      ++completed;
      if (episode_reached_goal_) ++metrics.goal_episodes;
    }
    state_ = env_->reset(rng_);
    episode_step_ = 0;
    episode_return_ = 0.0;
    episode_reached_goal_ = false;
  };

  while (buffer.size() < cfg_.buffer_size) {
    const auto features = env_->features(state_);
    ControlDecision d;
    try {
      d = decide_control(*env_, policy_, mode_, state_, &rng_);
    } catch (const SafeSetEmpty&) {
      ++metrics.safe_set_empty_events;
      if (!cut_value.empty() && std::isnan(cut_value.back())) {
        cut_value.back() = value_of(features);
      }
      end_episode(false);
      continue;
    }

    PpoSample s;
    s.features = features;
    s.action = d.raw;
    s.support = d.support;
    const ConditionedPolicy cp(policy_, features);
    s.old_log_prob =
        cp.log_density(s.action, s.support ? &*s.support : nullptr);
    s.value = value_of(features);

    const EnvTransition tr = env_->step(state_, d.applied);
    state_ = tr.next;
    ++metrics.steps;
    const double margin = env_->safety_margin(state_);
    metrics.min_safety_margin = std::min(metrics.min_safety_margin, margin);
    if (!env_->is_safe(state_)) ++metrics.violations;
    episode_return_ += tr.reward;
    episode_reached_goal_ = episode_reached_goal_ || tr.reached_goal;
    ++episode_step_;

    buffer.push_back(std::move(s));
    rewards.push_back(tr.reward * cfg_.reward_scale);
    cut_value.push_back(nan);

    if (episode_step_ >= env_->episode_length()) {
      cut_value.back() = value_of(env_->features(state_));
      end_episode(true);
    }
  }
  if (std::isnan(cut_value.back())) {
    cut_value.back() = value_of(env_->features(state_));
  }

  double next_return = 0.0;
  for (std::size_t i = buffer.size(); i-- > 0;) {
    const double tail = std::isnan(cut_value[i]) ? next_return : cut_value[i];
    next_return = rewards[i] + cfg_.gamma * tail;
    buffer[i].ret = next_return;
    buffer[i].advantage = next_return - buffer[i].value;
  }

  metrics.episodes = completed;
  metrics.episodic_return =
      completed ? completed_return_sum / static_cast<double>(completed) : nan;
  metrics.safety_rate =
      metrics.steps ? 1.0 - static_cast<double>(metrics.violations) /
                                static_cast<double>(metrics.steps)
                    : 1.0;
  return buffer;
}

namespace {

// Row-major stack of the batch's feature vectors.
std::vector<double> stack_features(std::span<const PpoSample> batch) {
  std::vector<double> x;
  for (const PpoSample& s : batch) {
    x.insert(x.end(), s.features.begin(), s.features.end());
  }
  return x;
}

}  // namespace

double PpoTrainer::surrogate_objective(std::span<const PpoSample> batch) const {
  if (batch.empty()) return 0.0;
  const Mlp& net = policy_.net();
  BatchTrace trace;
  net.forward_batch(policy_.net_params(), stack_features(batch), batch.size(),
                    trace);
  const std::size_t width = net.spec().output_size();
  double total = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const PpoSample& s = batch[r];
    const auto cp = ConditionedPolicy::from_output(
        policy_, std::span<const double>(trace.output).subspan(r * width, width));
    const ActionBox* support = s.support ? &*s.support : nullptr;
    const double ratio = std::exp(cp.log_density(s.action, support) -
                                  s.old_log_prob);
    const double clipped =
        std::clamp(ratio, 1.0 - cfg_.clip_range, 1.0 + cfg_.clip_range);
    total += std::min(ratio * s.advantage, clipped * s.advantage);
    if (cfg_.entropy_coef != 0.0) total += cfg_.entropy_coef * cp.entropy(support);
  }
  return total / static_cast<double>(batch.size());
}

ParamVector PpoTrainer::surrogate_gradient(
    std::span<const PpoSample> batch) const {
  ParamVector grad;
  grad.values.assign(policy_.params().size(), 0.0);
  if (batch.empty()) return grad;
  const Mlp& net = policy_.net();
  BatchTrace trace;
  net.forward_batch(policy_.net_params(), stack_features(batch), batch.size(),
                    trace);
  const std::size_t width = net.spec().output_size();
  const std::size_t net_n = policy_.net_param_count();
  std::vector<double> upstream(batch.size() * width, 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const PpoSample& s = batch[r];
    const auto cp = ConditionedPolicy::from_output(
        policy_, std::span<const double>(trace.output).subspan(r * width, width));
    const ActionBox* support = s.support ? &*s.support : nullptr;
    const double ratio = std::exp(cp.log_density(s.action, support) -
                                  s.old_log_prob);
    const bool clipped_out =
        (s.advantage > 0.0 && ratio > 1.0 + cfg_.clip_range) ||
        (s.advantage < 0.0 && ratio < 1.0 - cfg_.clip_range);
    HeadGradient g = cp.zero_gradient();
    if (!clipped_out && s.advantage != 0.0) {
      cp.accumulate_log_density_grad(s.action, support,
                                     inv_n * ratio * s.advantage, g);
    }
    if (cfg_.entropy_coef != 0.0) {
      cp.accumulate_entropy_grad(inv_n * cfg_.entropy_coef, g);
    }
    std::copy(g.head.begin(), g.head.end(), upstream.begin() + r * width);
    for (std::size_t i = 0; i < g.log_std.size(); ++i) {
      grad.values[net_n + i] += g.log_std[i];
    }
  }
  net.backward_batch(policy_.net_params(), trace, upstream,
                     std::span<double>(grad.values).first(net_n));
  return grad;
}

void PpoTrainer::update_policy(std::span<const PpoSample> batch) {
  ParamVector grad = surrogate_gradient(batch);
  for (double& g : grad.values) {
    if (!std::isfinite(g)) {
      throw NonFiniteLoss("ppo: non-finite policy gradient at iteration " +
                          std::to_string(iteration_));
    }
    g = -g;  // Adam descends; the surrogate is maximised.
  }
  clip_grad_norm(grad.values, cfg_.max_grad_norm);
  ParamVector params = policy_.params();
  policy_opt_.step(params.values, grad.values);
  policy_.set_params(std::move(params));
}

void PpoTrainer::update(std::vector<PpoSample>& buffer) {
  if (cfg_.normalize_advantages && buffer.size() > 1) {
    double mean = 0.0;
    for (const auto& s : buffer) mean += s.advantage;
    mean /= static_cast<double>(buffer.size());
    double var = 0.0;
    for (const auto& s : buffer) var += (s.advantage - mean) * (s.advantage - mean);
    const double sd = std::sqrt(var / static_cast<double>(buffer.size() - 1));
    for (auto& s : buffer) s.advantage = (s.advantage - mean) / (sd + 1e-8);
  }

  std::vector<std::size_t> order(buffer.size());
  std::vector<PpoSample> batch;
  std::vector<double> vgrad(value_params_.size());
  std::vector<double> upstream;
  BatchTrace trace;
  for (std::size_t epoch = 0; epoch < cfg_.n_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng_.uniform_index(i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg_.batch_size);
      batch.clear();
      for (std::size_t j = start; j < stop; ++j) batch.push_back(buffer[order[j]]);

      update_policy(batch);

      std::fill(vgrad.begin(), vgrad.end(), 0.0);
      const double scale = 2.0 / static_cast<double>(batch.size());
      value_net_.forward_batch(value_params_.values, stack_features(batch),
                               batch.size(), trace);
      upstream.resize(batch.size());
      for (std::size_t r = 0; r < batch.size(); ++r) {
        upstream[r] = scale * (trace.output[r] - batch[r].ret);
      }
      value_net_.backward_batch(value_params_.values, trace, upstream, vgrad);
      for (double g : vgrad) {
        if (!std::isfinite(g)) {
          throw NonFiniteLoss("ppo: non-finite value loss at iteration " +
                              std::to_string(iteration_));
        }
      }
      clip_grad_norm(vgrad, cfg_.max_grad_norm);
      value_opt_.step(value_params_.values, vgrad);
    }
  }
}

RunMetrics PpoTrainer::iterate() {
  RunMetrics metrics;
  metrics.seed = cfg_.seed;
  auto buffer = collect(metrics);
  update(buffer);
  metrics.iteration = ++iteration_;
  return metrics;
}

PpoResult ppo_train(const Environment& env, Policy policy, ControlMode mode,
                    const PpoConfig& cfg, std::size_t iterations) {
  PpoTrainer trainer(env, std::move(policy), mode, cfg);
  std::vector<RunMetrics> history;
  history.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) history.push_back(trainer.iterate());
  return {trainer.policy(), std::move(history)};
}

}  // namespace saferl
