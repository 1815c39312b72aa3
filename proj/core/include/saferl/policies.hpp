#ifndef SAFERL_POLICIES_HPP_
#define SAFERL_POLICIES_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "saferl/action_sets.hpp"
#include "saferl/nets.hpp"
#include "saferl/stochastics.hpp"

namespace saferl {

enum class PolicyFamily {
  // Independent Beta per action dim, shifted and scaled onto a box.
  kBetaBox,
  // Diagonal Gaussian with state-independent log-std, clipped to a fixed box.
  kGaussianClipped,
};

// Network plus distribution family. The flat parameter vector holds the
// network parameters followed, for Gaussian policies, by one log-std per
// action dimension.
class Policy {
 public:
  // Empty placeholder; only assignment and destruction are meaningful.
  Policy() = default;

  static Policy beta_box(std::size_t feature_dim, std::size_t action_dim,
                         const std::vector<std::size_t>& hidden, Rng& rng);
  static Policy gaussian_clipped(std::size_t feature_dim,
                                 std::size_t action_dim,
                                 const std::vector<std::size_t>& hidden,
                                 ActionBox clip_box, Rng& rng);
  // Rebuilds a policy around existing parameters (checkpoint restore).
  static Policy from_parts(PolicyFamily family, MlpSpec spec,
                           ParamVector params,
                           std::optional<ActionBox> clip_box = std::nullopt);

  PolicyFamily family() const { return family_; }
  const MlpSpec& spec() const { return net_->spec(); }
  const Mlp& net() const { return *net_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t feature_dim() const { return net_->spec().input_size(); }
  std::size_t net_param_count() const { return net_->param_count(); }

  const ParamVector& params() const { return params_; }
  void set_params(ParamVector params);
  Policy with_params(ParamVector params) const;

  std::span<const double> net_params() const;
  std::span<const double> log_std() const;
  const ActionBox& clip_box() const;

 private:
  PolicyFamily family_ = PolicyFamily::kBetaBox;
  std::shared_ptr<const Mlp> net_;
  ParamVector params_;
  std::size_t action_dim_ = 0;
  ActionBox clip_box_;
};

// d(log density)/d(distribution parameters), accumulated before a single
// backward pass through the network.
struct HeadGradient {
  std::vector<double> head;     // one entry per network output
  std::vector<double> log_std;  // Gaussian only
};

// A policy evaluated at one state: distribution parameters plus the forward
// trace needed to backpropagate into the policy parameters.
class ConditionedPolicy {
 public:
  ConditionedPolicy(const Policy& policy, std::span<const double> features);
  // Wraps network outputs computed elsewhere, e.g. by Mlp::forward_batch.
  // Such an instance has no trace, so backprop() throws.
  static ConditionedPolicy from_output(const Policy& policy,
                                       std::span<const double> output);

  const Policy& policy() const { return *policy_; }
  std::size_t action_dim() const { return policy_->action_dim(); }

  BetaParams beta_params(std::size_t i) const;
  double mean(std::size_t i) const;
  double stddev(std::size_t i) const;

  // Beta: box-scaled density on `support` (required). Gaussian: density on
  // R^n, `support` ignored. Returns -inf outside the support.
  double log_density(std::span<const double> u,
                     const ActionBox* support = nullptr) const;

  void accumulate_log_density_grad(std::span<const double> u,
                                   const ActionBox* support, double weight,
                                   HeadGradient& grad) const;

  // Entropy of the base distribution; for Beta it includes sum ln(width).
  double entropy(const ActionBox* support = nullptr) const;
  void accumulate_entropy_grad(double weight, HeadGradient& grad) const;

  // Beta: scaled sample on `support`. Gaussian: raw (unclipped) sample.
  std::vector<double> sample(Rng& rng, const ActionBox* support = nullptr) const;

  // Beta: mean mapped into `support`. Gaussian: the mean vector.
  std::vector<double> mean_action(const ActionBox* support = nullptr) const;

  HeadGradient zero_gradient() const;
  // Full parameter-shaped gradient from head-level sensitivities.
  ParamVector backprop(const HeadGradient& grad) const;
  void backprop_into(const HeadGradient& grad, std::span<double> out) const;

 private:
  explicit ConditionedPolicy(const Policy& policy);

  const Policy* policy_;
  ForwardTrace trace_;
  std::size_t beta_offset_ = 0;
};

// Fraction of a box width used to pull actions sitting on a face inward
// before evaluating a log density.
inline constexpr double kFaceNudge = 1e-12;

std::vector<double> beta_policy_sample(const Policy& policy,
                                       std::span<const double> features,
                                       const ActionBox& box, Rng& rng);
double beta_policy_log_prob(const Policy& policy,
                            std::span<const double> features,
                            std::span<const double> u, const ActionBox& box);
ParamVector beta_policy_score(const Policy& policy,
                              std::span<const double> features,
                              std::span<const double> u, const ActionBox& box);
std::vector<double> beta_policy_mean_action(const Policy& policy,
                                            std::span<const double> features,
                                            const ActionBox& box);

std::vector<double> gaussian_policy_sample(const Policy& policy,
                                           std::span<const double> features,
                                           Rng& rng);

using MembershipTest = std::function<bool(std::span<const double>)>;

// Samples the base policy until a draw lands in C(x). Beta bases need the
// support box they are scaled onto.
std::vector<double> rejection_truncated_sample(
    const Policy& base, std::span<const double> features,
    const MembershipTest& in_safe_set, Rng& rng, int max_attempts,
    const ActionBox* support = nullptr);

// mu(C) * (1/M) * sum pi(u_i | x) with u_i uniform on C.
double estimate_normalization(const Policy& base,
                              std::span<const double> features,
                              const SafeActionSet& safe_set, int samples,
                              Rng& rng, const ActionBox* support = nullptr);

// Composite Gauss-Legendre integral of the base density over a 1-D set.
double estimate_normalization_quadrature(const Policy& base,
                                         std::span<const double> features,
                                         const SafeActionSet& safe_set,
                                         const ActionBox* support = nullptr,
                                         int panels = 16, int order = 32);

struct ScoreEstimate {
  ParamVector score;
  double normalization = 1.0;
  int mc_samples_used = 0;
};

inline constexpr double kMinNormalization = 1e-12;

// grad log pi^C(u|x) = grad log pi(u|x) - grad log pi(C(x)|x). The second term
// is estimated from M uniform draws on C(x) shared between the mass estimate
// and its gradient. When a Beta base's support lies inside C(x) the mass is
// exactly 1 and the correction vanishes.
ScoreEstimate truncated_score(const Policy& base,
                              std::span<const double> features,
                              std::span<const double> u,
                              const SafeActionSet& safe_set, int samples,
                              Rng& rng, const ActionBox* support = nullptr);

// Same, with the mass and its gradient from deterministic quadrature (1-D).
ScoreEstimate truncated_score_quadrature(const Policy& base,
                                         std::span<const double> features,
                                         std::span<const double> u,
                                         const SafeActionSet& safe_set,
                                         const ActionBox* support = nullptr,
                                         int panels = 16, int order = 32);

// Nodes and weights of the order-n Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int order, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace saferl

#endif  // SAFERL_POLICIES_HPP_
