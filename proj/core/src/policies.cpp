#include "saferl/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "saferl/errors.hpp"

namespace saferl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

const ActionBox& require_support(const ActionBox* support, std::size_t dim) {
  if (support == nullptr) {
    throw PreconditionViolated("Beta policies need a support box");
  }
  if (support->dim() != dim) {
    throw DimensionMismatch("support box dimension does not match policy");
  }
  return *support;
}

void check_features(const Policy& policy, std::span<const double> features) {
  if (features.size() != policy.feature_dim()) {
    throw DimensionMismatch("policy expects " +
                            std::to_string(policy.feature_dim()) +
                            " features, got " + std::to_string(features.size()));
  }
}

// Normalized coordinate of u[i] inside box dim i, nudged off the faces.
// Returns NaN when u lies outside the box.
double unit_coordinate(const ActionBox& box, std::size_t i, double u) {
  const double width = box.upper[i] - box.lower[i];
  const double tol = kFaceNudge * std::max(width, 1.0);
  if (u < box.lower[i] - tol || u > box.upper[i] + tol) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double t = (u - box.lower[i]) / width;
  return std::clamp(t, kFaceNudge, 1.0 - kFaceNudge);
}

}  // namespace

// ---------------------------------------------------------------- Policy --

Policy Policy::beta_box(std::size_t feature_dim, std::size_t action_dim,
                        const std::vector<std::size_t>& hidden, Rng& rng) {
  Policy p;
  p.family_ = PolicyFamily::kBetaBox;
  p.action_dim_ = action_dim;
  p.net_ = std::make_shared<const Mlp>(MlpSpec::make(
      feature_dim, hidden,
      {{"alpha", action_dim, HeadTransform::kSoftplusPlusOne},
       {"beta", action_dim, HeadTransform::kSoftplusPlusOne}}));
  p.params_ = glorot_init(p.net_->spec(), rng);
  return p;
}

Policy Policy::gaussian_clipped(std::size_t feature_dim,
                                std::size_t action_dim,
                                const std::vector<std::size_t>& hidden,
                                ActionBox clip_box, Rng& rng) {
  clip_box.validate();
  if (clip_box.dim() != action_dim) {
    throw DimensionMismatch("clip box dimension does not match action_dim");
  }
  Policy p;
  p.family_ = PolicyFamily::kGaussianClipped;
  p.action_dim_ = action_dim;
  p.clip_box_ = std::move(clip_box);
  p.net_ = std::make_shared<const Mlp>(MlpSpec::make(
      feature_dim, hidden, {{"mean", action_dim, HeadTransform::kIdentity}}));
  p.params_ = glorot_init(p.net_->spec(), rng);
  p.params_.values.resize(p.params_.size() + action_dim, 0.0);
  return p;
}

Policy Policy::from_parts(PolicyFamily family, MlpSpec spec, ParamVector params,
                          std::optional<ActionBox> clip_box) {
  Policy p;
  p.family_ = family;
  p.net_ = std::make_shared<const Mlp>(std::move(spec));
  const auto& heads = p.net_->spec().heads;
  if (family == PolicyFamily::kBetaBox) {
    if (heads.size() != 2 || heads[0].size != heads[1].size) {
      throw DimensionMismatch("Beta policy needs two equal-size heads");
    }
    p.action_dim_ = heads[0].size;
  } else {
    if (heads.size() != 1) {
      throw DimensionMismatch("Gaussian policy needs a single mean head");
    }
    p.action_dim_ = heads[0].size;
    if (!clip_box) throw PreconditionViolated("Gaussian policy needs a clip box");
    p.clip_box_ = *clip_box;
  }
  p.set_params(std::move(params));
  return p;
}

void Policy::set_params(ParamVector params) {
  const std::size_t expected =
      net_->param_count() +
      (family_ == PolicyFamily::kGaussianClipped ? action_dim_ : 0);
  if (params.size() != expected) {
    throw DimensionMismatch("policy expects " + std::to_string(expected) +
                            " parameters, got " + std::to_string(params.size()));
  }
  params_ = std::move(params);
}

Policy Policy::with_params(ParamVector params) const {
  Policy copy = *this;
  copy.set_params(std::move(params));
  return copy;
}

std::span<const double> Policy::net_params() const {
  return std::span<const double>(params_.values).first(net_->param_count());
}

std::span<const double> Policy::log_std() const {
  if (family_ != PolicyFamily::kGaussianClipped) return {};
  return std::span<const double>(params_.values).subspan(net_->param_count());
}

const ActionBox& Policy::clip_box() const {
  if (family_ != PolicyFamily::kGaussianClipped) {
    throw PreconditionViolated("only Gaussian policies carry a clip box");
  }
  return clip_box_;
}

// ----------------------------------------------------- ConditionedPolicy --

ConditionedPolicy::ConditionedPolicy(const Policy& policy,
                                     std::span<const double> features)
    : policy_(&policy) {
  check_features(policy, features);
  policy.net().forward(policy.net_params(), features, trace_);
  beta_offset_ = policy.action_dim();
}

ConditionedPolicy::ConditionedPolicy(const Policy& policy)
    : policy_(&policy), beta_offset_(policy.action_dim()) {}

ConditionedPolicy ConditionedPolicy::from_output(
    const Policy& policy, std::span<const double> output) {
  if (output.size() != policy.spec().output_size()) {
    throw DimensionMismatch("ConditionedPolicy: network output size mismatch");
  }
  ConditionedPolicy cp(policy);
  cp.trace_.output.assign(output.begin(), output.end());
  return cp;
}

BetaParams ConditionedPolicy::beta_params(std::size_t i) const {
  return {trace_.output[i], trace_.output[beta_offset_ + i]};
}

double ConditionedPolicy::mean(std::size_t i) const { return trace_.output[i]; }

double ConditionedPolicy::stddev(std::size_t i) const {
  return std::exp(policy_->log_std()[i]);
}

double ConditionedPolicy::log_density(std::span<const double> u,
                                      const ActionBox* support) const {
  const std::size_t n = action_dim();
  if (u.size() != n) throw DimensionMismatch("log_density: action size mismatch");
  double total = 0.0;
  if (policy_->family() == PolicyFamily::kBetaBox) {
    const ActionBox& box = require_support(support, n);
    for (std::size_t i = 0; i < n; ++i) {
      const double width = box.upper[i] - box.lower[i];
      if (width <= 0.0) {
        if (u[i] != box.lower[i]) return kNegInf;
        continue;
      }
      const double t = unit_coordinate(box, i, u[i]);
      if (std::isnan(t)) return kNegInf;
      total += beta_log_pdf(t, beta_params(i)) - std::log(width);
    }
    return total;
  }
  const auto log_std = policy_->log_std();
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (u[i] - mean(i)) * std::exp(-log_std[i]);
    total += -0.5 * z * z - log_std[i] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return total;
}

void ConditionedPolicy::accumulate_log_density_grad(std::span<const double> u,
                                                    const ActionBox* support,
                                                    double weight,
                                                    HeadGradient& grad) const {
  const std::size_t n = action_dim();
  if (u.size() != n) throw DimensionMismatch("score: action size mismatch");
  if (weight == 0.0) return;
  if (policy_->family() == PolicyFamily::kBetaBox) {
    const ActionBox& box = require_support(support, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (box.upper[i] - box.lower[i] <= 0.0) continue;
      const double t = unit_coordinate(box, i, u[i]);
      if (std::isnan(t)) {
        throw DomainError("score: action lies outside the support box");
      }
      const BetaParams p = beta_params(i);
      const double psi_sum = digamma(p.alpha + p.beta);
      grad.head[i] += weight * (std::log(t) - digamma(p.alpha) + psi_sum);
      grad.head[beta_offset_ + i] +=
          weight * (std::log1p(-t) - digamma(p.beta) + psi_sum);
    }
    return;
  }
  const auto log_std = policy_->log_std();
  for (std::size_t i = 0; i < n; ++i) {
    const double inv_sd = std::exp(-log_std[i]);
    const double z = (u[i] - mean(i)) * inv_sd;
    grad.head[i] += weight * z * inv_sd;
    grad.log_std[i] += weight * (z * z - 1.0);
  }
}

double ConditionedPolicy::entropy(const ActionBox* support) const {
  const std::size_t n = action_dim();
  double h = 0.0;
  if (policy_->family() == PolicyFamily::kBetaBox) {
    const ActionBox& box = require_support(support, n);
    for (std::size_t i = 0; i < n; ++i) {
      const double width = box.upper[i] - box.lower[i];
      if (width <= 0.0) continue;
      h += beta_entropy(beta_params(i)) + std::log(width);
    }
    return h;
  }
  const auto log_std = policy_->log_std();
  for (std::size_t i = 0; i < n; ++i) {
    h += log_std[i] + 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  }
  return h;
}

void ConditionedPolicy::accumulate_entropy_grad(double weight,
                                                HeadGradient& grad) const {
  if (weight == 0.0) return;
  const std::size_t n = action_dim();
  if (policy_->family() == PolicyFamily::kBetaBox) {
    for (std::size_t i = 0; i < n; ++i) {
      const BetaParams p = beta_params(i);
      const double tri_sum = trigamma(p.alpha + p.beta);
      grad.head[i] += weight * (-(p.alpha - 1.0) * trigamma(p.alpha) +
                                (p.alpha + p.beta - 2.0) * tri_sum);
      grad.head[beta_offset_ + i] +=
          weight * (-(p.beta - 1.0) * trigamma(p.beta) +
                    (p.alpha + p.beta - 2.0) * tri_sum);
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) grad.log_std[i] += weight;
}

std::vector<double> ConditionedPolicy::sample(Rng& rng,
                                              const ActionBox* support) const {
  const std::size_t n = action_dim();
  std::vector<double> u(n);
  if (policy_->family() == PolicyFamily::kBetaBox) {
    const ActionBox& box = require_support(support, n);
    for (std::size_t i = 0; i < n; ++i) {
      const double width = box.upper[i] - box.lower[i];
      if (width <= 0.0) {
        u[i] = box.lower[i];
        continue;
      }
      const double t = beta_sample(beta_params(i), rng);
      u[i] = std::clamp(box.lower[i] + t * width, box.lower[i], box.upper[i]);
    }
    return u;
  }
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = gaussian_sample(mean(i), stddev(i), rng);
  }
  return u;
}

std::vector<double> ConditionedPolicy::mean_action(
    const ActionBox* support) const {
  const std::size_t n = action_dim();
  std::vector<double> u(n);
  if (policy_->family() == PolicyFamily::kBetaBox) {
    const ActionBox& box = require_support(support, n);
    for (std::size_t i = 0; i < n; ++i) {
      const BetaParams p = beta_params(i);
      u[i] = box.lower[i] +
             (box.upper[i] - box.lower[i]) * p.alpha / (p.alpha + p.beta);
    }
    return u;
  }
  for (std::size_t i = 0; i < n; ++i) u[i] = mean(i);
  return u;
}

HeadGradient ConditionedPolicy::zero_gradient() const {
  HeadGradient g;
  g.head.assign(policy_->spec().output_size(), 0.0);
  if (policy_->family() == PolicyFamily::kGaussianClipped) {
    g.log_std.assign(action_dim(), 0.0);
  }
  return g;
}

ParamVector ConditionedPolicy::backprop(const HeadGradient& grad) const {
  ParamVector out;
  out.values.assign(policy_->params().size(), 0.0);
  backprop_into(grad, out.values);
  return out;
}

void ConditionedPolicy::backprop_into(const HeadGradient& grad,
                                      std::span<double> out) const {
  if (trace_.activations.empty()) {
    throw PreconditionViolated("ConditionedPolicy: no forward trace to backprop");
  }
  const std::size_t net_n = policy_->net_param_count();
  policy_->net().backward(policy_->net_params(), trace_, grad.head,
                          out.first(net_n));
  for (std::size_t i = 0; i < grad.log_std.size(); ++i) {
    out[net_n + i] += grad.log_std[i];
  }
}

// ------------------------------------------------------------ operations --

std::vector<double> beta_policy_sample(const Policy& policy,
                                       std::span<const double> features,
                                       const ActionBox& box, Rng& rng) {
  if (policy.family() != PolicyFamily::kBetaBox) {
    throw PreconditionViolated("beta_policy_sample: not a Beta policy");
  }
  box.validate();
  return ConditionedPolicy(policy, features).sample(rng, &box);
}

double beta_policy_log_prob(const Policy& policy,
                            std::span<const double> features,
                            std::span<const double> u, const ActionBox& box) {
  if (policy.family() != PolicyFamily::kBetaBox) {
    throw PreconditionViolated("beta_policy_log_prob: not a Beta policy");
  }
  return ConditionedPolicy(policy, features).log_density(u, &box);
}

ParamVector beta_policy_score(const Policy& policy,
                              std::span<const double> features,
                              std::span<const double> u, const ActionBox& box) {
  if (policy.family() != PolicyFamily::kBetaBox) {
    throw PreconditionViolated("beta_policy_score: not a Beta policy");
  }
  const ConditionedPolicy cp(policy, features);
  HeadGradient g = cp.zero_gradient();
  cp.accumulate_log_density_grad(u, &box, 1.0, g);
  return cp.backprop(g);
}

std::vector<double> beta_policy_mean_action(const Policy& policy,
                                            std::span<const double> features,
                                            const ActionBox& box) {
  return ConditionedPolicy(policy, features).mean_action(&box);
}

std::vector<double> gaussian_policy_sample(const Policy& policy,
                                           std::span<const double> features,
                                           Rng& rng) {
  if (policy.family() != PolicyFamily::kGaussianClipped) {
    throw PreconditionViolated("gaussian_policy_sample: not a Gaussian policy");
  }
  const auto raw = ConditionedPolicy(policy, features).sample(rng);
  return policy.clip_box().clip(raw);
}

std::vector<double> rejection_truncated_sample(
    const Policy& base, std::span<const double> features,
    const MembershipTest& in_safe_set, Rng& rng, int max_attempts,
    const ActionBox* support) {
  if (max_attempts < 1) {
    throw DomainError("rejection_truncated_sample: max_attempts must be >= 1");
  }
  const ConditionedPolicy cp(base, features);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    auto u = cp.sample(rng, support);
    if (in_safe_set(u)) return u;
  }
  throw SafeSetSamplingFailed("no base-policy sample landed in C(x) after " +
                              std::to_string(max_attempts) + " attempts");
}

namespace {

void check_volume(const SafeActionSet& safe_set) {
  if (!(safe_set.volume() > 0.0)) {
    throw DomainError("normalization requires C(x) with positive volume");
  }
}

// True when every corner of the Beta support lies in C(x); C(x) is convex, so
// the whole support does and the truncation mass is exactly 1.
bool support_inside(const ActionBox& support, const SafeActionSet& safe_set) {
  const std::size_t n = support.dim();
  if (n != safe_set.dim() || n > 20) return false;
  std::vector<double> corner(n);
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    for (std::size_t i = 0; i < n; ++i) {
      corner[i] = (mask >> i) & 1u ? support.upper[i] : support.lower[i];
    }
    if (!safe_set.contains(corner, 0.0)) return false;
  }
  return true;
}

struct QuadratureRule {
  std::vector<double> points;
  std::vector<double> weights;
};

QuadratureRule interval_rule(const SafeActionSet& safe_set, int panels,
                             int order) {
  if (safe_set.dim() != 1) {
    throw DimensionMismatch("quadrature normalization supports 1-D sets only");
  }
  if (panels < 1 || order < 1) throw DomainError("quadrature: bad rule size");
  std::vector<double> x;
  std::vector<double> w;
  gauss_legendre(order, x, w);
  const double lo = safe_set.outer_box().lower[0];
  const double hi = safe_set.outer_box().upper[0];
  const double h = (hi - lo) / panels;
  QuadratureRule rule;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * h;
    for (int k = 0; k < order; ++k) {
      rule.points.push_back(a + 0.5 * h * (x[k] + 1.0));
      rule.weights.push_back(0.5 * h * w[k]);
    }
  }
  return rule;
}

// Shared tail of the truncated-score estimators: given weighted points whose
// weighted density sum estimates the truncation mass, subtract the
// self-normalized average of their scores from the score at u.
ScoreEstimate finish_truncated_score(const ConditionedPolicy& cp,
                                     std::span<const double> u,
                                     const ActionBox* support,
                                     const std::vector<std::vector<double>>& pts,
                                     const std::vector<double>& weights,
                                     int samples_used) {
  std::vector<double> dens(pts.size());
  double mass = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double lp = cp.log_density(pts[k], support);
    dens[k] = std::isinf(lp) ? 0.0 : std::exp(lp);
    mass += weights[k] * dens[k];
  }
  if (!(mass >= kMinNormalization)) {
    throw NormalizationUnderflow("estimated pi(C(x)|x) = " +
                                 std::to_string(mass) + " is below 1e-12");
  }
  HeadGradient g = cp.zero_gradient();
  cp.accumulate_log_density_grad(u, support, 1.0, g);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (dens[k] == 0.0) continue;
    cp.accumulate_log_density_grad(pts[k], support,
                                   -weights[k] * dens[k] / mass, g);
  }
  ScoreEstimate out;
  out.score = cp.backprop(g);
  out.normalization = mass;
  out.mc_samples_used = samples_used;
  return out;
}

}  // namespace

double estimate_normalization(const Policy& base,
                              std::span<const double> features,
                              const SafeActionSet& safe_set, int samples,
                              Rng& rng, const ActionBox* support) {
  if (samples < 1) throw DomainError("estimate_normalization: M must be >= 1");
  check_volume(safe_set);
  const ConditionedPolicy cp(base, features);
  double sum = 0.0;
  for (int i = 0; i < samples; ++i) {
    const auto u = safe_set.sample_uniform(rng);
    const double lp = cp.log_density(u, support);
    if (!std::isinf(lp)) sum += std::exp(lp);
  }
  return safe_set.volume() * sum / samples;
}

double estimate_normalization_quadrature(const Policy& base,
                                         std::span<const double> features,
                                         const SafeActionSet& safe_set,
                                         const ActionBox* support, int panels,
                                         int order) {
  check_volume(safe_set);
  const ConditionedPolicy cp(base, features);
  const QuadratureRule rule = interval_rule(safe_set, panels, order);
  double mass = 0.0;
  for (std::size_t k = 0; k < rule.points.size(); ++k) {
    const double pt[1] = {rule.points[k]};
    const double lp = cp.log_density(pt, support);
    if (!std::isinf(lp)) mass += rule.weights[k] * std::exp(lp);
  }
  return mass;
}

ScoreEstimate truncated_score(const Policy& base,
                              std::span<const double> features,
                              std::span<const double> u,
                              const SafeActionSet& safe_set, int samples,
                              Rng& rng, const ActionBox* support) {
  if (samples < 1) throw DomainError("truncated_score: M must be >= 1");
  const ConditionedPolicy cp(base, features);
  if (base.family() == PolicyFamily::kBetaBox &&
      support_inside(require_support(support, base.action_dim()), safe_set)) {
    HeadGradient g = cp.zero_gradient();
    cp.accumulate_log_density_grad(u, support, 1.0, g);
    return {cp.backprop(g), 1.0, 0};
  }
  check_volume(safe_set);
  std::vector<std::vector<double>> pts;
  pts.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) pts.push_back(safe_set.sample_uniform(rng));
  const std::vector<double> weights(pts.size(),
                                    safe_set.volume() / samples);
  return finish_truncated_score(cp, u, support, pts, weights, samples);
}

ScoreEstimate truncated_score_quadrature(const Policy& base,
                                         std::span<const double> features,
                                         std::span<const double> u,
                                         const SafeActionSet& safe_set,
                                         const ActionBox* support, int panels,
                                         int order) {
  check_volume(safe_set);
  const ConditionedPolicy cp(base, features);
  const QuadratureRule rule = interval_rule(safe_set, panels, order);
  std::vector<std::vector<double>> pts;
  pts.reserve(rule.points.size());
  for (double p : rule.points) pts.push_back({p});
  return finish_truncated_score(cp, u, support, pts, rule.weights, 0);
}

void gauss_legendre(int order, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  if (order < 1) throw DomainError("gauss_legendre: order must be >= 1");
  const auto n = static_cast<std::size_t>(order);
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      const double pn = n == 1 ? x : p1;
      const double pnm1 = n == 1 ? 1.0 : p0;
      dp = static_cast<double>(n) * (x * pn - pnm1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

}  // namespace saferl
