#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "saferl/action_sets.hpp"
#include "saferl/errors.hpp"
#include "saferl/policies.hpp"
#include "saferl/stochastics.hpp"

namespace saferl {
namespace {

// Bias that makes a softplus+1 head output `value` when its weights are zero.
double head_bias_for(double value) {
  return value <= 1.0 ? -800.0 : std::log(std::expm1(value - 1.0));
}

// Zeroes the output layer so every head is a constant set by its bias.
void zero_output_weights(const MlpSpec& spec, ParamVector& params) {
  const LayerSlice last = param_layout(spec).back();
  std::fill_n(params.values.begin() + static_cast<std::ptrdiff_t>(last.weight_offset),
              last.fan_in * last.fan_out, 0.0);
}

Policy constant_beta_policy(std::size_t n, double alpha, double beta,
                            std::size_t features = 2) {
  Rng rng(1);
  Policy p = Policy::beta_box(features, n, {4}, rng);
  ParamVector params = p.params();
  zero_output_weights(p.spec(), params);
  const LayerSlice last = param_layout(p.spec()).back();
  for (std::size_t i = 0; i < n; ++i) {
    params.values[last.bias_offset + i] = head_bias_for(alpha);
    params.values[last.bias_offset + n + i] = head_bias_for(beta);
  }
  p.set_params(params);
  return p;
}

Policy constant_gaussian_policy(double mean, double log_std,
                                ActionBox clip = ActionBox::cube(1, -15, 15)) {
  Rng rng(1);
  Policy p = Policy::gaussian_clipped(2, clip.dim(), {4}, clip, rng);
  ParamVector params = p.params();
  zero_output_weights(p.spec(), params);
  const LayerSlice last = param_layout(p.spec()).back();
  for (std::size_t i = 0; i < clip.dim(); ++i) {
    params.values[last.bias_offset + i] = mean;
    params.values[p.net_param_count() + i] = log_std;
  }
  p.set_params(params);
  return p;
}

const std::vector<double> kX = {0.3, -0.7};

TEST(BetaPolicySample, UnitBoxEqualsRawBetaSample) {
  const Policy p = constant_beta_policy(2, 2.5, 1.5);
  const ActionBox unit = ActionBox::cube(2, 0.0, 1.0);
  Rng a(77), b(77);
  for (int i = 0; i < 200; ++i) {
    const auto u = beta_policy_sample(p, kX, unit, a);
    const double r0 = beta_sample({2.5, 1.5}, b);
    const double r1 = beta_sample({2.5, 1.5}, b);
    EXPECT_NEAR(u[0], r0, 1e-14);
    EXPECT_NEAR(u[1], r1, 1e-14);
  }
}

TEST(BetaPolicySample, DegenerateDimensionReturnsLowerExactly) {
  const Policy p = constant_beta_policy(2, 2.0, 3.0);
  const ActionBox box = ActionBox::make({0.37, -1.0}, {0.37, 2.0});
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto u = beta_policy_sample(p, kX, box, rng);
    EXPECT_EQ(u[0], 0.37);
    EXPECT_GE(u[1], -1.0);
    EXPECT_LE(u[1], 2.0);
  }
}

TEST(BetaPolicySample, AlwaysInsideBox) {
  Rng rng(5);
  Policy p = Policy::beta_box(2, 2, {8, 8}, rng);
  for (int i = 0; i < 10000; ++i) {
    const double lo0 = rng.uniform(-20, 0), lo1 = rng.uniform(-1e-3, 0);
    const ActionBox box = ActionBox::make(
        {lo0, lo1}, {lo0 + rng.uniform(1e-9, 30), lo1 + rng.uniform(1e-9, 1e-3)});
    const std::vector<double> x = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const auto u = beta_policy_sample(p, x, box, rng);
    EXPECT_TRUE(box.contains(u)) << i;
  }
}

TEST(BetaPolicySample, MomentsMatchBetaOnScaledBox) {
  const Policy p = constant_beta_policy(1, 2.0, 5.0);
  const ActionBox box = ActionBox::make({-3.0}, {1.0});
  Rng rng(8);
  std::vector<double> xs;
  for (int i = 0; i < 20000; ++i) {
    xs.push_back((beta_policy_sample(p, kX, box, rng)[0] + 3.0) / 4.0);
  }
  const double d = oracle::ks_statistic(xs, [](double t) {
    return oracle::beta_cdf(t, 2.0, 5.0);
  });
  EXPECT_LT(d, oracle::ks_critical_5pct(xs.size()));
}

TEST(BetaPolicyLogProb, UniformOnUnitSquareIsZero) {
  const Policy p = constant_beta_policy(2, 1.0, 1.0);
  const ActionBox unit = ActionBox::cube(2, 0.0, 1.0);
  for (double a : {0.1, 0.5, 0.93}) {
    EXPECT_NEAR(beta_policy_log_prob(p, kX, std::vector<double>{a, 1 - a}, unit),
                0.0, 1e-14);
  }
}

TEST(BetaPolicyLogProb, ScaledUniformPaysJacobian) {
  const Policy p = constant_beta_policy(2, 1.0, 1.0);
  const ActionBox box = ActionBox::cube(2, 0.0, 2.0);
  EXPECT_NEAR(beta_policy_log_prob(p, kX, std::vector<double>{0.4, 1.7}, box),
              -2.0 * std::log(2.0), 1e-14);
}

TEST(BetaPolicyLogProb, Beta22AtHalf) {
  const Policy p = constant_beta_policy(1, 2.0, 2.0);
  EXPECT_NEAR(beta_policy_log_prob(p, kX, std::vector<double>{0.5},
                                   ActionBox::cube(1, 0.0, 1.0)),
              std::log(1.5), 1e-13);
}

TEST(BetaPolicyLogProb, OutsideBoxIsNegativeInfinity) {
  const Policy p = constant_beta_policy(1, 2.0, 2.0);
  const ActionBox unit = ActionBox::cube(1, 0.0, 1.0);
  EXPECT_EQ(beta_policy_log_prob(p, kX, std::vector<double>{1.5}, unit),
            -std::numeric_limits<double>::infinity());
  EXPECT_EQ(beta_policy_log_prob(p, kX, std::vector<double>{-0.01}, unit),
            -std::numeric_limits<double>::infinity());
}

TEST(BetaPolicyLogProb, FaceIsNudgedToFiniteValue) {
  const Policy p = constant_beta_policy(1, 2.0, 3.0);
  const ActionBox unit = ActionBox::cube(1, 0.0, 1.0);
  const double at_face = beta_policy_log_prob(p, kX, std::vector<double>{0.0}, unit);
  EXPECT_TRUE(std::isfinite(at_face));
  EXPECT_NEAR(at_face, beta_log_pdf(kFaceNudge, {2.0, 3.0}), 1e-12);
}

TEST(BetaPolicyLogProb, MatchesIndependentDensity) {
  Rng rng(21);
  const Policy p = constant_beta_policy(2, 3.0, 1.5);
  const ActionBox box = ActionBox::make({-2.0, 1.0}, {4.0, 1.5});
  const double lb = std::lgamma(4.5) - std::lgamma(3.0) - std::lgamma(1.5);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> u = {rng.uniform(-2, 4), rng.uniform(1, 1.5)};
    double want = 0.0;
    for (int d = 0; d < 2; ++d) {
      const double w = box.upper[d] - box.lower[d];
      const double t = (u[d] - box.lower[d]) / w;
      want += lb + 2.0 * std::log(t) + 0.5 * std::log1p(-t) - std::log(w);
    }
    EXPECT_NEAR(beta_policy_log_prob(p, kX, u, box), want, 1e-11);
  }
}

TEST(BetaPolicyScore, MatchesFiniteDifferences) {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    Policy p = Policy::beta_box(3, 2, {5}, rng);
    const std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1),
                                   rng.uniform(-1, 1)};
    const ActionBox box = ActionBox::make({rng.uniform(-3, 0), rng.uniform(-3, 0)},
                                          {rng.uniform(0.5, 3), rng.uniform(0.5, 3)});
    std::vector<double> u(2);
    for (int d = 0; d < 2; ++d) {
      u[d] = box.lower[d] + (box.upper[d] - box.lower[d]) * rng.uniform(0.05, 0.95);
    }
    const auto score = beta_policy_score(p, x, u, box);
    const auto fd = oracle::central_gradient(
        [&](const std::vector<double>& theta) {
          return beta_policy_log_prob(p.with_params(ParamVector{theta}), x, u, box);
        },
        p.params().values, 1e-5);
    EXPECT_LE(oracle::relative_error(score.values, fd), 1e-4) << trial;
  }
}

TEST(BetaPolicyScore, ZeroMeanUnderPolicy) {
  Rng rng(41);
  Policy p = Policy::beta_box(2, 1, {3}, rng);
  const ActionBox box = ActionBox::make({-1.0}, {2.0});
  const std::size_t k = p.params().size();
  std::vector<std::vector<double>> coords(k);
  for (int i = 0; i < 100000; ++i) {
    const auto u = beta_policy_sample(p, kX, box, rng);
    const auto s = beta_policy_score(p, kX, u, box);
    for (std::size_t j = 0; j < k; ++j) coords[j].push_back(s.values[j]);
  }
  for (std::size_t j = 0; j < k; ++j) {
    const auto ms = oracle::mean_se(coords[j]);
    if (ms.se == 0.0) {
      EXPECT_EQ(ms.mean, 0.0);
      continue;
    }
    EXPECT_LE(std::abs(ms.mean), 4.0 * ms.se) << "coord " << j;
  }
}

TEST(BetaPolicyScore, IdenticalFeaturesGiveIdenticalScores) {
  Rng rng(43);
  Policy p = Policy::beta_box(2, 2, {6}, rng);
  const ActionBox box = ActionBox::cube(2, -1, 1);
  const std::vector<double> x1 = {0.2, 0.4};
  const std::vector<double> x2 = x1;
  const std::vector<double> u = {0.1, -0.3};
  EXPECT_EQ(beta_policy_score(p, x1, u, box), beta_policy_score(p, x2, u, box));
}

TEST(BetaPolicyScore, OutsideBoxThrows) {
  const Policy p = constant_beta_policy(1, 2.0, 2.0);
  EXPECT_THROW(beta_policy_score(p, kX, std::vector<double>{3.0},
                                 ActionBox::cube(1, 0, 1)),
               DomainError);
}

TEST(BetaPolicyScore, DegenerateDimensionContributesNothing) {
  const Policy p = constant_beta_policy(2, 2.0, 3.0);
  const ActionBox box = ActionBox::make({0.5, 0.0}, {0.5, 1.0});
  const ConditionedPolicy cp(p, kX);
  HeadGradient g = cp.zero_gradient();
  cp.accumulate_log_density_grad(std::vector<double>{0.5, 0.3}, &box, 1.0, g);
  EXPECT_EQ(g.head[0], 0.0);
  EXPECT_EQ(g.head[2], 0.0);
  EXPECT_NE(g.head[1], 0.0);
}

TEST(BetaPolicyScore, EmpiricalMaximumIsFinite) {
  Rng rng(47);
  double max_norm = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Policy p = Policy::beta_box(2, 1, {4}, rng);
    const std::vector<double> x = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const ActionBox box = ActionBox::cube(1, 0.0, 1.0);
    const std::vector<double> u = {rng.uniform(1e-3, 1.0 - 1e-3)};
    const auto s = beta_policy_score(p, x, u, box);
    double n2 = 0.0;
    for (double v : s.values) n2 += v * v;
    max_norm = std::max(max_norm, std::sqrt(n2));
  }
  EXPECT_TRUE(std::isfinite(max_norm));
  RecordProperty("max_score_norm", std::to_string(max_norm));
}

TEST(GaussianPolicySample, TinyStdReturnsClippedMean) {
  const Policy inside = constant_gaussian_policy(3.25, std::log(1e-8));
  const Policy outside = constant_gaussian_policy(40.0, std::log(1e-8));
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    EXPECT_NEAR(gaussian_policy_sample(inside, kX, rng)[0], 3.25, 1e-6);
    EXPECT_EQ(gaussian_policy_sample(outside, kX, rng)[0], 15.0);
  }
}

TEST(GaussianPolicySample, MeanFarAboveBoxClipsToUpper) {
  const Policy p = constant_gaussian_policy(1e4, std::log(50.0));
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(gaussian_policy_sample(p, kX, rng)[0], 15.0);
  }
}

TEST(GaussianPolicySample, StaysInTorqueBox) {
  const Policy p = constant_gaussian_policy(2.0, std::log(20.0));
  Rng rng(6);
  for (int i = 0; i < 10000; ++i) {
    const double u = gaussian_policy_sample(p, kX, rng)[0];
    EXPECT_GE(u, -15.0);
    EXPECT_LE(u, 15.0);
  }
}

TEST(GaussianPolicy, LogStdInitializedToZero) {
  Rng rng(9);
  const Policy p = Policy::gaussian_clipped(3, 2, {8}, ActionBox::cube(2, -1, 1), rng);
  ASSERT_EQ(p.log_std().size(), 2u);
  EXPECT_EQ(p.log_std()[0], 0.0);
  EXPECT_EQ(p.log_std()[1], 0.0);
  EXPECT_EQ(p.params().size(), p.net_param_count() + 2);
}

TEST(GaussianPolicy, ScoreMatchesFiniteDifferences) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    Policy p = Policy::gaussian_clipped(2, 2, {5}, ActionBox::cube(2, -5, 5), rng);
    ParamVector params = p.params();
    params.values[params.size() - 1] = rng.uniform(-1, 0.5);
    params.values[params.size() - 2] = rng.uniform(-1, 0.5);
    p.set_params(params);
    const std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const std::vector<double> u = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const ConditionedPolicy cp(p, x);
    HeadGradient g = cp.zero_gradient();
    cp.accumulate_log_density_grad(u, nullptr, 1.0, g);
    const auto score = cp.backprop(g);
    const auto fd = oracle::central_gradient(
        [&](const std::vector<double>& theta) {
          const Policy q = p.with_params(ParamVector{theta});
          return ConditionedPolicy(q, x).log_density(u);
        },
        params.values, 1e-5);
    EXPECT_LE(oracle::relative_error(score.values, fd), 1e-4) << trial;
  }
}

TEST(RejectionSample, FullSupportLeavesDistributionUnchanged) {
  const Policy p = constant_beta_policy(1, 2.0, 3.0);
  const ActionBox unit = ActionBox::cube(1, 0, 1);
  Rng a(13), b(13);
  std::vector<double> xs;
  for (int i = 0; i < 10000; ++i) {
    const auto u = rejection_truncated_sample(
        p, kX, [](std::span<const double>) { return true; }, a, 1, &unit);
    EXPECT_EQ(u, beta_policy_sample(p, kX, unit, b));
    xs.push_back(u[0]);
  }
  const double d =
      oracle::ks_statistic(xs, [](double t) { return oracle::beta_cdf(t, 2, 3); });
  EXPECT_LT(d, oracle::ks_critical_5pct(xs.size()));
}

TEST(RejectionSample, UniformBaseOnSubintervalIsUniform) {
  const Policy p = constant_beta_policy(1, 1.0, 1.0);
  const ActionBox unit = ActionBox::cube(1, 0, 1);
  const SafeActionSet c = SafeActionSet::interval(0.2, 0.6);
  Rng rng(17);
  std::vector<double> xs;
  for (int i = 0; i < 10000; ++i) {
    const auto u = rejection_truncated_sample(
        p, kX, [&](std::span<const double> v) { return c.contains(v, 0.0); }, rng,
        1000, &unit);
    ASSERT_TRUE(c.contains(u, 0.0));
    xs.push_back(u[0]);
  }
  const double d = oracle::ks_statistic(
      xs, [](double t) { return std::clamp((t - 0.2) / 0.4, 0.0, 1.0); });
  EXPECT_LT(d, oracle::ks_critical_5pct(xs.size()));
}

TEST(RejectionSample, EmptySetExhaustsAttempts) {
  const Policy p = constant_beta_policy(1, 2.0, 2.0);
  const ActionBox unit = ActionBox::cube(1, 0, 1);
  Rng rng(1);
  EXPECT_THROW(rejection_truncated_sample(
                   p, kX, [](std::span<const double>) { return false; }, rng, 100,
                   &unit),
               SafeSetSamplingFailed);
  EXPECT_THROW(rejection_truncated_sample(
                   p, kX, [](std::span<const double>) { return true; }, rng, 0,
                   &unit),
               DomainError);
}

TEST(RejectionSample, GaussianTruncatedToIntervalMatchesOracle) {
  const Policy p = constant_gaussian_policy(0.0, 0.0);
  const SafeActionSet c = SafeActionSet::interval(-0.5, 1.5);
  Rng rng(19);
  std::vector<double> xs;
  for (int i = 0; i < 10000; ++i) {
    xs.push_back(rejection_truncated_sample(
        p, kX, [&](std::span<const double> v) { return c.contains(v, 0.0); }, rng,
        1000)[0]);
  }
  const double z = normal_cdf(1.5) - normal_cdf(-0.5);
  const double d = oracle::ks_statistic(
      xs, [&](double t) { return (normal_cdf(t) - normal_cdf(-0.5)) / z; });
  EXPECT_LT(d, oracle::ks_critical_5pct(xs.size()));
}

TEST(EstimateNormalization, UniformBaseOnSubinterval) {
  const Policy p = constant_beta_policy(1, 1.0, 1.0);
  const ActionBox unit = ActionBox::cube(1, 0, 1);
  const SafeActionSet c = SafeActionSet::interval(0.2, 0.6);
  Rng rng(23);
  const double est = estimate_normalization(p, kX, c, 10000, rng, &unit);
  // Density is exactly 1 on C, so every draw contributes the same value.
  EXPECT_NEAR(est, 0.4, 1e-12);
  EXPECT_NEAR(estimate_normalization_quadrature(p, kX, c, &unit), 0.4, 1e-10);
}

TEST(EstimateNormalization, FullSupportIsOne) {
  const Policy p = constant_beta_policy(1, 2.0, 5.0);
  const ActionBox unit = ActionBox::cube(1, 0, 1);
  const SafeActionSet c = SafeActionSet::interval(0.0, 1.0);
  Rng rng(29);
  std::vector<double> single;
  for (int i = 0; i < 10000; ++i) {
    single.push_back(estimate_normalization(p, kX, c, 1, rng, &unit));
  }
  const auto ms = oracle::mean_se(single);
  EXPECT_LE(std::abs(ms.mean - 1.0), 3.0 * ms.se);
  EXPECT_NEAR(estimate_normalization_quadrature(p, kX, c, &unit), 1.0, 1e-10);
}

TEST(EstimateNormalization, StandardNormalOnUnitIntervalMatchesErf) {
  const Policy p = constant_gaussian_policy(0.0, 0.0);
  const SafeActionSet c = SafeActionSet::interval(-1.0, 1.0);
  const double want = std::erf(1.0 / std::numbers::sqrt2);
  EXPECT_NEAR(want, 0.6826895, 1e-7);
  Rng rng(31);
  std::vector<double> single;
  for (int i = 0; i < 100000; ++i) {
    single.push_back(estimate_normalization(p, kX, c, 1, rng));
  }
  const auto ms = oracle::mean_se(single);
  EXPECT_LE(std::abs(ms.mean - want), 3.0 * ms.se);
  EXPECT_NEAR(estimate_normalization_quadrature(p, kX, c), want, 1e-12);
}

TEST(EstimateNormalization, UnbiasedAtSmallM) {
  Rng rng(37);
  Policy p = Policy::gaussian_clipped(2, 1, {4}, ActionBox::cube(1, -15, 15), rng);
  const SafeActionSet c = SafeActionSet::interval(-0.3, 1.1);
  const double exact = estimate_normalization_quadrature(p, kX, c);
  std::vector<double> ests;
  for (int i = 0; i < 200; ++i) {
    ests.push_back(estimate_normalization(p, kX, c, 100, rng));
  }
  const auto ms = oracle::mean_se(ests);
  EXPECT_LE(std::abs(ms.mean - exact), 3.0 * ms.se);
}

TEST(EstimateNormalization, ZeroVolumeThrows) {
  const Policy p = constant_gaussian_policy(0.0, 0.0);
  const SafeActionSet c = SafeActionSet::interval(0.5, 0.5);
  Rng rng(1);
  EXPECT_THROW(estimate_normalization(p, kX, c, 10, rng), DomainError);
  EXPECT_THROW(estimate_normalization(p, kX, SafeActionSet::interval(0, 1), 0, rng),
               DomainError);
}

TEST(TruncatedScore, FullSupportBetaEqualsBaseScore) {
  Rng rng(53);
  Policy p = Policy::beta_box(2, 2, {5}, rng);
  const ActionBox box = ActionBox::make({-1.0, 0.0}, {1.0, 3.0});
  const std::vector<double> u = {0.2, 1.1};
  const auto est = truncated_score(p, kX, u, SafeActionSet::box(box), 64, rng, &box);
  EXPECT_EQ(est.score, beta_policy_score(p, kX, u, box));
  EXPECT_EQ(est.normalization, 1.0);
  EXPECT_EQ(est.mc_samples_used, 0);
}

TEST(TruncatedScore, BetaSupportInsideHalfspaceSetHasNoCorrection) {
  Rng rng(54);
  Policy p = Policy::beta_box(2, 2, {5}, rng);
  const ActionBox outer = ActionBox::cube(2, -5, 5);
  const ActionBox inner = ActionBox::make({-5, -5}, {2, 1});
  const auto c = SafeActionSet::halfspace_box({1.0, 1.0}, 3.0, outer, inner);
  const std::vector<double> u = {0.0, -2.0};
  const auto est = truncated_score(p, kX, u, c, 64, rng, &c.sampling_box());
  EXPECT_EQ(est.score, beta_policy_score(p, kX, u, inner));
  EXPECT_EQ(est.normalization, 1.0);
}

TEST(TruncatedScore, QuadratureMatchesFiniteDifferenceOfTruncatedLogDensity) {
  Rng rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    Policy p = Policy::gaussian_clipped(2, 1, {4}, ActionBox::cube(1, -15, 15), rng);
    ParamVector params = p.params();
    params.values.back() = rng.uniform(-1.0, 0.5);
    p.set_params(params);
    const std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double lo = rng.uniform(-2, 0.5);
    const SafeActionSet c = SafeActionSet::interval(lo, lo + rng.uniform(0.3, 2));
    const std::vector<double> u = {lo + c.volume() * rng.uniform(0.05, 0.95)};
    const auto est = truncated_score_quadrature(p, x, u, c);
    const auto fd = oracle::central_gradient(
        [&](const std::vector<double>& theta) {
          const Policy q = p.with_params(ParamVector{theta});
          const ConditionedPolicy cp(q, x);
          // Independent mass: Gaussian CDF difference.
          const double m = cp.mean(0), s = cp.stddev(0);
          const double mass = normal_cdf((c.outer_box().upper[0] - m) / s) -
                              normal_cdf((c.outer_box().lower[0] - m) / s);
          return cp.log_density(u) - std::log(mass);
        },
        params.values, 1e-5);
    EXPECT_LE(oracle::relative_error(est.score.values, fd), 1e-4) << trial;
    EXPECT_GT(est.normalization, 0.0);
    EXPECT_LE(est.normalization, 1.0 + 1e-12);
  }
}

TEST(TruncatedScore, MonteCarloUsesCommonRandomNumbers) {
  // With a uniform base every density equals 1, so the correction is the
  // plain average of the sample scores; replay the draws to check it.
  const Policy p = constant_beta_policy(1, 1.0, 1.0);
  const ActionBox unit = ActionBox::cube(1, 0, 1);
  const SafeActionSet c = SafeActionSet::interval(0.2, 0.6);
  const std::vector<double> u = {0.3};
  Rng a(61), b(61);
  const auto est = truncated_score(p, kX, u, c, 50, a, &unit);
  EXPECT_NEAR(est.normalization, 0.4, 1e-12);
  EXPECT_EQ(est.mc_samples_used, 50);
  std::vector<double> want = beta_policy_score(p, kX, u, unit).values;
  for (int i = 0; i < 50; ++i) {
    const auto s = beta_policy_score(p, kX, c.sample_uniform(b), unit);
    for (std::size_t j = 0; j < want.size(); ++j) want[j] -= s.values[j] / 50.0;
  }
  for (std::size_t j = 0; j < want.size(); ++j) {
    EXPECT_NEAR(est.score.values[j], want[j], 1e-10);
  }
}

TEST(TruncatedScore, ZeroMeanUnderTruncatedPolicy) {
  Rng rng(67);
  Policy p = Policy::gaussian_clipped(2, 1, {3}, ActionBox::cube(1, -15, 15), rng);
  const SafeActionSet c = SafeActionSet::interval(-0.4, 0.9);
  const std::size_t k = p.params().size();
  std::vector<std::vector<double>> coords(k);
  for (int i = 0; i < 100000; ++i) {
    const auto u = rejection_truncated_sample(
        p, kX, [&](std::span<const double> v) { return c.contains(v, 0.0); }, rng,
        10000);
    const auto s = truncated_score_quadrature(p, kX, u, c, nullptr, 4, 16);
    for (std::size_t j = 0; j < k; ++j) coords[j].push_back(s.score.values[j]);
  }
  for (std::size_t j = 0; j < k; ++j) {
    const auto ms = oracle::mean_se(coords[j]);
    if (ms.se == 0.0) continue;
    EXPECT_LE(std::abs(ms.mean), 4.0 * ms.se) << "coord " << j;
  }
}

TEST(TruncatedScore, VanishingMassThrows) {
  const Policy p = constant_gaussian_policy(0.0, std::log(0.01));
  const SafeActionSet c = SafeActionSet::interval(5.0, 6.0);
  Rng rng(71);
  EXPECT_THROW(truncated_score(p, kX, std::vector<double>{5.5}, c, 32, rng),
               NormalizationUnderflow);
  EXPECT_THROW(truncated_score_quadrature(p, kX, std::vector<double>{5.5}, c),
               NormalizationUnderflow);
}

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
  std::vector<double> x, w;
  gauss_legendre(8, x, w);
  // Order 8 is exact through degree 15.
  for (int deg = 0; deg <= 15; ++deg) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += w[i] * std::pow(x[i], deg);
    const double want = deg % 2 == 1 ? 0.0 : 2.0 / (deg + 1);
    EXPECT_NEAR(sum, want, 1e-14) << deg;
  }
}

TEST(Policy, SetParamsRejectsWrongSize) {
  Policy p = constant_beta_policy(1, 2.0, 2.0);
  EXPECT_THROW(p.set_params(ParamVector{std::vector<double>(3, 0.0)}),
               DimensionMismatch);
}

TEST(Policy, FeatureSizeMismatchThrows) {
  const Policy p = constant_beta_policy(1, 2.0, 2.0);
  Rng rng(1);
  EXPECT_THROW(beta_policy_sample(p, std::vector<double>{1.0}, ActionBox::cube(1, 0, 1), rng),
               DimensionMismatch);
}

}  // namespace
}  // namespace saferl
