#include "saferl/stochastics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "saferl/errors.hpp"

namespace saferl {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw DomainError("uniform_index: n must be positive");
  // Rejection on the top of the range removes modulo bias.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(mix_seed(seed_ ^ mix_seed(stream + 1)));
}

BetaParams BetaParams::make(double alpha, double beta) {
  BetaParams p{alpha, beta};
  p.validate();
  return p;
}

void BetaParams::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) ||
      !std::isfinite(beta)) {
    throw DomainError("Beta parameters must be positive and finite (alpha=" +
                      std::to_string(alpha) +
                      ", beta=" + std::to_string(beta) + ")");
  }
}

namespace {

constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczosCoef = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

}  // namespace

double log_gamma(double z) {
  if (!(z > 0.0)) throw DomainError("log_gamma: argument must be positive");
  if (std::isinf(z)) return z;
  if (z < 0.5) {
    // Gamma(z) = Gamma(z + 1) / z keeps the series in its accurate range.
    return log_gamma(z + 1.0) - std::log(z);
  }
  const double x = z - 1.0;
  double series = kLanczosCoef[0];
  for (std::size_t i = 1; i < kLanczosCoef.size(); ++i) {
    series += kLanczosCoef[i] / (x + static_cast<double>(i));
  }
  const double t = x + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (x + 0.5) * std::log(t) -
         t + std::log(series);
}

double digamma(double z) {
  if (!(z > 0.0)) throw DomainError("digamma: argument must be positive");
  double shift = 0.0;
  while (z < 10.0) {
    shift -= 1.0 / z;
    z += 1.0;
  }
  const double inv = 1.0 / z;
  const double inv2 = inv * inv;
  const double tail =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
  return shift + std::log(z) - 0.5 * inv - tail;
}

double trigamma(double z) {
  if (!(z > 0.0)) throw DomainError("trigamma: argument must be positive");
  double shift = 0.0;
  while (z < 10.0) {
    shift += 1.0 / (z * z);
    z += 1.0;
  }
  const double inv = 1.0 / z;
  const double inv2 = inv * inv;
  const double tail =
      inv * (1.0 + inv * (0.5 + inv * (1.0 / 6.0 -
                                       inv2 * (1.0 / 30.0 -
                                               inv2 * (1.0 / 42.0 -
                                                       inv2 / 30.0)))));
  return shift + tail;
}

double log_beta_function(double a, double b) {
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double beta_log_pdf(double u, const BetaParams& p) {
  p.validate();
  if (!(u >= 0.0 && u <= 1.0)) {
    throw DomainError("beta_pdf: u must lie in [0, 1]");
  }
  static const double kLogHuge = std::log(1e300);
  const double a1 = p.alpha - 1.0;
  const double b1 = p.beta - 1.0;
  if (u == 0.0 || u == 1.0) {
    const double exponent = (u == 0.0) ? a1 : b1;
    if (exponent < 0.0) return kLogHuge;
    if (exponent > 0.0) return -std::numeric_limits<double>::infinity();
    // exponent == 0: the other factor equals 1 at this endpoint.
    return -log_beta_function(p.alpha, p.beta);
  }
  return a1 * std::log(u) + b1 * std::log1p(-u) -
         log_beta_function(p.alpha, p.beta);
}

double beta_pdf(double u, const BetaParams& p) {
  const double lp = beta_log_pdf(u, p);
  // exp(ln 1e300) is not exactly 1e300; keep the documented clamp value.
  static const double kLogHuge = std::log(1e300);
  return lp == kLogHuge ? 1e300 : std::exp(lp);
}

double beta_entropy(const BetaParams& p) {
  p.validate();
  const double a = p.alpha;
  const double b = p.beta;
  return log_beta_function(a, b) - (a - 1.0) * digamma(a) -
         (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b);
}

namespace {

// ln of a Gamma(shape) variate; keeps shape << 1 from underflowing to 0.
double log_gamma_variate(double shape, Rng& rng) {
  double log_boost = 0.0;
  if (shape < 1.0) {
    log_boost = std::log(rng.uniform()) / shape;
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = standard_normal_sample(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2 ||
        std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
      return std::log(d * v) + log_boost;
    }
  }
}

}  // namespace

double gamma_sample(double shape, Rng& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw DomainError("gamma_sample: shape must be positive");
  }
  return std::exp(log_gamma_variate(shape, rng));
}

double beta_sample(const BetaParams& p, Rng& rng) {
  p.validate();
  const double lx = log_gamma_variate(p.alpha, rng);
  const double ly = log_gamma_variate(p.beta, rng);
  // x / (x + y) = 1 / (1 + exp(ly - lx)), evaluated without overflow.
  const double diff = ly - lx;
  double u;
  if (diff > 0.0) {
    const double e = std::exp(-diff);
    u = e / (1.0 + e);
  } else {
    u = 1.0 / (1.0 + std::exp(diff));
  }
  if (u <= 0.0) u = std::numeric_limits<double>::denorm_min();
  if (u >= 1.0) u = std::nextafter(1.0, 0.0);
  return u;
}

std::uint64_t geometric_sample(double p, Rng& rng) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw DomainError("geometric_sample: p must lie in (0, 1]");
  }
  if (p == 1.0) return 0;
  const double t = std::floor(std::log(rng.uniform()) / std::log1p(-p));
  constexpr double kMax = 9.0e18;
  return t >= kMax ? static_cast<std::uint64_t>(kMax)
                   : static_cast<std::uint64_t>(t);
}

double standard_normal_sample(Rng& rng) {
  // Box-Muller, cosine branch only so one call consumes exactly two uniforms.
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double gaussian_sample(double mean, double stddev, Rng& rng) {
  if (!(stddev > 0.0) || !std::isfinite(stddev)) {
    throw DomainError("gaussian_sample: stddev must be positive");
  }
  return mean + stddev * standard_normal_sample(rng);
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

}  // namespace saferl
