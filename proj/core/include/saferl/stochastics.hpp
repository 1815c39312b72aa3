#ifndef SAFERL_STOCHASTICS_HPP_
#define SAFERL_STOCHASTICS_HPP_

#include <cstdint>
#include <random>

namespace saferl {

// Seedable generator. Bits come from std::mt19937_64, whose output sequence
// is fixed by the standard; every variate below is derived from those bits
// by code in this library, so streams are identical across platforms.
// Not thread-safe: each thread or replication owns its own instance.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1); 53 random mantissa bits.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Deterministically derived child generator for stream `stream`.
  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive well-separated seeds.
std::uint64_t mix_seed(std::uint64_t x);

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;

  // Throws DomainError unless alpha > 0 and beta > 0 (finite).
  static BetaParams make(double alpha, double beta);
  void validate() const;
};

// ln Gamma(z) for z > 0 (Lanczos, g = 7, 9 terms; reflection below 0.5).
double log_gamma(double z);

// psi(z) = d/dz ln Gamma(z) and its derivative psi'(z), z > 0.
double digamma(double z);
double trigamma(double z);

double log_beta_function(double a, double b);

// Log density of Beta(alpha, beta) at u in [0, 1]. Endpoints with an infinite
// density return ln(1e300); endpoints with zero density return -inf.
double beta_log_pdf(double u, const BetaParams& p);
double beta_pdf(double u, const BetaParams& p);

// Differential entropy of Beta(alpha, beta).
double beta_entropy(const BetaParams& p);

// Marsaglia-Tsang gamma variate with unit scale; shape < 1 uses the
// U^(1/shape) boost.
double gamma_sample(double shape, Rng& rng);

// x / (x + y) with x ~ Gamma(alpha), y ~ Gamma(beta). Result lies in (0, 1).
double beta_sample(const BetaParams& p, Rng& rng);

// P(T = t) = p (1 - p)^t for t = 0, 1, 2, ...
std::uint64_t geometric_sample(double p, Rng& rng);

double standard_normal_sample(Rng& rng);
double gaussian_sample(double mean, double stddev, Rng& rng);

double normal_cdf(double x);

}  // namespace saferl

#endif  // SAFERL_STOCHASTICS_HPP_
