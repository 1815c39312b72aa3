#include <cmath>
#include <vector>

#include "saferl/errors.hpp"
#include "saferl/trainers.hpp"

namespace saferl {

double est_q(const Environment& env, const ActionSampler& sampler,
             const EnvState& x0, std::span<const double> u0, double gamma,
             Rng& rng) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("est_q: gamma must lie in (0, 1)");
  }
  const double root = std::sqrt(gamma);
  const std::uint64_t horizon = geometric_sample(1.0 - root, rng);

  EnvState x = x0;
  std::vector<double> u(u0.begin(), u0.end());
  double q_hat = 0.0;
  double weight = 1.0;  // gamma^(t/2)
  for (std::uint64_t t = 0; t < horizon; ++t) {
    const EnvTransition tr = env.step(x, u);
    q_hat += weight * tr.reward;
    weight *= root;
    x = tr.next;
    u = sampler(x, rng);
  }
  // Final term gamma^(T/2) r(x_T, u_T); the successor state is discarded.
  q_hat += weight * env.step(x, u).reward;
  return q_hat;
}

}  // namespace saferl
