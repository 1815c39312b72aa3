#ifndef SAFERL_CONFIG_HPP_
#define SAFERL_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "saferl/envs.hpp"
#include "saferl/trainers.hpp"

namespace saferl {

enum class Algorithm { kSafeRpg, kPpoBeta, kPpoGaussian, kPpoGaussianProjected };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);  // throws ConfigError
EnvKind parse_env(const std::string& name);          // throws ConfigError

// Base distribution Safe-RPG truncates to C(x).
enum class SafeRpgPolicy { kBeta, kGaussianTruncated };

struct ExperimentConfig {
  EnvKind env = EnvKind::kPendulum;
  Algorithm algorithm = Algorithm::kPpoBeta;
  std::size_t replications = 1;
  // Explicit per-replication seeds; when empty, base_seed + r is used.
  std::vector<std::uint64_t> seeds;
  std::uint64_t base_seed = 0;
  std::string output_dir = "runs";
  // PPO iterations (each collects buffer_size steps). Safe-RPG uses
  // safe_rpg.max_iterations.
  std::size_t iterations = 500;
  // Concurrent replications; outputs do not depend on this.
  std::size_t workers = 1;
  // Wall-clock timings make CSVs non-reproducible, so they are opt-in.
  bool record_wall_clock = false;
  std::size_t eval_interval = 100;
  std::size_t eval_episodes = 10;
  std::uint64_t eval_seed = 12345;

  std::vector<std::size_t> policy_hidden = {64, 64};
  PendulumConfig pendulum;
  QuadConfig quadcopter;
  SafeRpgConfig safe_rpg;
  SafeRpgPolicy safe_rpg_policy = SafeRpgPolicy::kBeta;
  PpoConfig ppo;

  // Throws ConfigError on any invalid value or combination.
  void validate() const;
  std::uint64_t seed_for(std::size_t replication) const;
};

// Defaults for an environment/algorithm pair, including the published PPO
// hyperparameters for each policy family.
ExperimentConfig default_config(EnvKind env, Algorithm algorithm);

// INI-style text: [section] headers and key = value lines, '#' or ';'
// comments. Unknown sections or keys are rejected. The experiment section's
// env and algorithm select the defaults the remaining keys override.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

// Every key with its current value, parseable by parse_config.
std::string dump_config(const ExperimentConfig& cfg);

std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg);

}  // namespace saferl

#endif  // SAFERL_CONFIG_HPP_
