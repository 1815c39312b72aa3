// saferl: run experiments, oracle suites and config dumps.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "saferl/config.hpp"
#include "saferl/errors.hpp"
#include "saferl/runner.hpp"
#include "saferl/verify.hpp"

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed,
            const std::optional<std::string>& output_dir,
            std::optional<std::size_t> replications) {
  saferl::ExperimentConfig cfg;
  try {
    cfg = saferl::load_config(path);
    if (seed) {
      cfg.seeds.clear();
      cfg.base_seed = *seed;
    }
    if (output_dir) cfg.output_dir = *output_dir;
    if (replications) cfg.replications = *replications;
    cfg.validate();
  } catch (const saferl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsageError;
  }
  try {
    const auto result = saferl::run_experiment(cfg);
    for (const auto& rep : result.replications) {
      std::cout << "replication " << rep.index << " (seed " << rep.seed
                << "): final evaluation return " << rep.final_eval.mean_return
                << ", goal episodes " << rep.final_eval.goal_episodes << '/'
                << rep.final_eval.returns.size() << '\n';
    }
    std::cout << "wrote " << result.aggregate_path << '\n';
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed) {
  std::vector<saferl::CheckResult> results;
  try {
    results = saferl::run_verify_suite(suite, seed);
  } catch (const saferl::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "verify failed: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  std::cout << saferl::format_check_table(results);
  for (const auto& r : results) {
    if (!r.passed) return kRuntimeFailure;
  }
  return 0;
}

int cmd_print_config(const std::string& env, const std::string& algorithm) {
  try {
    std::cout << saferl::dump_config(saferl::default_config(
        saferl::parse_env(env), saferl::parse_algorithm(algorithm)));
  } catch (const saferl::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kUsageError;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe reinforcement learning with control-barrier action sets"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> replications;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--seed", seed, "Base seed (replaces configured seeds)");
  run->add_option("--output-dir", output_dir, "Output directory");
  run->add_option("--replications", replications, "Number of replications");

  std::string suite;
  std::uint64_t verify_seed = 2024;
  auto* verify = app.add_subcommand("verify", "Run an oracle suite");
  verify->add_option("suite", suite,
                     "estq, scores, maxrect, invariance or normalization")
      ->required();
  verify->add_option("--seed", verify_seed, "Seed for the random instances");

  std::string env, algorithm;
  auto* print = app.add_subcommand("print-config", "Print default config");
  print->add_option("env", env, "pendulum or quadcopter")->required();
  print->add_option("algorithm", algorithm,
                    "safe_rpg, ppo_beta, ppo_gaussian or ppo_gaussian_projected")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  if (*run) return cmd_run(config_path, seed, output_dir, replications);
  if (*verify) return cmd_verify(suite, verify_seed);
  return cmd_print_config(env, algorithm);
}
