#ifndef SAFERL_RUNNER_HPP_
#define SAFERL_RUNNER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "saferl/config.hpp"
#include "saferl/policies.hpp"
#include "saferl/trainers.hpp"

namespace saferl {

struct ReplicationResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::vector<RunMetrics> history;
  Policy final_policy;
  // Deterministic evaluation of the final policy.
  EvalResult final_eval;
  // Smallest safety margin over every training step.
  double min_safety_margin = 0.0;
};

// Controls mode implied by the configured algorithm.
ControlMode control_mode_for(const ExperimentConfig& cfg);
Policy make_initial_policy(const ExperimentConfig& cfg, const Environment& env,
                           std::uint64_t seed);

using RowSink = std::function<void(const RunMetrics&)>;

// Trains one replication. Rows are handed to `sink` as they are produced.
ReplicationResult run_replication(const ExperimentConfig& cfg,
                                  std::size_t replication,
                                  const RowSink& sink = {});

struct ExperimentResult {
  std::vector<ReplicationResult> replications;
  std::vector<std::string> csv_paths;
  std::string aggregate_path;
};

// Validates, runs every replication and writes one CSV per replication, an
// aggregate JSON, the effective config and final policy checkpoints into
// cfg.output_dir. CSV rows are flushed as they are produced.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::string csv_header();
std::string csv_row(const RunMetrics& m);

// Mean and 95% normal-approximation interval per logged iteration.
std::string aggregate_json(const ExperimentConfig& cfg,
                           const std::vector<ReplicationResult>& reps);

std::string replication_stem(const ExperimentConfig& cfg, std::size_t r);

}  // namespace saferl

#endif  // SAFERL_RUNNER_HPP_
