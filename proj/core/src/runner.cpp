#include "saferl/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "saferl/checkpoint.hpp"
#include "saferl/errors.hpp"

namespace saferl {

namespace {

using Clock = std::chrono::steady_clock;

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since)
      .count();
}

void fill_safety_rate(RunMetrics& m) {
  m.safety_rate = m.steps ? 1.0 - static_cast<double>(m.violations) /
                                      static_cast<double>(m.steps)
                          : 1.0;
}

ReplicationResult run_safe_rpg(const ExperimentConfig& cfg,
                               const Environment& env, std::size_t r,
                               const RowSink& sink) {
  ReplicationResult out;
  out.index = r;
  out.seed = cfg.seed_for(r);
  const ControlMode mode = control_mode_for(cfg);
  Policy policy = make_initial_policy(cfg, env, out.seed);
  SafeRpgConfig rpg = cfg.safe_rpg;
  rpg.seed = out.seed;
  Rng rng = Rng(out.seed).split(1);
  const auto start = Clock::now();
  out.min_safety_margin = std::numeric_limits<double>::infinity();

  auto evaluate = [&] {
    return evaluate_policy(env, policy, mode, cfg.eval_episodes,
                           cfg.eval_seed);
  };
  std::vector<double> eval_returns;
  auto emit = [&](std::size_t iteration, const StepCounters& c) {
    RunMetrics m;
    m.iteration = iteration;
    m.episodic_return = evaluate().mean_return;
    m.steps = c.steps;
    m.violations = c.violations;
    m.safe_set_empty_events = c.safe_set_empty_events;
    m.min_safety_margin = out.min_safety_margin;
    m.seed = out.seed;
    m.wall_ms = cfg.record_wall_clock ? elapsed_ms(start) : 0.0;
    fill_safety_rate(m);
    eval_returns.push_back(m.episodic_return);
    out.history.push_back(m);
    if (sink) sink(m);
  };

  emit(0, {});
  StepCounters interval;
  const std::size_t per_window =
      std::max<std::size_t>(1, rpg.plateau_window / cfg.eval_interval);
  for (std::size_t k = 0; k < rpg.max_iterations; ++k) {
    try {
      SafeRpgStep step = safe_rpg_iteration(policy, env, mode, rpg, k, rng);
      policy.set_params(std::move(step.next_params));
      interval += step.counters;
    } catch (const SafeSetEmpty&) {
      ++interval.safe_set_empty_events;
    }
    const bool last = k + 1 == rpg.max_iterations;
    if ((k + 1) % cfg.eval_interval != 0 && !last) continue;
    emit(k + 1, interval);
    interval = {};
    if (rpg.plateau_stop && eval_returns.size() > per_window) {
      const double now = eval_returns.back();
      const double then = eval_returns[eval_returns.size() - 1 - per_window];
      const double rel =
          std::abs(now - then) / std::max(std::abs(then), 1e-12);
      if (rel < rpg.plateau_tol) break;
    }
  }
  out.final_policy = policy;
  out.final_eval = evaluate();
  return out;
}

ReplicationResult run_ppo(const ExperimentConfig& cfg, const Environment& env,
                          std::size_t r, const RowSink& sink) {
  ReplicationResult out;
  out.index = r;
  out.seed = cfg.seed_for(r);
  const ControlMode mode = control_mode_for(cfg);
  PpoConfig ppo = cfg.ppo;
  ppo.seed = out.seed;
  PpoTrainer trainer(env, make_initial_policy(cfg, env, out.seed), mode, ppo);
  const auto start = Clock::now();
  out.min_safety_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cfg.iterations; ++i) {
    RunMetrics m = trainer.iterate();
    m.wall_ms = cfg.record_wall_clock ? elapsed_ms(start) : 0.0;
    out.min_safety_margin = std::min(out.min_safety_margin, m.min_safety_margin);
    out.history.push_back(m);
    if (sink) sink(m);
  }
  out.final_policy = trainer.policy();
  out.final_eval = evaluate_policy(env, out.final_policy, mode,
                                   cfg.eval_episodes, cfg.eval_seed);
  return out;
}

struct Interval {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

Interval normal_interval(const std::vector<double>& xs) {
  Interval ci;
  double sum = 0.0;
  for (double x : xs) {
    if (std::isfinite(x)) {
      sum += x;
      ++ci.n;
    }
  }
  if (ci.n == 0) return ci;
  ci.mean = sum / static_cast<double>(ci.n);
  double half = 0.0;
  if (ci.n > 1) {
    double ss = 0.0;
    for (double x : xs) {
      if (std::isfinite(x)) ss += (x - ci.mean) * (x - ci.mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(ci.n - 1));
    half = 1.96 * sd / std::sqrt(static_cast<double>(ci.n));
  }
  ci.lo = ci.mean - half;
  ci.hi = ci.mean + half;
  return ci;
}

nlohmann::json to_json(const Interval& ci) {
  auto num = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  return {{"mean", num(ci.mean)},
          {"ci95_low", num(ci.lo)},
          {"ci95_high", num(ci.hi)},
          {"n", ci.n}};
}

std::string policy_metadata(const ReplicationResult& rep) {
  nlohmann::json meta;
  meta["family"] = rep.final_policy.family() == PolicyFamily::kBetaBox
                       ? "beta_box"
                       : "gaussian_clipped";
  meta["seed"] = rep.seed;
  if (rep.final_policy.family() == PolicyFamily::kGaussianClipped) {
    const auto ls = rep.final_policy.log_std();
    meta["log_std"] = std::vector<double>(ls.begin(), ls.end());
    meta["clip_lower"] = rep.final_policy.clip_box().lower;
    meta["clip_upper"] = rep.final_policy.clip_box().upper;
  }
  return meta.dump();
}

}  // namespace

ControlMode control_mode_for(const ExperimentConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::kSafeRpg:
      return cfg.safe_rpg_policy == SafeRpgPolicy::kBeta
                 ? ControlMode::kBetaSafe
                 : ControlMode::kGaussianTruncated;
    case Algorithm::kPpoBeta: return ControlMode::kBetaSafe;
    case Algorithm::kPpoGaussian: return ControlMode::kGaussianClipped;
    case Algorithm::kPpoGaussianProjected:
      return ControlMode::kGaussianProjected;
  }
  throw ConfigError("unknown algorithm");
}

Policy make_initial_policy(const ExperimentConfig& cfg, const Environment& env,
                           std::uint64_t seed) {
  Rng init = Rng(seed).split(0);
  if (control_mode_for(cfg) == ControlMode::kBetaSafe) {
    return Policy::beta_box(env.feature_dim(), env.action_dim(),
                            cfg.policy_hidden, init);
  }
  return Policy::gaussian_clipped(env.feature_dim(), env.action_dim(),
                                  cfg.policy_hidden, env.actuator_box(), init);
}

ReplicationResult run_replication(const ExperimentConfig& cfg,
                                  std::size_t replication,
                                  const RowSink& sink) {
  cfg.validate();
  if (replication >= cfg.replications) {
    throw PreconditionViolated("replication index out of range");
  }
  const auto env = make_environment(cfg);
  return cfg.algorithm == Algorithm::kSafeRpg
             ? run_safe_rpg(cfg, *env, replication, sink)
             : run_ppo(cfg, *env, replication, sink);
}

std::string csv_header() {
  return "iteration,return,safety_rate,violations,safe_set_empty_events,"
         "wall_ms,seed\n";
}

std::string csv_row(const RunMetrics& m) {
  std::string row;
  row += std::to_string(m.iteration);
  row += ',' + format_real(m.episodic_return);
  row += ',' + format_real(m.safety_rate);
  row += ',' + std::to_string(m.violations);
  row += ',' + std::to_string(m.safe_set_empty_events);
  row += ',' + format_real(m.wall_ms);
  row += ',' + std::to_string(m.seed);
  row += '\n';
  return row;
}

std::string replication_stem(const ExperimentConfig& cfg, std::size_t r) {
  return to_string(cfg.env) + "_" + to_string(cfg.algorithm) + "_rep" +
         std::to_string(r);
}

std::string aggregate_json(const ExperimentConfig& cfg,
                           const std::vector<ReplicationResult>& reps) {
  nlohmann::json j;
  j["env"] = to_string(cfg.env);
  j["algorithm"] = to_string(cfg.algorithm);
  j["replications"] = reps.size();
  std::vector<std::uint64_t> seeds;
  std::size_t rows = 0;
  for (const auto& rep : reps) {
    seeds.push_back(rep.seed);
    rows = std::max(rows, rep.history.size());
  }
  j["seeds"] = seeds;

  nlohmann::json per_iter = nlohmann::json::array();
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> ret, rate;
    std::size_t iteration = 0;
    for (const auto& rep : reps) {
      if (i >= rep.history.size()) continue;
      iteration = rep.history[i].iteration;
      ret.push_back(rep.history[i].episodic_return);
      rate.push_back(rep.history[i].safety_rate);
    }
    per_iter.push_back({{"iteration", iteration},
                        {"return", to_json(normal_interval(ret))},
                        {"safety_rate", to_json(normal_interval(rate))}});
  }
  j["iterations"] = per_iter;

  std::vector<double> final_ret, goal_frac;
  for (const auto& rep : reps) {
    final_ret.push_back(rep.final_eval.mean_return);
    const double n = static_cast<double>(rep.final_eval.returns.size());
    goal_frac.push_back(n > 0 ? static_cast<double>(rep.final_eval.goal_episodes) / n
                              : 0.0);
  }
  j["final_eval"] = {{"mean_return", to_json(normal_interval(final_ret))},
                     {"goal_fraction", to_json(normal_interval(goal_frac))}};
  return j.dump(2) + "\n";
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg_out(dir / "config.ini", std::ios::binary);
    cfg_out << dump_config(cfg);
  }

  ExperimentResult result;
  result.replications.resize(cfg.replications);
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    result.csv_paths.push_back(
        (dir / (replication_stem(cfg, r) + ".csv")).string());
  }

  std::vector<std::exception_ptr> errors(cfg.replications);
  auto run_one = [&](std::size_t r) {
    try {
      std::ofstream csv(result.csv_paths[r], std::ios::binary);
      if (!csv) throw Error("cannot write " + result.csv_paths[r]);
      csv << csv_header() << std::flush;
      result.replications[r] = run_replication(
          cfg, r, [&csv](const RunMetrics& m) { csv << csv_row(m) << std::flush; });
      const auto& rep = result.replications[r];
      save_params(dir / (replication_stem(cfg, r) + "_policy"),
                  rep.final_policy.spec(),
                  ParamVector{std::vector<double>(
                      rep.final_policy.net_params().begin(),
                      rep.final_policy.net_params().end())},
                  policy_metadata(rep));
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };

  const std::size_t workers = std::min(cfg.workers, cfg.replications);
  if (workers <= 1) {
    for (std::size_t r = 0; r < cfg.replications; ++r) run_one(r);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t r;
          {
            std::lock_guard lock(mu);
            if (next >= cfg.replications) return;
            r = next++;
          }
          run_one(r);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  result.aggregate_path =
      (dir / (to_string(cfg.env) + "_" + to_string(cfg.algorithm) +
              "_aggregate.json"))
          .string();
  std::ofstream agg(result.aggregate_path, std::ios::binary);
  agg << aggregate_json(cfg, result.replications);
  return result;
}

}  // namespace saferl
