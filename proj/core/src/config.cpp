#include "saferl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <system_error>
#include <type_traits>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "saferl/errors.hpp"

namespace saferl {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kSafeRpg: return "safe_rpg";
    case Algorithm::kPpoBeta: return "ppo_beta";
    case Algorithm::kPpoGaussian: return "ppo_gaussian";
    case Algorithm::kPpoGaussianProjected: return "ppo_gaussian_projected";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (Algorithm a : {Algorithm::kSafeRpg, Algorithm::kPpoBeta,
                      Algorithm::kPpoGaussian,
                      Algorithm::kPpoGaussianProjected}) {
    if (name == to_string(a)) return a;
  }
  throw ConfigError("unknown algorithm '" + name +
                    "' (expected safe_rpg, ppo_beta, ppo_gaussian or "
                    "ppo_gaussian_projected)");
}

EnvKind parse_env(const std::string& name) {
  if (name == "pendulum") return EnvKind::kPendulum;
  if (name == "quadcopter") return EnvKind::kQuadcopter;
  throw ConfigError("unknown env '" + name +
                    "' (expected pendulum or quadcopter)");
}

namespace {

// ------------------------------------------------------- value codecs --

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
  requires std::is_unsigned_v<T> && (!std::is_same_v<T, bool>)
std::string format(T v) {
  return std::to_string(v);
}

std::string format(int v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }
std::string format(const Vec2& v) { return format(v[0]) + ", " + format(v[1]); }

template <class T>
std::string format(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format(v[i]);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& text, const char* what) {
  throw ConfigError("cannot parse '" + text + "' as " + what);
}

template <class T>
T parse_number(const std::string& raw, const char* what) {
  const std::string text = trim(raw);
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (text.empty() || res.ec != std::errc{} || res.ptr != last) {
    bad_value(text, what);
  }
  return v;
}

void parse_into(const std::string& t, double& v) {
  v = parse_number<double>(t, "a real number");
}
template <class T>
  requires std::is_unsigned_v<T> && (!std::is_same_v<T, bool>)
void parse_into(const std::string& t, T& v) {
  if (trim(t).starts_with('-')) bad_value(t, "a non-negative integer");
  v = parse_number<T>(t, "a non-negative integer");
}
void parse_into(const std::string& t, int& v) {
  v = parse_number<int>(t, "an integer");
}
void parse_into(const std::string& t, bool& v) {
  const std::string s = trim(t);
  if (s == "true" || s == "1") {
    v = true;
  } else if (s == "false" || s == "0") {
    v = false;
  } else {
    bad_value(s, "a boolean");
  }
}
void parse_into(const std::string& t, std::string& v) { v = trim(t); }
void parse_into(const std::string& t, Vec2& v) {
  const auto items = split_list(t);
  if (items.size() != 2) bad_value(t, "a pair 'x, y'");
  parse_into(items[0], v[0]);
  parse_into(items[1], v[1]);
}
template <class T>
void parse_into(const std::string& t, std::vector<T>& v) {
  v.clear();
  for (const auto& item : split_list(t)) {
    T x{};
    parse_into(item, x);
    v.push_back(x);
  }
}

// ------------------------------------------------------ field registry --

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class Ref>
Field field(std::string section, std::string key, Ref ref) {
  return {std::move(section), std::move(key),
          [ref](const ExperimentConfig& c) {
            return format(ref(const_cast<ExperimentConfig&>(c)));
          },
          [ref](ExperimentConfig& c, const std::string& v) {
            parse_into(v, ref(c));
          }};
}

#define SAFERL_FIELD(section, key, expr) \
  field(section, key, [](ExperimentConfig& c) -> auto& { return expr; })

Field box_bound(std::string section, std::string key,
                ActionBox& (*box)(ExperimentConfig&), bool upper) {
  return {std::move(section), std::move(key),
          [box, upper](const ExperimentConfig& c) {
            const ActionBox& b = box(const_cast<ExperimentConfig&>(c));
            return format(upper ? b.upper.front() : b.lower.front());
          },
          [box, upper](ExperimentConfig& c, const std::string& v) {
            double x = 0.0;
            parse_into(v, x);
            ActionBox& b = box(c);
            for (double& e : upper ? b.upper : b.lower) e = x;
          }};
}

ActionBox& torque_box(ExperimentConfig& c) { return c.pendulum.cbf.torque_box; }
ActionBox& accel_box(ExperimentConfig& c) {
  return c.quadcopter.ecbf.accel_box;
}

const std::vector<Field>& registry() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    const std::string ex = "experiment";
    f.push_back({ex, "env",
                 [](const ExperimentConfig& c) { return to_string(c.env); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.env = parse_env(trim(v));
                 }});
    f.push_back({ex, "algorithm",
                 [](const ExperimentConfig& c) { return to_string(c.algorithm); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.algorithm = parse_algorithm(trim(v));
                 }});
    f.push_back(SAFERL_FIELD(ex, "replications", c.replications));
    f.push_back(SAFERL_FIELD(ex, "seeds", c.seeds));
    f.push_back(SAFERL_FIELD(ex, "base_seed", c.base_seed));
    f.push_back(SAFERL_FIELD(ex, "output_dir", c.output_dir));
    f.push_back(SAFERL_FIELD(ex, "iterations", c.iterations));
    f.push_back(SAFERL_FIELD(ex, "workers", c.workers));
    f.push_back(SAFERL_FIELD(ex, "record_wall_clock", c.record_wall_clock));
    f.push_back(SAFERL_FIELD(ex, "eval_interval", c.eval_interval));
    f.push_back(SAFERL_FIELD(ex, "eval_episodes", c.eval_episodes));
    f.push_back(SAFERL_FIELD(ex, "eval_seed", c.eval_seed));

    f.push_back(SAFERL_FIELD("policy", "hidden", c.policy_hidden));

    const std::string pe = "pendulum";
    f.push_back(SAFERL_FIELD(pe, "eta", c.pendulum.cbf.eta));
    f.push_back(SAFERL_FIELD(pe, "dt", c.pendulum.cbf.dt));
    f.push_back(SAFERL_FIELD(pe, "mass", c.pendulum.cbf.mass));
    f.push_back(SAFERL_FIELD(pe, "length", c.pendulum.cbf.length));
    f.push_back(SAFERL_FIELD(pe, "gravity", c.pendulum.cbf.gravity));
    f.push_back(SAFERL_FIELD(pe, "theta_bound", c.pendulum.cbf.theta_bound));
    f.push_back(box_bound(pe, "torque_min", torque_box, false));
    f.push_back(box_bound(pe, "torque_max", torque_box, true));
    f.push_back(SAFERL_FIELD(pe, "episode_length", c.pendulum.episode_length));
    f.push_back(SAFERL_FIELD(pe, "start_theta", c.pendulum.start.theta));
    f.push_back(SAFERL_FIELD(pe, "start_theta_dot", c.pendulum.start.theta_dot));
    f.push_back(SAFERL_FIELD(pe, "reset_speed", c.pendulum.reset_speed));

    const std::string q = "quadcopter";
    f.push_back(SAFERL_FIELD(q, "a", c.quadcopter.ecbf.a));
    f.push_back(SAFERL_FIELD(q, "b", c.quadcopter.ecbf.b));
    f.push_back(SAFERL_FIELD(q, "c", c.quadcopter.ecbf.c));
    f.push_back(SAFERL_FIELD(q, "r_s", c.quadcopter.ecbf.r_s));
    f.push_back(SAFERL_FIELD(q, "k1", c.quadcopter.ecbf.k1));
    f.push_back(SAFERL_FIELD(q, "k2", c.quadcopter.ecbf.k2));
    f.push_back(SAFERL_FIELD(q, "obstacle", c.quadcopter.ecbf.r_obs));
    f.push_back(box_bound(q, "accel_min", accel_box, false));
    f.push_back(box_bound(q, "accel_max", accel_box, true));
    f.push_back(SAFERL_FIELD(q, "dt", c.quadcopter.ecbf.dt));
    f.push_back(SAFERL_FIELD(q, "goal", c.quadcopter.world.r_goal));
    f.push_back(SAFERL_FIELD(q, "r_min", c.quadcopter.world.r_min));
    f.push_back(SAFERL_FIELD(q, "r_max", c.quadcopter.world.r_max));
    f.push_back(SAFERL_FIELD(q, "eps_goal", c.quadcopter.world.eps_goal));
    f.push_back(SAFERL_FIELD(q, "goal_bonus", c.quadcopter.world.goal_bonus));
    f.push_back(SAFERL_FIELD(q, "boundary_penalty",
                             c.quadcopter.world.boundary_penalty));
    f.push_back(SAFERL_FIELD(q, "start", c.quadcopter.start));
    f.push_back(SAFERL_FIELD(q, "episode_length", c.quadcopter.episode_length));

    const std::string rpg = "safe_rpg";
    f.push_back({rpg, "policy",
                 [](const ExperimentConfig& c) -> std::string {
                   return c.safe_rpg_policy == SafeRpgPolicy::kBeta
                              ? "beta"
                              : "gaussian_truncated";
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   const std::string s = trim(v);
                   if (s == "beta") {
                     c.safe_rpg_policy = SafeRpgPolicy::kBeta;
                   } else if (s == "gaussian_truncated") {
                     c.safe_rpg_policy = SafeRpgPolicy::kGaussianTruncated;
                   } else {
                     throw ConfigError("safe_rpg.policy must be beta or "
                                       "gaussian_truncated, got '" + s + "'");
                   }
                 }});
    f.push_back(SAFERL_FIELD(rpg, "gamma", c.safe_rpg.gamma));
    f.push_back(SAFERL_FIELD(rpg, "alpha0", c.safe_rpg.alpha0));
    f.push_back(SAFERL_FIELD(rpg, "stepsize_decay", c.safe_rpg.stepsize_decay));
    f.push_back(SAFERL_FIELD(rpg, "mc_samples", c.safe_rpg.mc_samples));
    f.push_back(SAFERL_FIELD(rpg, "max_iterations", c.safe_rpg.max_iterations));
    f.push_back(SAFERL_FIELD(rpg, "plateau_stop", c.safe_rpg.plateau_stop));
    f.push_back(SAFERL_FIELD(rpg, "plateau_window", c.safe_rpg.plateau_window));
    f.push_back(SAFERL_FIELD(rpg, "plateau_tol", c.safe_rpg.plateau_tol));
    f.push_back(SAFERL_FIELD(rpg, "max_rejection_attempts",
                             c.safe_rpg.max_rejection_attempts));

    const std::string pp = "ppo";
    f.push_back(SAFERL_FIELD(pp, "policy_lr", c.ppo.policy_lr));
    f.push_back(SAFERL_FIELD(pp, "value_lr", c.ppo.value_lr));
    f.push_back(SAFERL_FIELD(pp, "clip_range", c.ppo.clip_range));
    f.push_back(SAFERL_FIELD(pp, "entropy_coef", c.ppo.entropy_coef));
    f.push_back(SAFERL_FIELD(pp, "batch_size", c.ppo.batch_size));
    f.push_back(SAFERL_FIELD(pp, "buffer_size", c.ppo.buffer_size));
    f.push_back(SAFERL_FIELD(pp, "n_epochs", c.ppo.n_epochs));
    f.push_back(SAFERL_FIELD(pp, "gamma", c.ppo.gamma));
    f.push_back(SAFERL_FIELD(pp, "max_grad_norm", c.ppo.max_grad_norm));
    f.push_back(SAFERL_FIELD(pp, "normalize_advantages",
                             c.ppo.normalize_advantages));
    f.push_back(SAFERL_FIELD(pp, "reward_scale", c.ppo.reward_scale));
    f.push_back(SAFERL_FIELD(pp, "value_hidden", c.ppo.value_hidden));
    return f;
  }();
  return fields;
}

#undef SAFERL_FIELD

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : registry()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

// ------------------------------------------------------------ defaults --

ExperimentConfig default_config(EnvKind env, Algorithm algorithm) {
  ExperimentConfig c;
  c.env = env;
  c.algorithm = algorithm;
  const bool beta = algorithm == Algorithm::kPpoBeta;
  if (env == EnvKind::kPendulum) {
    c.replications = 5;
    c.iterations = 500;  // 150k steps at 300 steps per rollout
    c.policy_hidden = {64, 64};
    c.ppo.policy_lr = c.ppo.value_lr = beta ? 0.01 : 3e-4;
    c.ppo.entropy_coef = 0.0;
    c.ppo.batch_size = 64;
    c.ppo.buffer_size = 300;
    c.ppo.gamma = 0.99;
    c.ppo.value_hidden = {64, 64};
  } else {
    c.replications = 6;
    c.iterations = 100;
    c.policy_hidden = {256, 256};
    c.ppo.policy_lr = c.ppo.value_lr = beta ? 6e-4 : 4e-4;
    c.ppo.entropy_coef = beta ? 0.0 : 1e-8;
    c.ppo.batch_size = 256;
    c.quadcopter.episode_length = beta ? 180 : 320;
    // One episode per update leaves the advantage estimates too noisy to
    // learn from; ten episodes with normalized, rescaled returns do.
    c.ppo.buffer_size = 10 * c.quadcopter.episode_length;
    c.ppo.normalize_advantages = true;
    c.ppo.reward_scale = 0.01;
    c.ppo.gamma = 0.9;
    c.ppo.value_hidden = {256, 256};
  }
  c.ppo.clip_range = 0.2;
  c.ppo.n_epochs = 10;
  if (algorithm == Algorithm::kSafeRpg) {
    c.iterations = c.safe_rpg.max_iterations;
  }
  return c;
}

// ---------------------------------------------------------- validation --

std::uint64_t ExperimentConfig::seed_for(std::size_t replication) const {
  if (!seeds.empty()) return seeds.at(replication);
  return base_seed + replication;
}

void ExperimentConfig::validate() const {
  if (replications == 0) {
    throw ConfigError("experiment.replications must be >= 1");
  }
  if (!seeds.empty() && seeds.size() < replications) {
    throw ConfigError("experiment.seeds lists " + std::to_string(seeds.size()) +
                      " seeds for " + std::to_string(replications) +
                      " replications");
  }
  if (output_dir.empty()) throw ConfigError("experiment.output_dir is empty");
  if (iterations == 0) throw ConfigError("experiment.iterations must be >= 1");
  if (workers == 0) throw ConfigError("experiment.workers must be >= 1");
  if (eval_interval == 0) {
    throw ConfigError("experiment.eval_interval must be >= 1");
  }
  if (eval_episodes == 0) {
    throw ConfigError("experiment.eval_episodes must be >= 1");
  }
  for (std::size_t h : policy_hidden) {
    if (h == 0) throw ConfigError("policy.hidden sizes must be >= 1");
  }
  if (algorithm == Algorithm::kSafeRpg) {
    safe_rpg.validate();
  } else {
    ppo.validate();
  }
  try {
    if (env == EnvKind::kPendulum) {
      pendulum.cbf.validate();
      if (pendulum.episode_length == 0) {
        throw ConfigError("pendulum.episode_length must be >= 1");
      }
      if (!(pendulum.reset_speed >= 0.0)) {
        throw ConfigError("pendulum.reset_speed must be >= 0");
      }
      if (std::abs(pendulum.start.theta) > pendulum.cbf.theta_bound) {
        throw ConfigError("pendulum.start_theta lies outside the safe set");
      }
    } else {
      if (quadcopter.episode_length == 0) {
        throw ConfigError("quadcopter.episode_length must be >= 1");
      }
    }
    (void)make_environment(*this);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid environment parameters: ") +
                      e.what());
  }
}

std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg) {
  if (cfg.env == EnvKind::kPendulum) {
    return std::make_unique<PendulumEnv>(cfg.pendulum);
  }
  return std::make_unique<QuadcopterEnv>(cfg.quadcopter);
}

// ------------------------------------------------------------- parsing --

ExperimentConfig parse_config(std::istream& in) {
  std::ostringstream cleaned;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.starts_with('#') || t.starts_with(';')) continue;
    cleaned << line << '\n';
  }
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream text(cleaned.str());
    pt::ini_parser::read_ini(text, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  EnvKind env = EnvKind::kPendulum;
  Algorithm algorithm = Algorithm::kPpoBeta;
  if (auto v = tree.get_optional<std::string>("experiment.env")) {
    env = parse_env(trim(*v));
  }
  if (auto v = tree.get_optional<std::string>("experiment.algorithm")) {
    algorithm = parse_algorithm(trim(*v));
  }
  ExperimentConfig cfg = default_config(env, algorithm);

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("key '" + section + "' appears outside a section");
    }
    for (const auto& [key, value] : body) {
      const Field* f = find_field(section, key);
      if (!f) throw ConfigError("unknown key " + section + "." + key);
      try {
        f->set(cfg, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError(section + "." + key + ": " + e.what());
      }
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string current;
  for (const Field& f : registry()) {
    if (f.section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << f.section << "]\n";
      current = f.section;
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

}  // namespace saferl
