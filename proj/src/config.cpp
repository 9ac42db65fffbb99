#include "paf/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "paf/common.hpp"

namespace paf {

EnvConfig ExperimentConfig::env_config() const {
  EnvConfig env;
  env.vehicle = vehicle;
  env.reward = reward;
  env.dt = dt;
  env.max_steps = max_steps;
  env.obs_clamp = obs_clamp;
  env.lookahead_step = lookahead_step;
  env.progress_hysteresis = progress_hysteresis;
  return env;
}

void ExperimentConfig::override_seeds(std::uint64_t seed) {
  env_seed = seed;
  ppo.seed = seed;
  autoencoder.seed = seed;
  distill.seed = seed;
  collect_seed = seed;
  eval_seed = seed;
}

void ExperimentConfig::validate() const {
  env_kind_from_string(env_kind);  // throws on unknown kind
  reward.validate();
  camera.validate();
  if (!(scale > 0.0)) throw ConfigError("environment.scale", "must be positive");
  if (!(dt > 0.0)) throw ConfigError("env.dt", "must be positive");
  if (max_steps < 1) throw ConfigError("env.max_steps", "must be >= 1");
  if (vehicle.mass <= 0.0) throw ConfigError("vehicle.mass", "must be positive");
  const double ratio = vehicle.thrust_to_weight();
  if (std::abs(ratio - 6.0) > 0.6) {
    throw ConfigError("vehicle.max_thrust",
                      "thrust-to-weight must stay within 10% of 6:1, got " + fmt_f64(ratio));
  }
  if (ppo.num_envs < 1 || ppo.steps_per_env < 1) {
    throw ConfigError("ppo.num_envs", "num_envs and steps_per_env must be >= 1");
  }
  if ((ppo.num_envs * ppo.steps_per_env) % ppo.minibatch != 0) {
    throw ConfigError("ppo.minibatch", "must divide num_envs*steps_per_env");
  }
}

namespace {

struct Field {
  std::string doc;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

using FieldMap = std::map<std::string, Field>;  // "section.key" -> field

template <typename T>
T parse_value(const std::string& key, const std::string& value);

template <>
double parse_value<double>(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "not a number: '" + value + "'");
  }
}

template <>
float parse_value<float>(const std::string& key, const std::string& value) {
  return static_cast<float>(parse_value<double>(key, value));
}

template <>
int parse_value<int>(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "not an integer: '" + value + "'");
  }
}

template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "not an unsigned integer: '" + value + "'");
  }
}

template <>
std::string parse_value<std::string>(const std::string& key, const std::string& value) {
  (void)key;
  return value;
}

template <>
bool parse_value<bool>(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key, "not a boolean: '" + value + "'");
}

template <typename T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return fmt_f64(static_cast<double>(v));
  } else {
    return std::to_string(v);
  }
}

const FieldMap& fields() {
  static const FieldMap map = [] {
    FieldMap m;
    const auto add = [&m](const std::string& name, auto member_ptr, const std::string& doc) {
      using T = std::decay_t<decltype(std::declval<ExperimentConfig>().*member_ptr)>;
      m.emplace(name, Field{doc,
                            [name, member_ptr](ExperimentConfig& c, const std::string& v) {
                              c.*member_ptr = parse_value<T>(name, v);
                            },
                            [member_ptr](const ExperimentConfig& c) {
                              return show(c.*member_ptr);
                            }});
    };
    const auto add_sub = [&m](const std::string& name, auto outer, auto inner,
                              const std::string& doc) {
      using T = std::decay_t<decltype(std::declval<ExperimentConfig>().*outer.*inner)>;
      m.emplace(name, Field{doc,
                            [name, outer, inner](ExperimentConfig& c, const std::string& v) {
                              c.*outer.*inner = parse_value<T>(name, v);
                            },
                            [outer, inner](const ExperimentConfig& c) {
                              return show(c.*outer.*inner);
                            }});
    };

    add("environment.kind", &ExperimentConfig::env_kind,
        "columns | office | racing | racing_mw");
    add("environment.seed", &ExperimentConfig::env_seed, "environment generation seed");
    add("environment.scale", &ExperimentConfig::scale, "arena side length, m");
    add("environment.density", &ExperimentConfig::density, "clutter density multiplier");

    add_sub("vehicle.mass", &ExperimentConfig::vehicle, &VehicleParams::mass, "kg");
    add_sub("vehicle.gravity", &ExperimentConfig::vehicle, &VehicleParams::gravity, "m/s^2");
    add_sub("vehicle.max_thrust", &ExperimentConfig::vehicle, &VehicleParams::max_thrust, "N");
    add_sub("vehicle.max_body_rate", &ExperimentConfig::vehicle, &VehicleParams::max_body_rate,
            "rad/s per axis");
    add_sub("vehicle.body_rate_tau", &ExperimentConfig::vehicle, &VehicleParams::body_rate_tau,
            "s, body-rate tracking lag");
    add_sub("vehicle.collision_radius", &ExperimentConfig::vehicle,
            &VehicleParams::collision_radius, "m");

    add_sub("camera.width", &ExperimentConfig::camera, &CameraIntrinsics::width, "pixels");
    add_sub("camera.height", &ExperimentConfig::camera, &CameraIntrinsics::height, "pixels");
    add_sub("camera.hfov", &ExperimentConfig::camera, &CameraIntrinsics::hfov,
            "horizontal field of view, rad");
    add_sub("camera.max_range", &ExperimentConfig::camera, &CameraIntrinsics::max_range, "m");

    add_sub("reward.k_p", &ExperimentConfig::reward, &RewardWeights::k_p, "progress weight");
    add_sub("reward.k_s", &ExperimentConfig::reward, &RewardWeights::k_s,
            "terminal reached-distance weight");
    add_sub("reward.k_wp", &ExperimentConfig::reward, &RewardWeights::k_wp, "waypoint bonus");
    add_sub("reward.r_T", &ExperimentConfig::reward, &RewardWeights::r_T,
            "collision penalty, negative");
    add_sub("reward.k_omega", &ExperimentConfig::reward, &RewardWeights::k_omega,
            "body-rate penalty weight, <= 0");
    add_sub("reward.k_pa", &ExperimentConfig::reward, &RewardWeights::k_pa,
            "perception alignment weight");

    add("env.dt", &ExperimentConfig::dt, "control interval, s");
    add("env.max_steps", &ExperimentConfig::max_steps, "episode step limit");
    add("env.obs_clamp", &ExperimentConfig::obs_clamp, "relative-vector clamp, m");
    add("env.lookahead_step", &ExperimentConfig::lookahead_step,
        "lookahead discretization, m");
    add("env.progress_hysteresis", &ExperimentConfig::progress_hysteresis,
        "max projection backtrack, m");

    add_sub("ppo.num_envs", &ExperimentConfig::ppo, &PpoConfig::num_envs, "parallel envs");
    add_sub("ppo.steps_per_env", &ExperimentConfig::ppo, &PpoConfig::steps_per_env,
            "rollout steps per env per iteration");
    add_sub("ppo.epochs", &ExperimentConfig::ppo, &PpoConfig::epochs, "update epochs");
    add_sub("ppo.minibatch", &ExperimentConfig::ppo, &PpoConfig::minibatch, "minibatch size");
    add_sub("ppo.discount", &ExperimentConfig::ppo, &PpoConfig::discount, "gamma");
    add_sub("ppo.gae_lambda", &ExperimentConfig::ppo, &PpoConfig::gae_lambda, "GAE lambda");
    add_sub("ppo.clip", &ExperimentConfig::ppo, &PpoConfig::clip, "surrogate clip epsilon");
    add_sub("ppo.lr", &ExperimentConfig::ppo, &PpoConfig::lr, "Adam learning rate");
    add_sub("ppo.entropy_coef", &ExperimentConfig::ppo, &PpoConfig::entropy_coef,
            "entropy bonus weight");
    add_sub("ppo.value_coef", &ExperimentConfig::ppo, &PpoConfig::value_coef,
            "value loss weight");
    add_sub("ppo.max_grad_norm", &ExperimentConfig::ppo, &PpoConfig::max_grad_norm,
            "gradient clip");
    add_sub("ppo.normalize_advantages", &ExperimentConfig::ppo,
            &PpoConfig::normalize_advantages, "per-minibatch advantage normalization");
    add_sub("ppo.init_log_std", &ExperimentConfig::ppo, &PpoConfig::init_log_std,
            "initial exploration log-std");
    add_sub("ppo.iterations", &ExperimentConfig::ppo, &PpoConfig::iterations,
            "training iterations");
    add_sub("ppo.eval_every", &ExperimentConfig::ppo, &PpoConfig::eval_every,
            "gating-eval cadence, iterations");
    add_sub("ppo.eval_runs", &ExperimentConfig::ppo, &PpoConfig::eval_runs,
            "episodes per gating eval");
    add_sub("ppo.stop_success_pct", &ExperimentConfig::ppo, &PpoConfig::stop_success_pct,
            "early-stop threshold at full difficulty, 0 disables");
    add_sub("ppo.seed", &ExperimentConfig::ppo, &PpoConfig::seed, "training seed");

    add_sub("curriculum.speed_cap_start", &ExperimentConfig::curriculum,
            &CurriculumConfig::speed_cap_start, "stage-1 speed cap, m/s");
    add_sub("curriculum.speed_mult", &ExperimentConfig::curriculum,
            &CurriculumConfig::speed_mult, "speed cap multiplier per stage");
    add_sub("curriculum.speed_uncap_at", &ExperimentConfig::curriculum,
            &CurriculumConfig::speed_uncap_at, "cap at/above this disables the cap");
    add_sub("curriculum.density_start", &ExperimentConfig::curriculum,
            &CurriculumConfig::density_start, "stage-1 obstacle density");
    add_sub("curriculum.density_mult", &ExperimentConfig::curriculum,
            &CurriculumConfig::density_mult, "density multiplier per stage");
    add_sub("curriculum.advance_success_pct", &ExperimentConfig::curriculum,
            &CurriculumConfig::advance_success_pct, "stage advance threshold");

    add_sub("autoencoder.embedding_dim", &ExperimentConfig::autoencoder,
            &AutoencoderConfig::embedding_dim, "latent dimension");
    add_sub("autoencoder.epochs", &ExperimentConfig::autoencoder, &AutoencoderConfig::epochs,
            "training epochs");
    add_sub("autoencoder.minibatch", &ExperimentConfig::autoencoder,
            &AutoencoderConfig::minibatch, "minibatch size");
    add_sub("autoencoder.lr", &ExperimentConfig::autoencoder, &AutoencoderConfig::lr,
            "Adam learning rate");
    add_sub("autoencoder.seed", &ExperimentConfig::autoencoder, &AutoencoderConfig::seed,
            "init and shuffle seed");

    add_sub("distill.rounds", &ExperimentConfig::distill, &DistillConfig::rounds,
            "aggregation rounds (round 0 = teacher rollouts)");
    add_sub("distill.episodes_per_round", &ExperimentConfig::distill,
            &DistillConfig::episodes_per_round, "rollout episodes per round");
    add_sub("distill.epochs_per_round", &ExperimentConfig::distill,
            &DistillConfig::epochs_per_round, "fit epochs per round");
    add_sub("distill.minibatch", &ExperimentConfig::distill, &DistillConfig::minibatch,
            "minibatch size");
    add_sub("distill.lr", &ExperimentConfig::distill, &DistillConfig::lr, "Adam learning rate");
    add_sub("distill.val_fraction", &ExperimentConfig::distill, &DistillConfig::val_fraction,
            "held-out fraction of aggregated data");
    add_sub("distill.heldout_episodes", &ExperimentConfig::distill,
            &DistillConfig::heldout_episodes, "fresh episodes for the shift metric");
    add_sub("distill.final_eval_runs", &ExperimentConfig::distill,
            &DistillConfig::final_eval_runs, "success check runs, 0 disables");
    add_sub("distill.seed", &ExperimentConfig::distill, &DistillConfig::seed, "seed");

    add("collect.episodes", &ExperimentConfig::collect_episodes, "teacher rollout episodes");
    add("collect.val_fraction", &ExperimentConfig::collect_val_fraction,
        "validation split fraction");
    add("collect.seed", &ExperimentConfig::collect_seed, "rollout seed");

    add("eval.runs", &ExperimentConfig::eval_runs, "evaluation episodes");
    add("eval.seed", &ExperimentConfig::eval_seed, "evaluation seed");

    add("latency.frames", &ExperimentConfig::latency_frames, "timed frames");
    add("latency.warmup", &ExperimentConfig::latency_warmup, "warm-up frames, untimed");

    add("output.dir", &ExperimentConfig::out_dir, "run directory root");
    return m;
  }();
  return map;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no), "malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = fields().find(full);
    if (it == fields().end()) throw ConfigError(full, "unknown key");
    it->second.set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError(file.string(), "cannot open config file");
  return parse_config(is);
}

void write_resolved_config(const ExperimentConfig& cfg, std::ostream& os) {
  std::string section;
  for (const auto& [name, field] : fields()) {
    const auto dot = name.find('.');
    const std::string sec = name.substr(0, dot);
    const std::string key = name.substr(dot + 1);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << key << " = " << field.get(cfg) << "  # " << field.doc << '\n';
  }
}

}  // namespace paf
