#pragma once

#include <cstdint>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <type_traits>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cadiff/agent.hpp"
#include "cadiff/envs.hpp"

namespace cadiff {

/// Malformed or inconsistent configuration (CLI exit status 3).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Ablations {
  bool no_bisim = false;
  bool no_reward_denoise = false;
  bool no_obs_denoise = false;

  bool all_off() const { return no_bisim && no_reward_denoise && no_obs_denoise; }
  bool any() const { return no_bisim || no_reward_denoise || no_obs_denoise; }

  std::string str() const {
    std::string s;
    auto add = [&s](bool on, const char* n) {
      if (!on) return;
      if (!s.empty()) s += ',';
      s += n;
    };
    add(no_bisim, "no_bisim");
    add(no_reward_denoise, "no_reward_denoise");
    add(no_obs_denoise, "no_obs_denoise");
    return s.empty() ? "none" : s;
  }
};

/// Comma-separated ablation list; "none" or empty disables all.
inline Ablations parse_ablations(const std::string& text) {
  Ablations a;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, e - b + 1);
    if (item == "no_bisim") a.no_bisim = true;
    else if (item == "no_reward_denoise") a.no_reward_denoise = true;
    else if (item == "no_obs_denoise") a.no_obs_denoise = true;
    else if (item != "none") throw ConfigError("unknown ablation '" + item + "'");
  }
  return a;
}

/// Every knob of a training run. Keys of the text format are the snake_case
/// forms of the hyperparameter-table descriptions plus a few artifact keys.
struct RunConfig {
  // Hyperparameter table.
  int number_of_training_iterates = 600;  // epochs; see total_steps
  std::size_t size_of_replay_memory = 1000000;
  std::size_t number_of_samples_for_each_update = 64;
  double discount_factor = 0.99;
  double fraction_of_updating_the_target_network_per_gradient_step = 0.005;
  double learning_rate_for_the_policy_and_value_networks = 3e-4;
  double learning_rate_for_the_entropy_coefficient_in_sac = 3e-4;
  double target_entropy_in_sac = 0.2;
  double learning_rate_of_the_asynchronous_diffusion_model = 3e-4;
  double learning_rate_of_the_bisimulation_metric_learning = 3e-4;
  int total_diffusion_step = 500;
  std::string beta_schedule = "linear";
  int noise_intensity_of_observation_and_reward = 2;

  // Target entropy interpretation: "standard" (-action_dim) or "literal".
  std::string target_entropy_mode = "standard";
  double initial_temperature = 1.0;

  // Diffusion details.
  double beta_min = 1e-4;
  double beta_max = 2e-2;
  int early_stopping_step = 1;
  double guidance_weight = 1.0;
  std::size_t adm_hidden = 64;
  std::size_t adm_embedding = 32;
  double adm_data_scale = 1.0;

  // Bisimulation weights (oracle suites).
  double c_r = 0.4;
  double c_s = 0.5;

  // Encoder.
  std::size_t history_window = 8;
  std::size_t causal_state_dim = 4;
  std::size_t encoder_hidden = 64;
  std::size_t sac_hidden = 64;

  // Environment.
  std::string env = "point_mass";
  std::string obs_mode = "positions_only";
  double noise_scale = 0.5;
  int episode_cap = 200;
  double k_spring = 0.0;

  // Schedule.
  long total_steps = 20000;
  long steps_per_epoch = 1000;
  long warmup_steps = 1000;
  int eval_episodes = 10;
  int final_return_window = 5;
  long checkpoint_every = 0;  // 0: only at the end
  std::uint64_t seed = 0;
  Ablations ablate;

  EnvConfig env_config(std::uint64_t env_seed) const {
    EnvConfig e;
    if (env != "point_mass") throw ConfigError("only env = point_mass can be trained (got '" + env + "')");
    e.kind = EnvKind::point_mass;
    try {
      e.obs_mode = parse_obs_mode(obs_mode);
    } catch (const Error& err) {
      throw ConfigError(err.what());
    }
    e.noise_scale = noise_scale;
    e.episode_cap = episode_cap;
    e.k_spring = k_spring;
    e.seed = env_seed;
    return e;
  }

  SacConfig sac_config(std::size_t state_dim) const {
    SacConfig s;
    s.state_dim = state_dim;
    s.action_dim = PointMassEnv::action_dim;
    s.hidden = sac_hidden;
    s.gamma = discount_factor;
    s.tau = fraction_of_updating_the_target_network_per_gradient_step;
    s.actor_lr = s.critic_lr = learning_rate_for_the_policy_and_value_networks;
    s.alpha_lr = learning_rate_for_the_entropy_coefficient_in_sac;
    s.init_alpha = initial_temperature;
    s.target_entropy = target_entropy_in_sac;
    s.entropy_mode = target_entropy_mode == "literal" ? TargetEntropyMode::literal : TargetEntropyMode::standard;
    return s;
  }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError("config: " + what);
    };
    need(number_of_training_iterates > 0, "number_of_training_iterates must be positive");
    need(size_of_replay_memory >= number_of_samples_for_each_update, "replay memory smaller than one batch");
    need(number_of_samples_for_each_update > 0, "batch size must be positive");
    need(discount_factor >= 0 && discount_factor < 1, "discount_factor must be in [0,1)");
    need(fraction_of_updating_the_target_network_per_gradient_step >= 0 &&
             fraction_of_updating_the_target_network_per_gradient_step <= 1,
         "target update fraction must be in [0,1]");
    need(learning_rate_for_the_policy_and_value_networks > 0 && learning_rate_for_the_entropy_coefficient_in_sac >= 0 &&
             learning_rate_of_the_asynchronous_diffusion_model > 0 && learning_rate_of_the_bisimulation_metric_learning > 0,
         "learning rates must be positive");
    need(beta_schedule == "linear", "beta_schedule must be linear");
    need(target_entropy_mode == "standard" || target_entropy_mode == "literal",
         "target_entropy_mode must be standard or literal");
    need(total_diffusion_step >= 2, "total_diffusion_step must be at least 2");
    need(early_stopping_step >= 1 && early_stopping_step <= noise_intensity_of_observation_and_reward &&
             noise_intensity_of_observation_and_reward < total_diffusion_step,
         "need 1 <= early_stopping_step <= noise intensity < total_diffusion_step");
    need(0 < beta_min && beta_min <= beta_max && beta_max < 1, "need 0 < beta_min <= beta_max < 1");
    need(guidance_weight >= 0, "guidance_weight must be >= 0");
    need(adm_data_scale > 0, "adm_data_scale must be positive");
    need(c_r > 0 && c_s > 0 && c_r + c_s < 1, "need c_r, c_s > 0 and c_r + c_s < 1");
    need(history_window > 0 && causal_state_dim > 0 && encoder_hidden > 0 && sac_hidden > 0 && adm_hidden > 0,
         "network sizes must be positive");
    need(adm_embedding > 0 && adm_embedding % 2 == 0, "adm_embedding must be positive and even");
    need(noise_scale >= 0, "noise_scale must be >= 0");
    need(episode_cap > 0, "episode_cap must be positive");
    need(total_steps >= 0, "total_steps must be >= 0");
    need(steps_per_epoch > 0, "steps_per_epoch must be positive");
    need(warmup_steps >= 0, "warmup_steps must be >= 0");
    need(eval_episodes > 0, "eval_episodes must be positive");
    need(final_return_window > 0, "final_return_window must be positive");
    need(checkpoint_every >= 0, "checkpoint_every must be >= 0");
    env_config(0).validate();
  }
};

namespace detail {

struct ConfigField {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  is >> v;
  if (!is || !(is >> std::ws).eof()) throw ConfigError("config: bad value '" + text + "' for key '" + key + "'");
  return v;
}

template <>
inline std::string parse_value<std::string>(const std::string&, const std::string& text) {
  return text;
}

template <typename T>
std::string format_value(const T& v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <typename T>
ConfigField field(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& text) {
            // Integer keys accept scientific notation such as 1e6.
            if constexpr (std::is_integral_v<T>) {
              const double d = parse_value<double>("", text);
              if (d != std::floor(d) || d < static_cast<double>(std::numeric_limits<T>::min()) ||
                  d > static_cast<double>(std::numeric_limits<T>::max()))
                throw ConfigError("config: '" + text + "' is not an integer");
              c.*member = static_cast<T>(d);
            } else {
              c.*member = parse_value<T>("", text);
            }
          },
          [member](const RunConfig& c) { return format_value(c.*member); }};
}

inline const std::map<std::string, ConfigField>& config_fields() {
  static const std::map<std::string, ConfigField> fields = {
      {"number_of_training_iterates", field(&RunConfig::number_of_training_iterates)},
      {"size_of_replay_memory", field(&RunConfig::size_of_replay_memory)},
      {"number_of_samples_for_each_update", field(&RunConfig::number_of_samples_for_each_update)},
      {"discount_factor", field(&RunConfig::discount_factor)},
      {"fraction_of_updating_the_target_network_per_gradient_step",
       field(&RunConfig::fraction_of_updating_the_target_network_per_gradient_step)},
      {"learning_rate_for_the_policy_and_value_networks",
       field(&RunConfig::learning_rate_for_the_policy_and_value_networks)},
      {"learning_rate_for_the_entropy_coefficient_in_sac",
       field(&RunConfig::learning_rate_for_the_entropy_coefficient_in_sac)},
      {"target_entropy_in_sac", field(&RunConfig::target_entropy_in_sac)},
      {"learning_rate_of_the_asynchronous_diffusion_model",
       field(&RunConfig::learning_rate_of_the_asynchronous_diffusion_model)},
      {"learning_rate_of_the_bisimulation_metric_learning",
       field(&RunConfig::learning_rate_of_the_bisimulation_metric_learning)},
      {"total_diffusion_step", field(&RunConfig::total_diffusion_step)},
      {"beta_schedule", field(&RunConfig::beta_schedule)},
      {"noise_intensity_of_observation_and_reward", field(&RunConfig::noise_intensity_of_observation_and_reward)},
      {"target_entropy_mode", field(&RunConfig::target_entropy_mode)},
      {"initial_temperature", field(&RunConfig::initial_temperature)},
      {"beta_min", field(&RunConfig::beta_min)},
      {"beta_max", field(&RunConfig::beta_max)},
      {"early_stopping_step", field(&RunConfig::early_stopping_step)},
      {"guidance_weight", field(&RunConfig::guidance_weight)},
      {"adm_hidden", field(&RunConfig::adm_hidden)},
      {"adm_embedding", field(&RunConfig::adm_embedding)},
      {"adm_data_scale", field(&RunConfig::adm_data_scale)},
      {"c_r", field(&RunConfig::c_r)},
      {"c_s", field(&RunConfig::c_s)},
      {"history_window", field(&RunConfig::history_window)},
      {"causal_state_dim", field(&RunConfig::causal_state_dim)},
      {"encoder_hidden", field(&RunConfig::encoder_hidden)},
      {"sac_hidden", field(&RunConfig::sac_hidden)},
      {"env", field(&RunConfig::env)},
      {"obs_mode", field(&RunConfig::obs_mode)},
      {"noise_scale", field(&RunConfig::noise_scale)},
      {"episode_cap", field(&RunConfig::episode_cap)},
      {"k_spring", field(&RunConfig::k_spring)},
      {"total_steps", field(&RunConfig::total_steps)},
      {"steps_per_epoch", field(&RunConfig::steps_per_epoch)},
      {"warmup_steps", field(&RunConfig::warmup_steps)},
      {"eval_episodes", field(&RunConfig::eval_episodes)},
      {"final_return_window", field(&RunConfig::final_return_window)},
      {"checkpoint_every", field(&RunConfig::checkpoint_every)},
      {"seed", field(&RunConfig::seed)},
      {"ablate", {[](RunConfig& c, const std::string& v) { c.ablate = parse_ablations(v); },
                  [](const RunConfig& c) { return c.ablate.str(); }}},
  };
  return fields;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace detail

/// Applies one `key = value` assignment.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& fields = detail::config_fields();
  auto it = fields.find(key);
  if (it == fields.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second.set(cfg, value);
}

/// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
inline RunConfig parse_config(std::istream& is, RunConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const auto key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(is, std::move(base));
}

/// Full snapshot in the same text format (round-trips through parse_config).
inline std::string config_text(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [key, f] : detail::config_fields()) os << key << " = " << f.get(cfg) << '\n';
  return os.str();
}

}  // namespace cadiff
