#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "cadiff/bisim/mdp.hpp"
#include "cadiff/numerics/random.hpp"
#include "cadiff/numerics/tensor.hpp"

namespace cadiff {

enum class EnvKind { finite, point_mass };
enum class ObsMode { full, positions_only, velocities_only };

inline ObsMode parse_obs_mode(const std::string& s) {
  if (s == "full") return ObsMode::full;
  if (s == "positions_only" || s == "P") return ObsMode::positions_only;
  if (s == "velocities_only" || s == "V") return ObsMode::velocities_only;
  throw Error("unknown observation mode '" + s + "' (full, positions_only, velocities_only)");
}

inline const char* to_string(ObsMode m) {
  switch (m) {
    case ObsMode::full: return "full";
    case ObsMode::positions_only: return "positions_only";
    case ObsMode::velocities_only: return "velocities_only";
  }
  return "?";
}

struct EnvConfig {
  EnvKind kind = EnvKind::point_mass;
  ObsMode obs_mode = ObsMode::full;
  double noise_scale = 0.0;
  int episode_cap = 200;
  std::uint64_t seed = 0;

  // point mass
  double dt = 0.05;
  double k_spring = 0.0;
  double workspace = 2.0;    // reward normalization radius
  double wall = 1.75;        // positions are confined to this radius
  double start_inner = 1.25; // initial positions are drawn on the ring [inner, wall]
  double transition_std = 0.05;
  double reward_noise_factor = 0.1;

  // finite
  std::size_t n_states = 6;
  std::size_t n_actions = 3;

  void validate() const {
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw Error("env: noise_scale must be >= 0");
    if (episode_cap <= 0) throw Error("env: episode_cap must be positive");
    if (!(dt > 0.0)) throw Error("env: dt must be positive");
    if (!(wall > 0.0 && wall <= workspace)) throw Error("env: need 0 < wall <= workspace");
    if (!(start_inner >= 0.0 && start_inner <= wall)) throw Error("env: need 0 <= start_inner <= wall");
    if (kind == EnvKind::finite && (n_states < 2 || n_states > 12 || n_actions == 0))
      throw Error("env: finite POMDPs need 2..12 states and at least one action");
  }
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  std::vector<double> true_state;  // diagnostics only
};

/// Independent noise streams, so each noise factor can be re-drawn alone.
struct EnvStreams {
  Rng init, obs, reward, transition;

  static EnvStreams from_seed(std::uint64_t seed) {
    return {Rng(derive_seed(seed, 101)), Rng(derive_seed(seed, 102)), Rng(derive_seed(seed, 103)),
            Rng(derive_seed(seed, 104))};
  }
};

inline double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

/// 2-D point mass with state (px, py, vx, vy), actions in [-1,1]^2 and the
/// goal at the origin.
class PointMassEnv {
 public:
  static constexpr std::size_t state_dim = 4;
  static constexpr std::size_t action_dim = 2;

  explicit PointMassEnv(EnvConfig cfg) : cfg_(std::move(cfg)), streams_(EnvStreams::from_seed(cfg_.seed)) {
    cfg_.validate();
    if (cfg_.kind != EnvKind::point_mass) throw Error("PointMassEnv: config kind is not point_mass");
  }

  const EnvConfig& config() const { return cfg_; }
  EnvStreams& streams() { return streams_; }

  std::size_t obs_dim() const { return cfg_.obs_mode == ObsMode::full ? 4 : 2; }

  StepResult reset() {
    const double r = std::sqrt(uniform(streams_.init, cfg_.start_inner * cfg_.start_inner, cfg_.wall * cfg_.wall));
    const double phi = uniform(streams_.init, -M_PI, M_PI);
    state_ = {r * std::cos(phi), r * std::sin(phi), 0.0, 0.0};
    t_ = 0;
    done_ = false;
    StepResult out;
    out.observation = observe();
    out.reward = 0.0;
    out.true_state = state_;
    return out;
  }

  StepResult step(std::span<const double> action) {
    if (done_) throw Error("PointMassEnv: step after episode end; call reset()");
    if (state_.empty()) throw Error("PointMassEnv: step before reset()");
    if (action.size() != action_dim)
      throw Error(detail::concat("PointMassEnv: action has ", action.size(), " entries, expected 2"));
    double a[2];
    for (int i = 0; i < 2; ++i) {
      if (!std::isfinite(action[i])) throw Error("PointMassEnv: non-finite action");
      a[i] = std::clamp(action[i], -1.0, 1.0);
      if (a[i] != action[i]) ++clamped_;
    }
    double* s = state_.data();
    for (int i = 0; i < 2; ++i) {
      s[i] += cfg_.dt * s[2 + i];
      s[2 + i] += cfg_.dt * (a[i] - cfg_.k_spring * s[i]) + cfg_.transition_std * standard_normal(streams_.transition);
    }
    const double radius = std::hypot(s[0], s[1]);
    if (radius > cfg_.wall) {
      // Project onto the wall and drop the outward velocity component.
      const double nx = s[0] / radius, ny = s[1] / radius;
      s[0] = nx * cfg_.wall, s[1] = ny * cfg_.wall;
      const double out = s[2] * nx + s[3] * ny;
      if (out > 0) s[2] -= out * nx, s[3] -= out * ny;
    }
    StepResult res;
    const double eps = cfg_.noise_scale * cfg_.reward_noise_factor * standard_normal(streams_.reward);
    const double raw = shaped_reward() + eps;
    res.reward = clip01(raw);
    if (res.reward != raw) ++clipped_;
    ++steps_;
    ++t_;
    done_ = t_ >= cfg_.episode_cap;
    res.done = done_;
    res.observation = observe();
    res.true_state = state_;
    return res;
  }

  /// Noise-free part of the reward, 1 - |p| / workspace clipped to [0,1].
  double shaped_reward() const { return clip01(1.0 - std::hypot(state_[0], state_[1]) / cfg_.workspace); }

  const std::vector<double>& state() const { return state_; }
  void set_state(std::vector<double> s) {
    if (s.size() != state_dim) throw Error("PointMassEnv: state has 4 entries");
    state_ = std::move(s);
  }

  std::uint64_t clamped_actions() const { return clamped_; }
  std::uint64_t clipped_rewards() const { return clipped_; }
  std::uint64_t total_steps() const { return steps_; }

  std::vector<double> masked_state() const {
    switch (cfg_.obs_mode) {
      case ObsMode::full: return state_;
      case ObsMode::positions_only: return {state_[0], state_[1]};
      case ObsMode::velocities_only: return {state_[2], state_[3]};
    }
    return state_;
  }

 private:
  std::vector<double> observe() {
    auto o = masked_state();
    for (auto& v : o) v += cfg_.noise_scale * standard_normal(streams_.obs);
    return o;
  }

  EnvConfig cfg_;
  EnvStreams streams_;
  std::vector<double> state_;
  int t_ = 0;
  bool done_ = false;
  std::uint64_t clamped_ = 0, clipped_ = 0, steps_ = 0;
};

/// Proportional-derivative controller toward the origin; the envs' reference
/// policy. Uses the true state.
inline std::vector<double> pd_controller(std::span<const double> s, double kp = 1.0, double kd = 1.5) {
  return {std::clamp(-kp * s[0] - kd * s[2], -1.0, 1.0), std::clamp(-kp * s[1] - kd * s[3], -1.0, 1.0)};
}

/// Observation channel of a finite POMDP: row s is P(o | s).
struct ObservationChannel {
  std::vector<std::vector<double>> rows;

  std::size_t sample(std::size_t s, Rng& rng) const {
    std::discrete_distribution<std::size_t> d(rows.at(s).begin(), rows.at(s).end());
    return d(rng);
  }
};

/// Discretized Gaussian confusion around the true index, width noise_scale *
/// n_states; the identity at noise_scale = 0.
inline ObservationChannel make_observation_channel(std::size_t n, double noise_scale) {
  ObservationChannel ch;
  ch.rows.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    if (noise_scale == 0.0) {
      ch.rows[s][s] = 1.0;
      continue;
    }
    const double w = noise_scale * static_cast<double>(n);
    double z = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
      const double d = (static_cast<double>(o) - static_cast<double>(s)) / w;
      z += ch.rows[s][o] = std::exp(-0.5 * d * d);
    }
    for (auto& v : ch.rows[s]) v /= z;
  }
  return ch;
}

struct FinitePomdp {
  FiniteMDP mdp;
  ObservationChannel channel;
};

inline FinitePomdp make_finite_pomdp(const EnvConfig& cfg, Rng& rng) {
  if (cfg.n_states < 2 || cfg.n_states > 12) throw Error("make_finite_pomdp: need 2..12 states");
  if (!(cfg.noise_scale >= 0.0)) throw Error("make_finite_pomdp: noise_scale must be >= 0");
  RandomMdpOptions opt;
  opt.max_states = cfg.n_states;
  opt.max_actions = cfg.n_actions;
  FinitePomdp out;
  out.mdp = random_finite_mdp(rng, opt);
  out.channel = make_observation_channel(out.mdp.n_states, cfg.noise_scale);
  return out;
}

/// Trajectory dump: step, s..., o..., a..., r, done.
class TrajectoryCsv {
 public:
  TrajectoryCsv(std::ostream& os, std::size_t s_dim, std::size_t o_dim, std::size_t a_dim)
      : os_(os), s_(s_dim), o_(o_dim), a_(a_dim) {
    os_ << "step";
    for (std::size_t i = 0; i < s_; ++i) os_ << ",s" << i;
    for (std::size_t i = 0; i < o_; ++i) os_ << ",o" << i;
    for (std::size_t i = 0; i < a_; ++i) os_ << ",a" << i;
    os_ << ",r,done\n";
    os_ << std::setprecision(17);
  }

  void row(long step, std::span<const double> s, std::span<const double> o, std::span<const double> a, double r,
           bool done) {
    if (s.size() != s_ || o.size() != o_ || a.size() != a_) throw Error("TrajectoryCsv: row width mismatch");
    os_ << step;
    for (double v : s) os_ << ',' << v;
    for (double v : o) os_ << ',' << v;
    for (double v : a) os_ << ',' << v;
    os_ << ',' << r << ',' << (done ? 1 : 0) << '\n';
  }

 private:
  std::ostream& os_;
  std::size_t s_, o_, a_;
};

}  // namespace cadiff
