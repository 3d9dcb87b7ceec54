#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cadiff/envs.hpp"
#include "cadiff/harness/config.hpp"
#include "cadiff/harness/metrics.hpp"
#include "cadiff/harness/pipeline.hpp"
#include "cadiff/harness/replay.hpp"

namespace cadiff {

/// Left-padded observation windows of the running episode.
class HistoryWindow {
 public:
  HistoryWindow(std::size_t window, std::size_t obs_dim) : window_(window), obs_dim_(obs_dim) {}

  void reset(const std::vector<double>& o) {
    history_.clear();
    previous_.assign(window_ * obs_dim_, 0.0);
    push(o);
    previous_.assign(window_ * obs_dim_, 0.0);
  }

  void push(const std::vector<double>& o) {
    if (o.size() != obs_dim_) throw Error("HistoryWindow: observation width mismatch");
    previous_ = current();
    history_.push_back(o);
    if (history_.size() > window_) history_.pop_front();
  }

  /// Window ending at the newest observation.
  std::vector<double> current() const {
    std::vector<double> row(window_ * obs_dim_, 0.0);
    std::size_t off = (window_ - history_.size()) * obs_dim_;
    for (const auto& o : history_) {
      std::copy(o.begin(), o.end(), row.begin() + static_cast<long>(off));
      off += obs_dim_;
    }
    return row;
  }

  /// Window ending one observation earlier (all zeros at episode start).
  const std::vector<double>& previous() const { return previous_; }

 private:
  std::size_t window_, obs_dim_;
  std::deque<std::vector<double>> history_;
  std::vector<double> previous_;
};

/// Policy interface used by rollouts: (window_prev, window, action_prev) -> action.
using WindowPolicy = std::function<std::vector<double>(const std::vector<double>&, const std::vector<double>&,
                                                       const std::vector<double>&)>;

struct ReturnStats {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> returns;
};

/// Rollouts on a fresh environment; never touches a replay buffer.
inline ReturnStats rollout_returns(const EnvConfig& env_cfg, std::size_t window, int episodes,
                                   const WindowPolicy& policy) {
  PointMassEnv env(env_cfg);
  ReturnStats st;
  HistoryWindow hist(window, env.obs_dim());
  for (int e = 0; e < episodes; ++e) {
    auto res = env.reset();
    hist.reset(res.observation);
    std::vector<double> a_prev(PointMassEnv::action_dim, 0.0);
    double ret = 0.0;
    while (!res.done) {
      auto a = policy(hist.previous(), hist.current(), a_prev);
      res = env.step(a);
      ret += res.reward;
      hist.push(res.observation);
      a_prev = a;
    }
    st.returns.push_back(ret);
  }
  for (double r : st.returns) st.mean += r;
  st.mean /= episodes;
  for (double r : st.returns) st.std += (r - st.mean) * (r - st.mean);
  st.std = std::sqrt(st.std / episodes);
  return st;
}

struct TrainResult {
  std::filesystem::path run_dir;
  std::vector<EpochMetrics> epochs;
  double final_return = 0.0;  // mean return_mean over the last final_return_window epochs
  double seconds = 0.0;
};

inline double final_return_of(const std::vector<EpochMetrics>& epochs, int window) {
  if (epochs.empty()) return 0.0;
  const std::size_t k = std::min<std::size_t>(epochs.size(), static_cast<std::size_t>(window));
  double s = 0.0;
  for (std::size_t i = epochs.size() - k; i < epochs.size(); ++i) s += epochs[i].return_mean;
  return s / static_cast<double>(k);
}

/// Progress callback: (epoch metrics) after every epoch.
using EpochCallback = std::function<void(const EpochMetrics&)>;

struct TrainOptions {
  EpochCallback on_epoch;
  bool check_routing = false;  // assert per-step parameter routing by checksums
  bool plain_sac = false;      // run the plain-SAC reference loop instead
};

namespace detail {

inline void prepare_run_dir(const std::filesystem::path& dir, const RunConfig& cfg) {
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / "metrics.jsonl");
  std::ofstream(dir / "config.txt") << config_text(cfg);
}

/// Thrown with the step index and component on any failure inside the loop.
[[noreturn]] inline void rethrow_at(long step, const char* component, const std::exception& e) {
  throw Error(detail::concat("train: step ", step, " (", component, "): ", e.what()));
}

struct EpochAccumulator {
  double state = 0, rew = 0, bs = 0, br = 0, actor = 0, critic = 0;
  long updates = 0;

  void add(const UpdateLosses& l) {
    state += l.loss_state, rew += l.loss_rew, bs += l.loss_bs, br += l.loss_br;
    actor += l.sac.actor_loss, critic += l.sac.critic_loss;
    ++updates;
  }

  EpochMetrics finish(long step, const ReturnStats& ret, double alpha) {
    const double n = updates > 0 ? static_cast<double>(updates) : 1.0;
    EpochMetrics m{step, ret.mean, ret.std, state / n, rew / n, bs / n, br / n, actor / n, critic / n, alpha};
    *this = {};
    return m;
  }
};

}  // namespace detail

/// Runs one update and asserts which parameter sets it changed: the
/// observation step may touch only theta and zeta, the reward step only phi
/// and zeta, SAC only its own sets; each enabled component must move.
inline UpdateLosses checked_update(CaDiffAgent& agent, const std::vector<const Transition*>& batch) {
  const auto before_theta = agent.theta().params.checksum(), before_phi = agent.phi().params.checksum();
  const auto before_zeta = agent.encoder().params().checksum(), before_sac = agent.sac().checksum();
  auto l = agent.update(batch);
  const auto& ab = agent.config().ablate;
  auto expect = [](bool changed, bool allowed, const char* name) {
    if (changed && !allowed) throw Error(detail::concat("routing: parameters of '", name, "' changed unexpectedly"));
    if (!changed && allowed) throw Error(detail::concat("routing: parameters of '", name, "' were not updated"));
  };
  expect(agent.theta().params.checksum() != before_theta, !ab.no_obs_denoise, "theta");
  expect(agent.phi().params.checksum() != before_phi, !ab.no_reward_denoise, "phi");
  expect(agent.encoder().params().checksum() != before_zeta, !ab.no_bisim, "zeta");
  expect(agent.sac().checksum() != before_sac, true, "sac");
  return l;
}

/// The CaDiff training loop (or, with opts.plain_sac, the reference SAC loop
/// on raw observations). Writes config.txt, metrics.jsonl and checkpoint/.
inline TrainResult train(const RunConfig& cfg, const std::filesystem::path& run_dir, const TrainOptions& opts = {}) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  // The reference loop is recorded as the all-ablations configuration it equals.
  RunConfig snapshot = cfg;
  if (opts.plain_sac) snapshot.ablate = {true, true, true};
  detail::prepare_run_dir(run_dir, snapshot);
  TrainResult result;
  result.run_dir = run_dir;
  if (cfg.total_steps == 0) return result;

  PointMassEnv env(cfg.env_config(derive_seed(cfg.seed, stream::env)));
  const EnvConfig eval_cfg = cfg.env_config(derive_seed(cfg.seed, stream::eval_env));
  const std::size_t obs_dim = env.obs_dim();
  Rng action_rng(derive_seed(cfg.seed, stream::action)), replay_rng(derive_seed(cfg.seed, stream::replay));
  ReplayBuffer replay(cfg.size_of_replay_memory);
  MetricsWriter metrics((run_dir / "metrics.jsonl").string());

  std::unique_ptr<CaDiffAgent> agent;
  std::unique_ptr<Sac> plain;
  Rng plain_update_rng(derive_seed(cfg.seed, stream::sac_update));
  if (opts.plain_sac) {
    Rng init(derive_seed(cfg.seed, stream::sac_init));
    plain = std::make_unique<Sac>(cfg.sac_config(obs_dim), init);
  } else {
    agent = std::make_unique<CaDiffAgent>(cfg, obs_dim);
  }
  const std::size_t H = cfg.history_window;
  auto last_obs = [obs_dim](const std::vector<double>& w) {
    return std::vector<double>(w.end() - static_cast<long>(obs_dim), w.end());
  };
  auto policy_for = [&](bool deterministic, Rng& rng) -> WindowPolicy {
    return [&, deterministic](const std::vector<double>& wp, const std::vector<double>& w,
                              const std::vector<double>& ap) {
      if (plain) return plain->select_action(last_obs(w), deterministic, rng);
      return agent->act(wp, w, ap, deterministic, rng);
    };
  };

  HistoryWindow hist(H, obs_dim);
  auto res = env.reset();
  hist.reset(res.observation);
  std::vector<double> a_prev(PointMassEnv::action_dim, 0.0);
  detail::EpochAccumulator acc;
  Rng eval_rng(0);  // unused: evaluation is deterministic
  auto explore = policy_for(false, action_rng);
  auto greedy = policy_for(true, eval_rng);

  for (long step = 0; step < cfg.total_steps; ++step) {
    const auto w_prev = hist.previous();
    const auto w = hist.current();
    std::vector<double> a;
    try {
      if (step < cfg.warmup_steps) {
        a.resize(PointMassEnv::action_dim);
        for (auto& v : a) v = uniform(action_rng, -1.0, 1.0);
      } else {
        a = explore(w_prev, w, a_prev);
      }
    } catch (const std::exception& e) {
      detail::rethrow_at(step, "policy", e);
    }
    StepResult next;
    try {
      next = env.step(a);
    } catch (const std::exception& e) {
      detail::rethrow_at(step, "env", e);
    }
    hist.push(next.observation);
    replay.push({w_prev, w, hist.current(), a_prev, a, next.reward, false});
    a_prev = a;
    if (next.done) {
      res = env.reset();
      hist.reset(res.observation);
      a_prev.assign(PointMassEnv::action_dim, 0.0);
    }

    if (step >= cfg.warmup_steps && replay.size() >= cfg.number_of_samples_for_each_update) {
      auto batch = replay.sample(cfg.number_of_samples_for_each_update, replay_rng);
      try {
        if (plain) {
          const auto m = ReplayMatrices::from(batch);
          Tensor o(m.window.rows(), obs_dim), o2(m.window.rows(), obs_dim);
          for (std::size_t r = 0; r < o.rows(); ++r)
            for (std::size_t j = 0; j < obs_dim; ++j) {
              o(r, j) = m.window(r, m.window.cols() - obs_dim + j);
              o2(r, j) = m.window_next(r, m.window.cols() - obs_dim + j);
            }
          UpdateLosses l;
          l.sac = plain->update({o, m.action, m.reward, o2, m.done}, plain_update_rng);
          acc.add(l);
        } else if (opts.check_routing) {
          acc.add(checked_update(*agent, batch));
        } else {
          acc.add(agent->update(batch));
        }
      } catch (const std::exception& e) {
        detail::rethrow_at(step, plain ? "sac" : "update", e);
      }
    }

    const long done_steps = step + 1;
    if (done_steps % cfg.steps_per_epoch == 0 || done_steps == cfg.total_steps) {
      ReturnStats ret;
      try {
        ret = rollout_returns(eval_cfg, H, cfg.eval_episodes, greedy);
      } catch (const std::exception& e) {
        detail::rethrow_at(step, "evaluation", e);
      }
      const double alpha = plain ? plain->alpha() : agent->sac().alpha();
      auto m = acc.finish(done_steps, ret, alpha);
      metrics.write(m);
      result.epochs.push_back(m);
      if (opts.on_epoch) opts.on_epoch(m);
    }
    if (!plain && cfg.checkpoint_every > 0 && done_steps % cfg.checkpoint_every == 0)
      agent->save(run_dir / "checkpoint");
  }
  if (plain) {
    CaDiffAgent equivalent(snapshot, obs_dim);
    equivalent.sac() = *plain;
    equivalent.save(run_dir / "checkpoint");
  } else {
    agent->save(run_dir / "checkpoint");
  }
  result.final_return = final_return_of(result.epochs, cfg.final_return_window);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Deterministic-policy evaluation of a saved run.
inline ReturnStats evaluate_run(const std::filesystem::path& run_dir, int episodes,
                                std::optional<std::uint64_t> seed = std::nullopt) {
  if (episodes <= 0) throw ConfigError("eval: episodes must be positive");
  const RunConfig cfg = load_config((run_dir / "config.txt").string());
  const EnvConfig env_cfg = cfg.env_config(seed ? *seed : derive_seed(cfg.seed, stream::eval_env));
  const std::size_t obs_dim = PointMassEnv(env_cfg).obs_dim();
  CaDiffAgent agent(cfg, obs_dim);
  try {
    agent.load(run_dir / "checkpoint");
  } catch (const Error& e) {
    throw Error(detail::concat("eval: checkpoint does not match the environment (", e.what(), ")"));
  }
  Rng unused(0);
  return rollout_returns(env_cfg, cfg.history_window, episodes,
                         [&](const std::vector<double>& wp, const std::vector<double>& w, const std::vector<double>& ap) {
                           return agent.act(wp, w, ap, true, unused);
                         });
}

}  // namespace cadiff
