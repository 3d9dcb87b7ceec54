#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cadiff/adm.hpp"
#include "cadiff/agent.hpp"
#include "cadiff/bisim/losses.hpp"
#include "cadiff/encoder.hpp"
#include "cadiff/harness/config.hpp"
#include "cadiff/harness/replay.hpp"
#include "cadiff/numerics/checkpoint.hpp"

namespace cadiff {

/// Seed streams shared by the CaDiff trainer and the plain-SAC reference, so
/// that switching every CaDiff component off reproduces the reference run.
namespace stream {
inline constexpr std::uint64_t env = 0, action = 1, replay = 2, sac_update = 3, sac_init = 4, encoder_init = 5,
                               theta_init = 6, phi_init = 7, adm = 8, eval_env = 10;
}

struct UpdateLosses {
  double loss_state = 0.0, loss_rew = 0.0, loss_bs = 0.0, loss_br = 0.0;
  SacReport sac;
};

/// Batch of replay records as dense matrices.
struct ReplayMatrices {
  Tensor window_prev, window, window_next, action_prev, action, reward, done;

  static ReplayMatrices from(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw Error("replay batch is empty");
    const auto& f = *batch.front();
    const std::size_t n = batch.size();
    ReplayMatrices m{Tensor(n, f.window.size()), Tensor(n, f.window.size()), Tensor(n, f.window.size()),
                     Tensor(n, f.action.size()),  Tensor(n, f.action.size()), Tensor(n, 1), Tensor(n, 1)};
    for (std::size_t i = 0; i < n; ++i) {
      const auto& t = *batch[i];
      std::copy(t.window_prev.begin(), t.window_prev.end(), m.window_prev.row_span(i).begin());
      std::copy(t.window.begin(), t.window.end(), m.window.row_span(i).begin());
      std::copy(t.window_next.begin(), t.window_next.end(), m.window_next.row_span(i).begin());
      std::copy(t.action_prev.begin(), t.action_prev.end(), m.action_prev.row_span(i).begin());
      std::copy(t.action.begin(), t.action.end(), m.action.row_span(i).begin());
      m.reward(i, 0) = t.reward;
      m.done(i, 0) = t.done ? 1.0 : 0.0;
    }
    return m;
  }
};

/// CaDiff on top of SAC: encoder zeta -> observation denoiser theta -> SAC,
/// with reward denoiser phi feeding the critic. Each ablation removes one
/// component: no_bisim replaces zeta by the current observation, the
/// denoise ablations pass their input through unchanged.
class CaDiffAgent {
 public:
  CaDiffAgent(const RunConfig& cfg, std::size_t obs_dim)
      : cfg_(cfg),
        ablate_(cfg.ablate),
        obs_dim_(obs_dim),
        schedule_(make_schedule(cfg.total_diffusion_step, cfg.beta_min, cfg.beta_max, cfg.early_stopping_step,
                                cfg.noise_intensity_of_observation_and_reward)),
        adm_rng_(derive_seed(cfg.seed, stream::adm)),
        sac_rng_(derive_seed(cfg.seed, stream::sac_update)) {
    cfg.validate();
    const std::size_t w_a = PointMassEnv::action_dim;
    x_dim_ = ablate_.no_bisim ? obs_dim : cfg.causal_state_dim;
    {
      Rng rng(derive_seed(cfg.seed, stream::encoder_init));
      encoder_ = Encoder("zeta", {obs_dim, cfg.causal_state_dim, w_a, cfg.encoder_hidden, cfg.history_window}, rng);
    }
    {
      Rng rng(derive_seed(cfg.seed, stream::theta_init));
      theta_ = ScoreNet("theta", {x_dim_, x_dim_ + w_a, cfg.adm_hidden, cfg.adm_embedding, cfg.adm_data_scale}, rng);
    }
    {
      Rng rng(derive_seed(cfg.seed, stream::phi_init));
      phi_ = ScoreNet("phi", {1, x_dim_ + w_a, cfg.adm_hidden, cfg.adm_embedding, cfg.adm_data_scale}, rng);
    }
    Rng rng(derive_seed(cfg.seed, stream::sac_init));
    sac_ = Sac(cfg.sac_config(x_dim_), rng);
  }

  const RunConfig& config() const { return cfg_; }
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t state_dim() const { return x_dim_; }
  std::size_t window_width() const { return cfg_.history_window * obs_dim_; }

  Encoder& encoder() { return encoder_; }
  ScoreNet& theta() { return theta_; }
  ScoreNet& phi() { return phi_; }
  Sac& sac() { return sac_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  /// Pre-denoising representation of [n, H*obs] windows: the encoder mean,
  /// or the newest observation under no_bisim.
  Tensor represent(const Tensor& windows) const {
    if (ablate_.no_bisim) return last_observation(windows);
    ad::Tape t;
    return encoder_.encode(t, windows, false).mean.value();
  }

  /// Observation-side causal state: theta denoises x guided by (x_prev, a_prev).
  Tensor denoise_state(const Tensor& x, const Tensor& x_prev, const Tensor& a_prev) const {
    if (ablate_.no_obs_denoise) return x;
    return denoise(x, guidance(x_prev, a_prev), theta_, schedule_, cfg_.guidance_weight);
  }

  Tensor denoise_reward(const Tensor& r, const Tensor& x, const Tensor& a) const {
    if (ablate_.no_reward_denoise) return r;
    return denoise(r, guidance(x, a), phi_, schedule_, cfg_.guidance_weight);
  }

  /// Denoised causal state for a single decision.
  std::vector<double> causal_state(std::span<const double> window_prev, std::span<const double> window,
                                   std::span<const double> action_prev) const {
    Tensor w(2, window.size());
    std::copy(window_prev.begin(), window_prev.end(), w.row_span(0).begin());
    std::copy(window.begin(), window.end(), w.row_span(1).begin());
    Tensor x = represent(w);
    Tensor x_prev = Tensor::row(x.row_span(0)), x_now = Tensor::row(x.row_span(1));
    return row_vector(denoise_state(x_now, x_prev, Tensor::row(action_prev)), 0);
  }

  std::vector<double> act(std::span<const double> window_prev, std::span<const double> window,
                          std::span<const double> action_prev, bool deterministic, Rng& rng) const {
    return sac_.select_action(causal_state(window_prev, window, action_prev), deterministic, rng);
  }

  /// One round of updates on a replay batch: (L_State + L_BS), then
  /// (L_Rew + L_BR), then SAC on (s_hat, a, r_hat, s_hat', done).
  UpdateLosses update(const std::vector<const Transition*>& batch) {
    const auto m = ReplayMatrices::from(batch);
    const std::size_t n = batch.size();
    UpdateLosses out;

    // Batch recomputation with the pre-update networks.
    Tensor x_prev, x, x_next, x_next_std;
    ad::Tape obs_tape;
    GaussianVar g_now;
    if (ablate_.no_bisim) {
      x_prev = last_observation(m.window_prev);
      x = last_observation(m.window);
      x_next = last_observation(m.window_next);
    } else {
      // The live encode of the current windows doubles as x: the encoder has
      // not been stepped yet, so its value equals a frozen evaluation.
      g_now = encoder_.encode(obs_tape, m.window);
      x = g_now.mean.value();
      ad::Tape t;
      auto g = encoder_.encode(t, stack(m.window_prev, m.window_next), false);
      const Tensor& mu = g.mean.value();
      const Tensor& sd = g.std.value();
      x_prev = rows_of(mu, 0, n);
      x_next = rows_of(mu, n, n);
      x_next_std = rows_of(sd, n, n);
    }
    const Tensor s_hat = denoise_state(x, x_prev, m.action_prev);
    const Tensor s_hat_next = denoise_state(x_next, x, m.action);
    const Tensor r_hat = denoise_reward(m.reward, x, m.action);
    const Tensor y = guidance(x, m.action);

    const AdamConfig adm_opt{cfg_.learning_rate_of_the_asynchronous_diffusion_model};
    const AdamConfig bisim_opt{cfg_.learning_rate_of_the_bisimulation_metric_learning};

    // Observation side: theta on L_State, zeta on L_BS.
    if (!ablate_.no_obs_denoise || !ablate_.no_bisim) {
      ad::Tape& t = obs_tape;
      std::vector<ad::Var> terms;
      if (!ablate_.no_obs_denoise) {
        Tensor x_in = x_next;
        if (!ablate_.no_bisim)
          for (std::size_t i = 0; i < x_in.size(); ++i) x_in.data[i] += x_next_std.data[i] * standard_normal(adm_rng_);
        auto b = make_adm_batch(x_in, y, theta_, schedule_, adm_rng_);
        terms.push_back(adm_loss(t, theta_, b, schedule_));
        out.loss_state = terms.back().item();
      }
      if (!ablate_.no_bisim) {
        auto pred = encoder_.predict_next(t, g_now.mean, t.constant(m.action));
        terms.push_back(loss_bs(pred.mean, pred.std, t.constant(s_hat_next), t.constant(x_next_std)));
        out.loss_bs = terms.back().item();
      }
      step(t, terms, !ablate_.no_obs_denoise ? &theta_.params : nullptr, adm_opt, bisim_opt);
    }
    // Reward side: phi on L_Rew, zeta on L_BR.
    if (!ablate_.no_reward_denoise || !ablate_.no_bisim) {
      ad::Tape t;
      std::vector<ad::Var> terms;
      if (!ablate_.no_reward_denoise) {
        auto b = make_adm_batch(m.reward, y, phi_, schedule_, adm_rng_);
        terms.push_back(adm_loss(t, phi_, b, schedule_));
        out.loss_rew = terms.back().item();
      }
      if (!ablate_.no_bisim) {
        auto g = encoder_.encode(t, m.window);
        auto pred = encoder_.predict_reward(t, g.mean, t.constant(m.action));
        terms.push_back(loss_br(pred.mean, pred.std, t.constant(r_hat), t.constant(Tensor(n, 1))));
        out.loss_br = terms.back().item();
      }
      step(t, terms, !ablate_.no_reward_denoise ? &phi_.params : nullptr, adm_opt, bisim_opt);
    }
    out.sac = sac_.update({s_hat, m.action, r_hat, s_hat_next, m.done}, sac_rng_);
    return out;
  }

  /// Parameter sets in a fixed order; names are checkpoint file stems.
  std::vector<std::pair<std::string, ParamSet*>> parameter_sets() {
    return {{"zeta", &encoder_.params()}, {"theta", &theta_.params},      {"phi", &phi_.params},
            {"actor", &sac_.actor},       {"critic1", &sac_.critic1},     {"critic2", &sac_.critic2},
            {"target1", &sac_.target1},   {"target2", &sac_.target2},     {"temperature", &sac_.temperature}};
  }

  void save(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (auto& [name, ps] : parameter_sets()) save_params((dir / (name + ".ckpt")).string(), *ps);
  }

  void load(const std::filesystem::path& dir) {
    for (auto& [name, ps] : parameter_sets()) load_params((dir / (name + ".ckpt")).string(), *ps);
  }

 private:
  Tensor last_observation(const Tensor& windows) const {
    Tensor o(windows.rows(), obs_dim_);
    const std::size_t off = windows.cols() - obs_dim_;
    for (std::size_t r = 0; r < windows.rows(); ++r)
      for (std::size_t j = 0; j < obs_dim_; ++j) o(r, j) = windows(r, off + j);
    return o;
  }

  static Tensor stack(const Tensor& a, const Tensor& b) {
    Tensor out(a.rows() + b.rows(), a.cols());
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<long>(a.size()));
    return out;
  }

  static Tensor rows_of(const Tensor& t, std::size_t start, std::size_t count) {
    Tensor out(count, t.cols());
    const auto first = t.data.begin() + static_cast<long>(start * t.cols());
    std::copy(first, first + static_cast<long>(count * t.cols()), out.data.begin());
    return out;
  }

  static Tensor guidance(const Tensor& x, const Tensor& a) {
    Tensor y(x.rows(), x.cols() + a.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      std::copy(x.row_span(r).begin(), x.row_span(r).end(), y.row_span(r).begin());
      std::copy(a.row_span(r).begin(), a.row_span(r).end(), y.row_span(r).begin() + static_cast<long>(x.cols()));
    }
    return y;
  }

  /// Backward on the summed terms, then Adam on the denoiser (if any) and
  /// on the encoder (when it took part).
  void step(ad::Tape& t, const std::vector<ad::Var>& terms, ParamSet* denoiser, const AdamConfig& adm_opt,
            const AdamConfig& bisim_opt) {
    ad::Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
    t.backward(total);
    if (denoiser) adam_step(*denoiser, t.grads(*denoiser), adm_opt);
    if (!ablate_.no_bisim) adam_step(encoder_.params(), t.grads(encoder_.params()), bisim_opt);
  }

  RunConfig cfg_;
  Ablations ablate_;
  std::size_t obs_dim_;
  std::size_t x_dim_ = 0;
  NoiseSchedule schedule_;
  Encoder encoder_;
  ScoreNet theta_, phi_;
  Sac sac_;
  Rng adm_rng_, sac_rng_;
};

}  // namespace cadiff
