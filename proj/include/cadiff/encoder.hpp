#pragma once

#include <string>
#include <vector>

#include "cadiff/numerics/layers.hpp"
#include "cadiff/numerics/param_set.hpp"
#include "cadiff/numerics/random.hpp"
#include "cadiff/numerics/tape.hpp"

namespace cadiff {

/// Mean and std rows of a diagonal Gaussian living on a tape.
struct GaussianVar {
  ad::Var mean;
  ad::Var std;
};

struct EncoderConfig {
  std::size_t obs_dim = 2;
  std::size_t state_dim = 4;   // width of the latent (causal) state
  std::size_t action_dim = 2;
  std::size_t hidden = 64;
  std::size_t window = 8;      // history length H
  double log_std_min = -5.0;
  double log_std_max = 2.0;
};

/// Recurrent encoder over a fixed window of observations. Histories shorter
/// than the window are left-padded with zero observations, so a history and
/// its padded window encode identically.
///
/// Besides the latent heads it owns the two one-step predictors used by the
/// bisimulation losses: latent transition (z, a) -> next latent and reward
/// (z, a) -> r, both diagonal Gaussians.
class Encoder {
 public:
  Encoder() = default;
  Encoder(std::string name, EncoderConfig cfg, Rng& rng)
      : name_(std::move(name)), cfg_(cfg), gru_{name_ + ".gru", cfg.obs_dim, cfg.hidden} {
    if (cfg_.obs_dim == 0 || cfg_.state_dim == 0 || cfg_.action_dim == 0 || cfg_.hidden == 0 || cfg_.window == 0)
      throw Error("Encoder: all dimensions must be positive");
    gru_.init(params_, rng);
    init_linear(params_, name_ + ".mean", cfg_.hidden, cfg_.state_dim, rng);
    init_linear(params_, name_ + ".logstd", cfg_.hidden, cfg_.state_dim, rng);
    trans_ = Mlp{name_ + ".trans", {cfg_.state_dim + cfg_.action_dim, cfg_.hidden, 2 * cfg_.state_dim}, Activation::tanh};
    reward_ = Mlp{name_ + ".reward", {cfg_.state_dim + cfg_.action_dim, cfg_.hidden, 2}, Activation::tanh};
    trans_.init(params_, rng);
    reward_.init(params_, rng);
  }

  const EncoderConfig& config() const { return cfg_; }
  const std::string& name() const { return name_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  std::size_t window_width() const { return cfg_.window * cfg_.obs_dim; }

  /// Packs a history (oldest first, 1..H observations) into one padded row.
  std::vector<double> pack(const std::vector<std::vector<double>>& history) const {
    if (history.empty()) throw Error("Encoder: empty history");
    if (history.size() > cfg_.window)
      throw Error(detail::concat("Encoder: history of ", history.size(), " exceeds window ", cfg_.window));
    std::vector<double> row(window_width(), 0.0);
    std::size_t off = (cfg_.window - history.size()) * cfg_.obs_dim;
    for (const auto& o : history) {
      if (o.size() != cfg_.obs_dim)
        throw Error(detail::concat("Encoder: observation width ", o.size(), ", expected ", cfg_.obs_dim));
      std::copy(o.begin(), o.end(), row.begin() + static_cast<long>(off));
      off += cfg_.obs_dim;
    }
    return row;
  }

  /// Encodes [n, H*obs_dim] windows. With `grad` false the parameters enter
  /// as constants, so nothing on this path reaches the encoder's gradients.
  GaussianVar encode(ad::Tape& t, const Tensor& windows, bool grad = true) const {
    using namespace ad;
    if (windows.cols() != window_width())
      throw Error(detail::concat("Encoder: window width ", windows.cols(), ", expected ", window_width()));
    Var x = t.constant(windows);
    Var h = t.constant(Tensor(windows.rows(), cfg_.hidden));
    for (std::size_t s = 0; s < cfg_.window; ++s)
      h = gru_.step(t, params_, slice_cols(x, s * cfg_.obs_dim, cfg_.obs_dim), h, grad);
    Var mean = linear(t, params_, name_ + ".mean", h, grad);
    Var log_std = linear(t, params_, name_ + ".logstd", h, grad);
    return {mean, ad::exp(clamp(log_std, cfg_.log_std_min, cfg_.log_std_max))};
  }

  GaussianVar encode_history(ad::Tape& t, const std::vector<std::vector<double>>& history) const {
    return encode(t, Tensor::row(pack(history)), false);
  }

  /// Predicted next latent given a latent and an action.
  GaussianVar predict_next(ad::Tape& t, ad::Var z, ad::Var a, bool grad = true) const {
    return head(t, trans_, z, a, cfg_.state_dim, grad);
  }

  /// Predicted reward given a latent and an action.
  GaussianVar predict_reward(ad::Tape& t, ad::Var z, ad::Var a, bool grad = true) const {
    return head(t, reward_, z, a, 1, grad);
  }

 private:
  GaussianVar head(ad::Tape& t, const Mlp& mlp, ad::Var z, ad::Var a, std::size_t w, bool grad) const {
    using namespace ad;
    if (a.cols() != cfg_.action_dim)
      throw Error(detail::concat("Encoder: action width ", a.cols(), ", expected ", cfg_.action_dim));
    Var out = mlp(t, params_, concat_cols({z, a}), grad);
    Var log_std = clamp(slice_cols(out, w, w), cfg_.log_std_min, cfg_.log_std_max);
    return {slice_cols(out, 0, w), ad::exp(log_std)};
  }

  std::string name_;
  EncoderConfig cfg_;
  GruCell gru_;
  Mlp trans_, reward_;
  ParamSet params_;
};

/// Reparameterized draw mean + std * eps; eps is [n, w] standard normal.
inline ad::Var sample_state(const GaussianVar& g, const Tensor& eps) {
  if (eps.shape != g.mean.value().shape) throw Error("sample_state: noise shape mismatch");
  return ad::add(g.mean, ad::mul(g.std, g.mean.tape()->constant(eps)));
}

inline Tensor standard_normal_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor e(rows, cols);
  for (auto& v : e.data) v = standard_normal(rng);
  return e;
}

}  // namespace cadiff
