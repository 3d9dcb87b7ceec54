#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cadiff/adm/schedule.hpp"
#include "cadiff/numerics/layers.hpp"

namespace cadiff {

struct ScoreNetConfig {
  std::size_t x_dim = 1;
  std::size_t y_dim = 0;  // 0: unconditional only
  std::size_t hidden = 64;
  std::size_t emb_dim = 32;
  double data_scale = 1.0;  // typical std of clean inputs
};

/// 32-dim sinusoidal features of k/K at log-spaced frequencies 1..1000.
inline void step_embedding(double t, std::span<double> out) {
  const std::size_t half = out.size() / 2;
  for (std::size_t j = 0; j < half; ++j) {
    const double w = std::pow(1000.0, half > 1 ? static_cast<double>(j) / (half - 1) : 0.0);
    out[j] = std::sin(w * t);
    out[half + j] = std::cos(w * t);
  }
}

/// Conditional noise predictor eps_hat(x^k, tau*y, k). The MLP sees
/// [c_in x, y (zeroed when masked), mask flag, step embedding] and its output
/// F is mapped to a clean-sample estimate D = c_skip x' + c_out F in the
/// rescaled variable x' = x / sqrt(ab_k) with noise level s' = sqrt(1-ab_k)/sqrt(ab_k);
/// the noise estimate is (x' - D) / s'. With data scale s_d:
///   c_in = 1/sqrt(s'^2 + s_d^2), c_skip = s_d^2/(s'^2 + s_d^2), c_out = s' s_d/sqrt(s'^2 + s_d^2).
/// This keeps the network's input and regression target O(1) at every step.
struct ScoreNet {
  std::string name;
  ScoreNetConfig cfg;
  ParamSet params;
  Mlp mlp;

  ScoreNet() = default;
  ScoreNet(std::string n, ScoreNetConfig c, Rng& rng) : name(std::move(n)), cfg(c) {
    if (cfg.x_dim == 0) throw Error("ScoreNet: x_dim must be positive");
    if (cfg.emb_dim % 2) throw Error("ScoreNet: emb_dim must be even");
    if (!(cfg.data_scale > 0.0)) throw Error("ScoreNet: data_scale must be positive");
    mlp = Mlp{name, {input_width(), cfg.hidden, cfg.hidden, cfg.x_dim}, Activation::silu};
    mlp.init(params, rng);
  }

  std::size_t input_width() const { return cfg.x_dim + cfg.y_dim + 1 + cfg.emb_dim; }

  /// Builds the MLP input rows. `mask[i]` != 0 keeps the guidance of row i.
  Tensor features(const Tensor& x, const Tensor& y, const std::vector<int>& mask, const std::vector<int>& k,
                  const NoiseSchedule& s) const {
    const std::size_t n = x.rows();
    if (x.cols() != cfg.x_dim)
      throw Error(detail::concat("ScoreNet '", name, "': x width ", x.cols(), ", expected ", cfg.x_dim));
    if (cfg.y_dim > 0 && (y.rows() != n || y.cols() != cfg.y_dim))
      throw Error(detail::concat("ScoreNet '", name, "': guidance shape ", y.shape_str(), ", expected [", n, "x",
                                 cfg.y_dim, "]"));
    if (mask.size() != n || k.size() != n) throw Error(detail::concat("ScoreNet '", name, "': mask/step count mismatch"));
    Tensor in(n, input_width());
    for (std::size_t r = 0; r < n; ++r) {
      check_step(s, k[r], "ScoreNet");
      auto row = in.row_span(r);
      std::size_t c = 0;
      const double cin = 1.0 / std::sqrt(scaled_var(s, k[r]) + cfg.data_scale * cfg.data_scale) / s.sqrt_ab(k[r]);
      for (std::size_t j = 0; j < cfg.x_dim; ++j) row[c++] = cin * x(r, j);
      for (std::size_t j = 0; j < cfg.y_dim; ++j) row[c++] = mask[r] ? y(r, j) : 0.0;
      row[c++] = mask[r] ? 1.0 : 0.0;
      step_embedding(static_cast<double>(k[r]) / s.K, row.subspan(c, cfg.emb_dim));
    }
    return in;
  }

  ad::Var eps_hat(ad::Tape& t, const Tensor& x, const Tensor& y, const std::vector<int>& mask,
                  const std::vector<int>& k, const NoiseSchedule& s) const {
    using namespace ad;
    Var f = mlp(t, params, t.constant(features(x, y, mask, k, s)));
    // eps_hat = x s' / (sqrt(ab) (s'^2 + s_d^2)) - s_d / sqrt(s'^2 + s_d^2) F
    Tensor px(x.rows(), 1), qf(x.rows(), 1);
    const double sd2 = cfg.data_scale * cfg.data_scale;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      if (k[r] < 1) throw Error(detail::concat("ScoreNet '", name, "': noise prediction undefined at step 0"));
      const double v = scaled_var(s, k[r]);
      px(r, 0) = std::sqrt(v) / (s.sqrt_ab(k[r]) * (v + sd2));
      qf(r, 0) = -cfg.data_scale / std::sqrt(v + sd2);
    }
    return add(mul(t.constant(x), t.constant(px)), mul(f, t.constant(qf)));
  }

  /// (1 - ab_k) / ab_k, the noise variance in the rescaled variable.
  static double scaled_var(const NoiseSchedule& s, int k) {
    const double ab = s.alpha_bar.at(static_cast<std::size_t>(k));
    return (1.0 - ab) / ab;
  }

  /// Gradient-free evaluation with every row at step k.
  Tensor predict(const Tensor& x, const Tensor& y, bool conditional, int k, const NoiseSchedule& s) const {
    ad::Tape t;
    std::vector<int> mask(x.rows(), conditional ? 1 : 0), ks(x.rows(), k);
    return eps_hat(t, x, y, mask, ks, s).value();
  }
};

}  // namespace cadiff
