#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "cadiff/adm/schedule.hpp"
#include "cadiff/adm/score_net.hpp"
#include "cadiff/numerics/adam.hpp"
#include "cadiff/numerics/random.hpp"

namespace cadiff {

/// Draws the classifier-free guidance mask: 1 keeps the guidance, 0 drops it.
inline std::vector<int> draw_guidance_mask(std::size_t n, Rng& rng) {
  std::vector<int> m(n);
  std::bernoulli_distribution coin(0.5);
  for (auto& v : m) v = coin(rng) ? 1 : 0;
  return m;
}

/// Regression problem for one training step: rows [0, n) are the
/// re-noised-estimate branch, rows [n, 2n) continue the forward process from
/// the observed delta-noised input.
struct AdmBatch {
  Tensor x_k;
  Tensor y;
  std::vector<int> mask;
  std::vector<int> k;
  Tensor target;
};

/// Builds both branches for a batch of delta-noised inputs.
///
/// Branch A: k ~ U{k0..K}; x0_hat = invert_delta(x_in, eps_hat(x_in, delta))
/// with the network's own detached estimate, then x^k = forward_sample(x0_hat, k, eps)
/// and the target is eps.
///
/// Branch B: k ~ U{delta+1..K}; x^k = sqrt(ab_k/ab_delta) x_in + sqrt(1 - ab_k/ab_delta) eps,
/// and the target is the conditional score of that kernel in noise units,
/// eps * sqrt(1 - ab_k) / sqrt(1 - ab_k/ab_delta).
inline AdmBatch make_adm_batch(const Tensor& x_in, const Tensor& y, const ScoreNet& net, const NoiseSchedule& s,
                               Rng& rng) {
  const std::size_t n = x_in.rows(), w = x_in.cols();
  if (x_in.empty() || n == 0) throw Error("adm batch: empty batch");
  if (s.delta >= s.K) throw Error("adm batch: delta must be below K for the forward branch");
  AdmBatch b;
  b.x_k = Tensor(2 * n, w);
  b.target = Tensor(2 * n, w);
  const std::size_t yd = net.cfg.y_dim;
  if (yd > 0) {
    if (y.rows() != n || y.cols() != yd) throw Error("adm batch: guidance shape mismatch");
    b.y = Tensor(2 * n, yd);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < yd; ++j) b.y(r, j) = b.y(n + r, j) = y(r, j);
  }
  b.mask = draw_guidance_mask(2 * n, rng);
  b.k.assign(2 * n, 0);

  // Branch A.
  std::vector<int> mask_a(b.mask.begin(), b.mask.begin() + static_cast<long>(n));
  Tensor eps_delta;
  {
    ad::Tape t;
    eps_delta = net.eps_hat(t, x_in, y, mask_a, std::vector<int>(n, s.delta), s).value();
  }
  std::uniform_int_distribution<int> ka(s.k0, s.K);
  for (std::size_t r = 0; r < n; ++r) {
    auto x0 = invert_delta(x_in.row_span(r), eps_delta.row_span(r), s);
    const int k = ka(rng);
    b.k[r] = k;
    for (std::size_t j = 0; j < w; ++j) {
      const double e = standard_normal(rng);
      b.x_k(r, j) = s.sqrt_ab(k) * x0[j] + s.sqrt_1m_ab(k) * e;
      b.target(r, j) = e;
    }
  }
  // Branch B.
  std::uniform_int_distribution<int> kb(s.delta + 1, s.K);
  const double ab_d = s.alpha_bar[static_cast<std::size_t>(s.delta)];
  for (std::size_t r = 0; r < n; ++r) {
    const int k = kb(rng);
    b.k[n + r] = k;
    const double ratio = s.alpha_bar[static_cast<std::size_t>(k)] / ab_d;
    const double c = std::sqrt(1.0 - ratio);
    const double scale = s.sqrt_1m_ab(k) / c;
    for (std::size_t j = 0; j < w; ++j) {
      const double e = standard_normal(rng);
      b.x_k(n + r, j) = std::sqrt(ratio) * x_in(r, j) + c * e;
      b.target(n + r, j) = scale * e;
    }
  }
  return b;
}

/// Mean over rows of |eps_hat - target|^2.
inline ad::Var adm_loss_from_prediction(ad::Var eps_hat, const Tensor& target) {
  if (eps_hat.value().shape != target.shape)
    throw Error(detail::concat("adm loss: prediction ", eps_hat.value().shape_str(), " vs target ", target.shape_str()));
  using namespace ad;
  Var diff = sub(eps_hat, eps_hat.tape()->constant(target));
  return scale(sum(square(diff)), 1.0 / static_cast<double>(target.rows()));
}

inline ad::Var adm_loss(ad::Tape& t, const ScoreNet& net, const AdmBatch& b, const NoiseSchedule& s) {
  return adm_loss_from_prediction(net.eps_hat(t, b.x_k, b.y, b.mask, b.k, s), b.target);
}

/// One Adam step on the two-branch loss; returns the loss value.
inline double adm_train_step(ScoreNet& net, const Tensor& x_in, const Tensor& y, const NoiseSchedule& s,
                             const AdamConfig& opt, Rng& rng) {
  auto batch = make_adm_batch(x_in, y, net, s, rng);
  ad::Tape t;
  auto loss = adm_loss(t, net, batch, s);
  t.backward(loss);
  adam_step(net.params, t.grads(net.params), opt);
  return loss.item();
}

/// Noise predictor used by the reverse chain: (x, k, conditional) -> eps_hat.
using EpsModel = std::function<Tensor(const Tensor& x, int k, bool conditional)>;

/// Reverse chain from step delta down to k0, then inversion at k0. Each step
/// combines eps_u + w (eps_c - eps_u) and moves to the posterior mean of
/// x^{k-1} given (x^k, x0_hat); `rng` adds the ancestral noise when given.
inline Tensor denoise(const Tensor& x_delta, const EpsModel& model, const NoiseSchedule& s, double guidance_weight,
                      Rng* rng = nullptr) {
  auto eps_at = [&](const Tensor& x, int k) {
    if (guidance_weight == 1.0) return model(x, k, true);
    Tensor eu = model(x, k, false);
    if (guidance_weight == 0.0) return eu;
    Tensor ec = model(x, k, true);
    for (std::size_t i = 0; i < eu.size(); ++i) eu.data[i] += guidance_weight * (ec.data[i] - eu.data[i]);
    return eu;
  };
  auto check = [&](const Tensor& t, int k) {
    if (!t.all_finite()) throw Error(detail::concat("denoise: non-finite value at step ", k));
  };
  Tensor x = x_delta;
  for (int k = s.delta; k > s.k0; --k) {
    Tensor e = eps_at(x, k);
    check(e, k);
    const auto kk = static_cast<std::size_t>(k);
    const double ab = s.alpha_bar[kk], ab_prev = s.alpha_bar[kk - 1];
    const double c0 = std::sqrt(ab_prev) * s.beta[kk] / (1.0 - ab);
    const double ck = std::sqrt(s.alpha[kk]) * (1.0 - ab_prev) / (1.0 - ab);
    const double sd = std::sqrt((1.0 - ab_prev) / (1.0 - ab) * s.beta[kk]);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double x0 = (x.data[i] - std::sqrt(1.0 - ab) * e.data[i]) / std::sqrt(ab);
      x.data[i] = c0 * x0 + ck * x.data[i] + (rng ? sd * standard_normal(*rng) : 0.0);
    }
    check(x, k - 1);
  }
  Tensor e = eps_at(x, s.k0);
  check(e, s.k0);
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto x0 = invert_at(x.row_span(r), e.row_span(r), s.k0, s);
    std::copy(x0.begin(), x0.end(), out.row_span(r).begin());
  }
  check(out, 0);
  return out;
}

inline Tensor denoise(const Tensor& x_delta, const Tensor& y, const ScoreNet& net, const NoiseSchedule& s,
                      double guidance_weight, Rng* rng = nullptr) {
  EpsModel m = [&](const Tensor& x, int k, bool cond) { return net.predict(x, y, cond, k, s); };
  return denoise(x_delta, m, s, guidance_weight, rng);
}

}  // namespace cadiff
