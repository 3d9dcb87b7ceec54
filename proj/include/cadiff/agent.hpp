#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cadiff/numerics/adam.hpp"
#include "cadiff/numerics/layers.hpp"
#include "cadiff/numerics/param_set.hpp"
#include "cadiff/numerics/random.hpp"
#include "cadiff/numerics/tape.hpp"

namespace cadiff {

enum class TargetEntropyMode { standard, literal };

struct SacConfig {
  std::size_t state_dim = 4;
  std::size_t action_dim = 2;
  std::size_t hidden = 64;
  double gamma = 0.99;
  double tau = 0.005;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;
  double init_alpha = 1.0;
  // `literal` uses target_entropy as given; `standard` uses -action_dim.
  TargetEntropyMode entropy_mode = TargetEntropyMode::standard;
  double target_entropy = 0.2;
  double log_std_min = -5.0;
  double log_std_max = 2.0;

  double effective_target_entropy() const {
    return entropy_mode == TargetEntropyMode::standard ? -static_cast<double>(action_dim) : target_entropy;
  }

  void validate() const {
    if (state_dim == 0 || action_dim == 0 || hidden == 0) throw Error("sac: dimensions must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("sac: gamma must be in [0,1)");
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error("sac: tau must be in [0,1]");
    if (!(actor_lr > 0 && critic_lr > 0 && alpha_lr >= 0)) throw Error("sac: learning rates must be positive");
    if (!(init_alpha > 0.0)) throw Error("sac: initial temperature must be positive");
  }
};

struct SacBatch {
  Tensor s, a, r, s2, done;  // r and done are [n,1]
};

struct SacReport {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;
};

struct PolicySample {
  ad::Var action;    // [n, w_a] in (-1, 1)
  ad::Var log_prob;  // [n, 1]
};

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

/// log(1 - tanh(u)^2) without cancellation: 2 (log 2 - u - softplus(-2u)).
inline double log_tanh_jacobian(double u) { return 2.0 * (std::log(2.0) - u - ad::softplus_value(-2.0 * u)); }

/// Change-of-variables density of a tanh-squashed diagonal Gaussian at the
/// pre-squash point u.
inline double squashed_log_prob(std::span<const double> u, std::span<const double> mean,
                                std::span<const double> std) {
  double lp = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double z = (u[i] - mean[i]) / std[i];
    lp += -0.5 * z * z - std::log(std[i]) - kHalfLog2Pi - log_tanh_jacobian(u[i]);
  }
  return lp;
}

/// Soft actor-critic with twin critics, target critics and learned temperature.
class Sac {
 public:
  Sac() = default;
  Sac(SacConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t s = cfg_.state_dim, a = cfg_.action_dim, h = cfg_.hidden;
    actor_net_ = Mlp{"actor", {s, h, h, 2 * a}, Activation::relu};
    q1_net_ = Mlp{"q1", {s + a, h, h, 1}, Activation::relu};
    q2_net_ = Mlp{"q2", {s + a, h, h, 1}, Activation::relu};
    actor_net_.init(actor, rng);
    q1_net_.init(critic1, rng);
    q2_net_.init(critic2, rng);
    target1 = critic1;
    target2 = critic2;
    temperature.add("log_alpha", Tensor::scalar(std::log(cfg_.init_alpha)));
  }

  const SacConfig& config() const { return cfg_; }
  double alpha() const { return std::exp(temperature.at("log_alpha").item()); }

  /// Squashed policy sample on a tape; `eps` supplies the reparameterization
  /// noise (zeros give the deterministic mean action).
  PolicySample policy(ad::Tape& t, ad::Var s, const Tensor& eps, bool grad = true) const {
    using namespace ad;
    const std::size_t w = cfg_.action_dim;
    Var out = actor_net_(t, actor, s, grad);
    Var mean = slice_cols(out, 0, w);
    Var log_std = clamp(slice_cols(out, w, w), cfg_.log_std_min, cfg_.log_std_max);
    Var e = t.constant(eps);
    Var u = add(mean, mul(ad::exp(log_std), e));
    Var a = ad::tanh(u);
    // log N(u; mean, std) = -e^2/2 - log std - log(2 pi)/2, then the tanh Jacobian.
    Var gauss = sub(scale(square(e), -0.5), log_std);
    Var jac = scale(add(add_scalar(neg(u), std::log(2.0)), neg(softplus(scale(u, -2.0)))), 2.0);
    Var lp = add_scalar(sum_cols(sub(gauss, jac)), -kHalfLog2Pi * static_cast<double>(w));
    return {a, lp};
  }

  /// Action for one state; the mean action when `deterministic`.
  std::vector<double> select_action(std::span<const double> s, bool deterministic, Rng& rng,
                                    double* log_prob = nullptr) const {
    if (s.size() != cfg_.state_dim)
      throw Error(detail::concat("sac: state width ", s.size(), ", expected ", cfg_.state_dim));
    ad::Tape t;
    Tensor eps(1, cfg_.action_dim);
    if (!deterministic)
      for (auto& v : eps.data) v = standard_normal(rng);
    auto ps = policy(t, t.constant(Tensor::row(s)), eps, false);
    if (log_prob) *log_prob = ps.log_prob.item();
    auto a = row_vector(ps.action.value(), 0);
    // Keep actions strictly inside the box even when tanh saturates.
    for (auto& v : a) v = std::clamp(v, -1.0 + 1e-12, 1.0 - 1e-12);
    return a;
  }

  /// Pre-squash statistics of the policy at one state (diagnostics / tests).
  std::pair<std::vector<double>, std::vector<double>> policy_stats(std::span<const double> s) const {
    ad::Tape t;
    auto out = actor_net_(t, actor, t.constant(Tensor::row(s)), false).value();
    std::vector<double> mean(cfg_.action_dim), std(cfg_.action_dim);
    for (std::size_t i = 0; i < cfg_.action_dim; ++i) {
      mean[i] = out(0, i);
      std[i] = std::exp(std::clamp(out(0, cfg_.action_dim + i), cfg_.log_std_min, cfg_.log_std_max));
    }
    return {mean, std};
  }

  Tensor q_values(const Tensor& s, const Tensor& a, int which) const {
    ad::Tape t;
    Var sa = ad::concat_cols({t.constant(s), t.constant(a)});
    return (which == 1 ? q1_net_(t, critic1, sa, false) : q2_net_(t, critic2, sa, false)).value();
  }

  SacReport update(const SacBatch& b, Rng& rng) {
    using namespace ad;
    const std::size_t n = b.s.rows(), w = cfg_.action_dim;
    if (b.s.cols() != cfg_.state_dim || b.s2.cols() != cfg_.state_dim || b.a.cols() != w || b.r.cols() != 1 ||
        b.done.cols() != 1 || b.a.rows() != n || b.r.rows() != n || b.s2.rows() != n || b.done.rows() != n)
      throw Error("sac update: batch shape mismatch");
    SacReport rep;
    const double alpha_now = alpha();

    // Critics.
    Tensor y(n, 1);
    named("critic", [&] {
      Tape t;
      auto next = policy(t, t.constant(b.s2), noise(n, w, rng), false);
      Var sa2 = concat_cols({t.constant(b.s2), next.action});
      Tensor q1 = q1_net_(t, target1, sa2, false).value(), q2 = q2_net_(t, target2, sa2, false).value();
      for (std::size_t i = 0; i < n; ++i) {
        const double v = std::min(q1(i, 0), q2(i, 0)) - alpha_now * next.log_prob.value()(i, 0);
        y(i, 0) = b.r(i, 0) + cfg_.gamma * (1.0 - b.done(i, 0)) * v;
      }
    });
    named("critic", [&] {
      Tape t;
      Var sa = concat_cols({t.constant(b.s), t.constant(b.a)});
      Var yt = t.constant(y);
      Var loss = add(ad::mean(square(sub(q1_net_(t, critic1, sa), yt))), ad::mean(square(sub(q2_net_(t, critic2, sa), yt))));
      rep.critic_loss = checked(loss.item(), "critic");
      t.backward(loss);
      adam_step(critic1, t.grads(critic1), {cfg_.critic_lr});
      adam_step(critic2, t.grads(critic2), {cfg_.critic_lr});
    });
    // Actor, against the freshly updated critics held fixed.
    Tensor log_prob;
    named("actor", [&] {
      Tape t;
      Var s = t.constant(b.s);
      auto pi = policy(t, s, noise(n, w, rng));
      Var sa = concat_cols({s, pi.action});
      Var q = minimum(q1_net_(t, critic1, sa, false), q2_net_(t, critic2, sa, false));
      Var loss = ad::mean(sub(scale(pi.log_prob, alpha_now), q));
      rep.actor_loss = checked(loss.item(), "actor");
      t.backward(loss);
      adam_step(actor, t.grads(actor), {cfg_.actor_lr});
      log_prob = pi.log_prob.value();
    });
    // Temperature: minimize -log_alpha * (log_prob + target).
    {
      double m = 0.0;
      for (double v : log_prob.data) m += v;
      m /= static_cast<double>(n);
      rep.entropy = -m;
      const double gap = m + cfg_.effective_target_entropy();
      rep.alpha_loss = checked(-std::log(alpha_now) * gap, "temperature");
      if (cfg_.alpha_lr > 0) adam_step(temperature, {{"log_alpha", Tensor::scalar(-gap)}}, {cfg_.alpha_lr});
    }
    soft_update(cfg_.tau);
    rep.alpha = alpha();
    return rep;
  }

  /// target <- (1 - tau) target + tau online.
  void soft_update(double tau) {
    blend(target1, critic1, tau);
    blend(target2, critic2, tau);
  }

  /// Checksum over every SAC-owned parameter set.
  std::uint64_t checksum() const {
    return actor.checksum() ^ (critic1.checksum() * 3) ^ (critic2.checksum() * 5) ^ (target1.checksum() * 7) ^
           (target2.checksum() * 11) ^ (temperature.checksum() * 13);
  }

  ParamSet actor, critic1, critic2, target1, target2, temperature;

 private:
  using Var = ad::Var;

  static Tensor noise(std::size_t n, std::size_t w, Rng& rng) {
    Tensor e(n, w);
    for (auto& v : e.data) v = standard_normal(rng);
    return e;
  }

  /// Runs one stage of the update; numeric failures inside it are reported
  /// under the stage's name.
  template <typename F>
  static void named(const char* component, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      const std::string what = e.what();
      if (what.rfind("non-finite", 0) != 0) throw;
      throw Error(detail::concat("sac: non-finite ", component, " loss (", what, ")"));
    }
  }

  static double checked(double v, const char* component) {
    if (!std::isfinite(v)) throw Error(detail::concat("sac: non-finite ", component, " loss"));
    return v;
  }

  static void blend(ParamSet& target, const ParamSet& online, double tau) {
    for (auto& [name, t] : target.values) {
      const auto& o = online.at(name).data;
      for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = (1.0 - tau) * t.data[i] + tau * o[i];
    }
  }

  SacConfig cfg_;
  Mlp actor_net_, q1_net_, q2_net_;
};

}  // namespace cadiff
