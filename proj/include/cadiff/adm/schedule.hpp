#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cadiff/numerics/tensor.hpp"

namespace cadiff {

/// Variance-preserving schedule. Vectors are indexed by step 0..K with the
/// step-0 entries fixed to beta=0, alpha=alpha_bar=1.
struct NoiseSchedule {
  int K = 0;
  int k0 = 1;
  int delta = 1;
  std::vector<double> beta, alpha, alpha_bar, sigma2;

  double sqrt_ab(int k) const { return std::sqrt(alpha_bar.at(static_cast<std::size_t>(k))); }
  double sqrt_1m_ab(int k) const { return std::sqrt(1.0 - alpha_bar.at(static_cast<std::size_t>(k))); }
};

inline NoiseSchedule make_schedule(int K, double beta_min, double beta_max, int k0, int delta) {
  if (K < 1) throw Error(detail::concat("make_schedule: K must be >= 1, got ", K));
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
    throw Error(detail::concat("make_schedule: need 0 < beta_min <= beta_max < 1, got ", beta_min, ", ", beta_max));
  if (!(1 <= k0 && k0 <= delta && delta <= K))
    throw Error(detail::concat("make_schedule: need 1 <= k0 <= delta <= K, got k0=", k0, ", delta=", delta, ", K=", K));
  NoiseSchedule s;
  s.K = K, s.k0 = k0, s.delta = delta;
  const auto n = static_cast<std::size_t>(K) + 1;
  s.beta.assign(n, 0.0);
  s.alpha.assign(n, 1.0);
  s.alpha_bar.assign(n, 1.0);
  s.sigma2.assign(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    s.beta[k] = K == 1 ? beta_min : beta_min + (beta_max - beta_min) * static_cast<double>(k - 1) / (K - 1);
    s.alpha[k] = 1.0 - s.beta[k];
    s.sigma2[k] = 1.0 - s.alpha[k];
    s.alpha_bar[k] = s.alpha_bar[k - 1] * s.alpha[k];
  }
  return s;
}

inline void check_step(const NoiseSchedule& s, int k, const char* where) {
  if (k < 0 || k > s.K) throw Error(detail::concat(where, ": step ", k, " outside [0, ", s.K, "]"));
}

/// sqrt(alpha_bar_k) x0 + sqrt(1 - alpha_bar_k) eps.
inline std::vector<double> forward_sample(std::span<const double> x0, int k, std::span<const double> eps,
                                          const NoiseSchedule& s) {
  if (x0.size() != eps.size())
    throw Error(detail::concat("forward_sample: x0 has ", x0.size(), " entries, eps has ", eps.size()));
  check_step(s, k, "forward_sample");
  const double a = s.sqrt_ab(k), b = s.sqrt_1m_ab(k);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

/// Inverse of forward_sample at step k given the noise estimate.
inline std::vector<double> invert_at(std::span<const double> xk, std::span<const double> eps_hat, int k,
                                     const NoiseSchedule& s) {
  if (xk.size() != eps_hat.size())
    throw Error(detail::concat("invert: x has ", xk.size(), " entries, eps_hat has ", eps_hat.size()));
  check_step(s, k, "invert");
  const double a = s.sqrt_ab(k), b = s.sqrt_1m_ab(k);
  std::vector<double> out(xk.size());
  for (std::size_t i = 0; i < xk.size(); ++i) out[i] = (xk[i] - b * eps_hat[i]) / a;
  return out;
}

/// (x_delta - sqrt(1 - alpha_bar_delta) eps_hat) / sqrt(alpha_bar_delta).
inline std::vector<double> invert_delta(std::span<const double> x_delta, std::span<const double> eps_hat,
                                        const NoiseSchedule& s) {
  return invert_at(x_delta, eps_hat, s.delta, s);
}

}  // namespace cadiff
