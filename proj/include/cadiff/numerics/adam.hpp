#pragma once

#include <cmath>

#include "cadiff/numerics/param_set.hpp"

namespace cadiff {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update in place. Gradients may cover a subset of the
/// parameters; the step counter advances once per call.
inline void adam_step(ParamSet& params, const GradMap& grads, const AdamConfig& cfg) {
  if (!(cfg.lr >= 0.0)) throw Error("adam_step: learning rate must be non-negative");
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw Error("adam_step: gradient for unknown parameter '" + name + "'");
    if (!g.all_finite()) throw Error("adam_step: non-finite gradient for parameter '" + name + "'");
    if (g.size() != params.at(name).size()) throw Error("adam_step: gradient shape mismatch for '" + name + "'");
  }
  params.step_count += 1;
  const double t = static_cast<double>(params.step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& w = params.values.at(name);
    Tensor& m = params.first_moment.at(name);
    Tensor& v = params.second_moment.at(name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / c1;
      const double vhat = v.data[i] / c2;
      w.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace cadiff
