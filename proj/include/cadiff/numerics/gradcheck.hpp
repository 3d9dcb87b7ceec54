#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "cadiff/numerics/layers.hpp"
#include "cadiff/numerics/tape.hpp"

namespace cadiff {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "<param>[index]"
};

/// Compares reverse-mode gradients of a scalar function of a ParamSet with
/// central finite differences. The relative error of a coordinate is
/// |g - fd| / max(|g|, |fd|, denom_floor); the floor keeps vanishing
/// gradients from turning round-off into huge ratios.
inline GradCheckReport gradient_check(ParamSet& ps, const std::function<ad::Var(ad::Tape&, const ParamSet&)>& f,
                                      double h = 1e-5, double denom_floor = 1e-3) {
  ad::Tape tape;
  ad::Var out = f(tape, ps);
  tape.backward(out);
  GradMap analytic = tape.grads(ps);

  auto eval = [&] {
    ad::Tape t;
    return f(t, ps).item();
  };

  GradCheckReport rep;
  for (auto& [name, value] : ps.values) {
    auto it = analytic.find(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value.data[i];
      value.data[i] = saved + h;
      const double up = eval();
      value.data[i] = saved - h;
      const double down = eval();
      value.data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double g = it == analytic.end() ? 0.0 : it->second.data[i];
      const double abs_err = std::abs(g - fd);
      const double rel = abs_err / std::max({std::abs(g), std::abs(fd), denom_floor});
      ++rep.coordinates;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

/// A small random differentiable graph: a 3-layer MLP with a random smooth
/// activation, followed by a random elementwise head and a weighted sum.
struct RandomGraph {
  Mlp mlp;
  int head = 0;
  Tensor input;
  Tensor weights;

  static RandomGraph make(ParamSet& ps, Rng& rng) {
    RandomGraph g;
    std::uniform_int_distribution<std::size_t> width(1, 5);
    const std::size_t in = width(rng), h1 = width(rng), h2 = width(rng), out = width(rng);
    const Activation acts[] = {Activation::tanh, Activation::silu};
    g.mlp = Mlp{"g", {in, h1, h2, out}, acts[std::uniform_int_distribution<int>(0, 1)(rng)]};
    g.mlp.init(ps, rng);
    // Non-zero biases so every path is exercised.
    for (auto& [name, t] : ps.values)
      for (auto& x : t.data) x += uniform(rng, -0.5, 0.5);
    const std::size_t batch = width(rng);
    g.input = Tensor(batch, in);
    for (auto& x : g.input.data) x = uniform(rng, -2.0, 2.0);
    g.weights = Tensor(batch, out);
    for (auto& x : g.weights.data) x = uniform(rng, -1.0, 1.0);
    g.head = std::uniform_int_distribution<int>(0, 5)(rng);
    return g;
  }

  ad::Var operator()(ad::Tape& t, const ParamSet& ps) const {
    using namespace ad;
    Var y = mlp(t, ps, t.constant(input));
    switch (head) {
      case 0: y = square(y); break;
      case 1: y = sigmoid(y); break;
      case 2: y = softplus(y); break;
      case 3: y = exp(scale(ad::tanh(y), 0.5)); break;
      case 4: y = div(y, add_scalar(square(y), 1.0)); break;
      case 5: y = log(add_scalar(square(y), 0.5)); break;
    }
    return sum(mul(y, t.constant(weights)));
  }
};

}  // namespace cadiff
