#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cadiff/numerics/param_set.hpp"
#include "cadiff/numerics/random.hpp"
#include "cadiff/numerics/tape.hpp"

namespace cadiff {

/// Glorot-uniform weights, zero bias: `<name>.W` is [in,out], `<name>.b` is [1,out].
inline void init_linear(ParamSet& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w(in, out);
  for (auto& x : w.data) x = uniform(rng, -bound, bound);
  ps.add(name + ".W", std::move(w));
  ps.add(name + ".b", Tensor(1, out));
}

/// Binds a parameter live (`grad`) or as a constant.
inline ad::Var bind_param(ad::Tape& t, const ParamSet& ps, const std::string& name, bool grad) {
  return grad ? t.param(ps, name) : t.frozen(ps, name);
}

inline ad::Var linear(ad::Tape& t, const ParamSet& ps, const std::string& name, ad::Var x, bool grad = true) {
  return ad::affine(x, bind_param(t, ps, name + ".W", grad), bind_param(t, ps, name + ".b", grad));
}

enum class Activation { tanh, relu, silu };

inline ad::Var activate(ad::Var x, Activation a) {
  switch (a) {
    case Activation::tanh: return ad::tanh(x);
    case Activation::relu: return ad::relu(x);
    case Activation::silu: return ad::silu(x);
  }
  return x;
}

/// Fully connected stack; the last layer is linear.
struct Mlp {
  std::string prefix;
  std::vector<std::size_t> widths;  // input, hidden..., output
  Activation activation = Activation::relu;

  void init(ParamSet& ps, Rng& rng) const {
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
      init_linear(ps, layer_name(l), widths[l], widths[l + 1], rng);
  }

  ad::Var operator()(ad::Tape& t, const ParamSet& ps, ad::Var x, bool grad = true) const {
    if (x.cols() != widths.front())
      throw Error(detail::concat("Mlp '", prefix, "': expected input width ", widths.front(), ", got ", x.cols()));
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      x = linear(t, ps, layer_name(l), x, grad);
      if (l + 2 < widths.size()) x = activate(x, activation);
    }
    return x;
  }

  std::string layer_name(std::size_t l) const { return prefix + ".l" + std::to_string(l); }
  std::size_t in() const { return widths.front(); }
  std::size_t out() const { return widths.back(); }
};

/// Gated recurrent unit with the reset gate applied to the projected hidden
/// state: n = tanh(x Wn + r * (h Un + bn)). Gates share one [in,3h] and one
/// [h,3h] projection, ordered (update, reset, candidate).
struct GruCell {
  std::string prefix;
  std::size_t in = 0;
  std::size_t hidden = 0;

  void init(ParamSet& ps, Rng& rng) const {
    const double bx = std::sqrt(6.0 / static_cast<double>(in + hidden));
    const double bh = std::sqrt(6.0 / static_cast<double>(2 * hidden));
    Tensor wx(in, 3 * hidden), wh(hidden, 3 * hidden);
    for (auto& x : wx.data) x = uniform(rng, -bx, bx);
    for (auto& x : wh.data) x = uniform(rng, -bh, bh);
    ps.add(prefix + ".Wx", std::move(wx));
    ps.add(prefix + ".Wh", std::move(wh));
    ps.add(prefix + ".bx", Tensor(1, 3 * hidden));
    ps.add(prefix + ".bh", Tensor(1, 3 * hidden));
  }

  ad::Var step(ad::Tape& t, const ParamSet& ps, ad::Var x, ad::Var h, bool grad = true) const {
    using namespace ad;
    Var gx = affine(x, bind_param(t, ps, prefix + ".Wx", grad), bind_param(t, ps, prefix + ".bx", grad));
    Var gh = affine(h, bind_param(t, ps, prefix + ".Wh", grad), bind_param(t, ps, prefix + ".bh", grad));
    return gru_update(gx, gh, h);
  }
};

}  // namespace cadiff
