#pragma once

#include <Eigen/Core>

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cadiff/numerics/param_set.hpp"
#include "cadiff/numerics/tensor.hpp"

namespace cadiff::ad {

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records a computation as it is evaluated and replays it in reverse for
/// gradients. One tape per training step; not thread-safe.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push(std::move(value), "const", false, {}, nullptr); }

  /// Differentiable input that is not owned by a ParamSet.
  Var leaf(Tensor value, std::string name) {
    Var v = push(std::move(value), "leaf", true, {}, nullptr);
    nodes_[v.id()].name = std::move(name);
    return v;
  }

  /// Binds a ParamSet entry; repeated calls return the same node so shared
  /// weights (recurrent cells) accumulate gradients in one place.
  Var param(const ParamSet& ps, const std::string& name) {
    auto key = std::make_pair(&ps, name);
    auto it = bound_.find(key);
    if (it != bound_.end()) return Var(this, it->second);
    Var v = leaf(ps.at(name), name);
    bound_.emplace(key, v.id());
    return v;
  }

  /// Binds a ParamSet entry as a constant (no gradient flows to it); cached
  /// like `param` so recurrent cells copy each weight once per tape.
  Var frozen(const ParamSet& ps, const std::string& name) {
    auto key = std::make_pair(&ps, name);
    auto it = frozen_.find(key);
    if (it != frozen_.end()) return Var(this, it->second);
    Var v = constant(ps.at(name));
    frozen_.emplace(key, v.id());
    return v;
  }

  Var record(Tensor value, const char* op, std::vector<std::size_t> parents, Backward fn) {
    bool ng = false;
    for (auto p : parents) ng = ng || nodes_[p].needs_grad;
    if (!value.all_finite())
      throw Error(detail::concat("non-finite value produced by '", op, "' (node ", nodes_.size(), ")"));
    return push(std::move(value), op, ng, std::move(parents), ng ? std::move(fn) : nullptr);
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const char* op(std::size_t id) const { return nodes_.at(id).op; }
  bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient accumulator of a node, allocated on first use.
  Tensor& grad_buffer(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
    return n.grad;
  }

  /// Reverse pass from a scalar output.
  void backward(Var out) {
    if (out.tape() != this) throw Error("backward: output belongs to a different tape");
    const auto& n = nodes_.at(out.id());
    if (n.value.size() != 1)
      throw Error(detail::concat("backward: output must be scalar, got ", n.value.shape_str()));
    if (!n.needs_grad) throw Error("backward: output is detached from every differentiable leaf");
    for (auto& node : nodes_) node.grad = Tensor();
    grad_buffer(out.id()).data[0] = 1.0;
    for (std::size_t i = out.id() + 1; i-- > 0;) {
      auto& node = nodes_[i];
      if (!node.needs_grad || node.grad.empty() || !node.backward) continue;
      node.backward(*this, i);
    }
  }

  /// Gradient of the last backward pass w.r.t. a node (zeros if unreached).
  Tensor grad(Var v) const {
    const auto& n = nodes_.at(v.id());
    return n.grad.empty() ? Tensor::zeros_like(n.value) : n.grad;
  }

  /// Gradients of every bound entry of a ParamSet, keyed by parameter name.
  GradMap grads(const ParamSet& ps) const {
    GradMap out;
    for (const auto& [key, id] : bound_) {
      if (key.first != &ps) continue;
      const auto& n = nodes_[id];
      out[key.second] = n.grad.empty() ? Tensor::zeros_like(n.value) : n.grad;
    }
    return out;
  }

  /// Gradients of every named leaf.
  GradMap named_grads() const {
    GradMap out;
    for (const auto& n : nodes_)
      if (!n.name.empty()) out[n.name] = n.grad.empty() ? Tensor::zeros_like(n.value) : n.grad;
    return out;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    const char* op = "";
    bool needs_grad = false;
    std::vector<std::size_t> parents;
    Backward backward;
    std::string name;
  };

  Var push(Tensor value, const char* op, bool needs_grad, std::vector<std::size_t> parents,
           Backward fn) {
    if (value.rank() != 2) throw Error(detail::concat("tape values must be rank-2, got ", value.shape_str()));
    nodes_.push_back(Node{std::move(value), Tensor(), op, needs_grad, std::move(parents), std::move(fn), {}});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::map<std::pair<const ParamSet*, std::string>, std::size_t> bound_;
  std::map<std::pair<const ParamSet*, std::string>, std::size_t> frozen_;
};

inline const Tensor& Var::value() const {
  if (!tape_) throw Error("Var: use of an unbound variable");
  return tape_->value(id_);
}

namespace detail_ops {

inline Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape())
    throw Error(cadiff::detail::concat("'", op, "': operands live on different tapes"));
  return *a.tape();
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

inline MapC view(const Tensor& t) { return MapC(t.data.data(), t.rows(), t.cols()); }
inline Map view(Tensor& t) { return Map(t.data.data(), t.rows(), t.cols()); }

/// Output shape for 2-D broadcasting where each dim is equal or 1.
inline std::pair<std::size_t, std::size_t> broadcast_shape(const Tensor& a, const Tensor& b,
                                                           const char* op, std::size_t node) {
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw Error(cadiff::detail::concat("shape mismatch in '", op, "' at node ", node, ": ",
                                       a.shape_str(), " vs ", b.shape_str()));
  };
  return {dim(a.rows(), b.rows()), dim(a.cols(), b.cols())};
}

/// Elementwise binary op with broadcasting. `f` computes the value, `da` and
/// `db` the local partials given (x, y, out).
template <typename F, typename DA, typename DB>
Var binary(Var a, Var b, const char* op, F f, DA da, DB db) {
  Tape& t = same_tape(a, b, op);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  auto [R, C] = broadcast_shape(A, B, op, t.size());
  Tensor out(R, C);
  const bool fast = A.same_shape(B);
  // Row broadcast of b over a (bias adds): a is [R,C], b is [1,C].
  const bool row_b = !fast && A.rows() == R && A.cols() == C && B.rows() == 1 && B.cols() == C;
  if (fast) {
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = f(A.data[i], B.data[i]);
  } else if (row_b) {
    const double* pa = A.data.data();
    const double* pb = B.data.data();
    double* po = out.data.data();
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) po[r * C + c] = f(pa[r * C + c], pb[c]);
  } else {
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c)
        out(r, c) = f(A(A.rows() == 1 ? 0 : r, A.cols() == 1 ? 0 : c),
                      B(B.rows() == 1 ? 0 : r, B.cols() == 1 ? 0 : c));
  }
  std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), op, {ia, ib}, [ia, ib, da, db, fast, row_b](Tape& tp, std::size_t self) {
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    const Tensor& O = tp.value(self);
    const Tensor& G = tp.grad_buffer(self);
    const bool ga = tp.needs_grad(ia), gb = tp.needs_grad(ib);
    Tensor* GA = ga ? &tp.grad_buffer(ia) : nullptr;
    Tensor* GB = gb ? &tp.grad_buffer(ib) : nullptr;
    if (fast) {
      for (std::size_t i = 0; i < O.size(); ++i) {
        if (ga) GA->data[i] += G.data[i] * da(A.data[i], B.data[i], O.data[i]);
        if (gb) GB->data[i] += G.data[i] * db(A.data[i], B.data[i], O.data[i]);
      }
      return;
    }
    if (row_b) {
      const std::size_t R = O.rows(), C = O.cols();
      const double *pa = A.data.data(), *pb = B.data.data(), *po = O.data.data(), *pg = G.data.data();
      double* ga_p = ga ? GA->data.data() : nullptr;
      double* gb_p = gb ? GB->data.data() : nullptr;
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t i = r * C + c;
          if (ga) ga_p[i] += pg[i] * da(pa[i], pb[c], po[i]);
          if (gb) gb_p[c] += pg[i] * db(pa[i], pb[c], po[i]);
        }
      return;
    }
    for (std::size_t r = 0; r < O.rows(); ++r)
      for (std::size_t c = 0; c < O.cols(); ++c) {
        std::size_t ar = A.rows() == 1 ? 0 : r, ac = A.cols() == 1 ? 0 : c;
        std::size_t br = B.rows() == 1 ? 0 : r, bc = B.cols() == 1 ? 0 : c;
        double x = A(ar, ac), y = B(br, bc), o = O(r, c), g = G(r, c);
        if (ga) (*GA)(ar, ac) += g * da(x, y, o);
        if (gb) (*GB)(br, bc) += g * db(x, y, o);
      }
  });
}

/// Elementwise unary op; `d` gives the local derivative from (x, out).
template <typename F, typename D>
Var unary(Var a, const char* op, F f, D d) {
  Tape& t = *a.tape();
  const Tensor& A = a.value();
  Tensor out = Tensor::zeros_like(A);
  for (std::size_t i = 0; i < A.size(); ++i) out.data[i] = f(A.data[i]);
  std::size_t ia = a.id();
  return t.record(std::move(out), op, {ia}, [ia, d](Tape& tp, std::size_t self) {
    const Tensor& A = tp.value(ia);
    const Tensor& O = tp.value(self);
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < A.size(); ++i) GA.data[i] += G.data[i] * d(A.data[i], O.data[i]);
  });
}

}  // namespace detail_ops

inline Var add(Var a, Var b) {
  return detail_ops::binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

inline Var sub(Var a, Var b) {
  return detail_ops::binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

inline Var mul(Var a, Var b) {
  return detail_ops::binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

inline Var div(Var a, Var b) {
  return detail_ops::binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

/// Elementwise minimum; ties route the gradient to the first operand.
inline Var minimum(Var a, Var b) {
  return detail_ops::binary(
      a, b, "minimum", [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }

inline Var scale(Var a, double c) {
  return detail_ops::unary(
      a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var add_scalar(Var a, double c) {
  return detail_ops::unary(
      a, "add_scalar", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline Var square(Var a) {
  return detail_ops::unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Var tanh(Var a) {
  return detail_ops::unary(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double o) { return 1.0 - o * o; });
}

inline Var sigmoid(Var a) {
  return detail_ops::unary(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double o) { return o * (1.0 - o); });
}

inline Var relu(Var a) {
  return detail_ops::unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

/// x * sigmoid(x).
inline Var silu(Var a) {
  return detail_ops::unary(
      a, "silu",
      [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

/// log(1 + exp(x)), overflow-safe.
inline double softplus_value(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline Var softplus(Var a) {
  return detail_ops::unary(
      a, "softplus", [](double x) { return softplus_value(x); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

inline Var exp(Var a) {
  return detail_ops::unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double o) { return o; });
}

inline Var log(Var a) {
  return detail_ops::unary(
      a, "log",
      [](double x) {
        if (x <= 0.0) throw Error("log of non-positive value");
        return std::log(x);
      },
      [](double x, double) { return 1.0 / x; });
}

/// Clamp with zero gradient outside [lo, hi].
inline Var clamp(Var a, double lo, double hi) {
  return detail_ops::unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

/// Matrix product [n,k] x [k,m].
inline Var matmul(Var a, Var b) {
  Tape& t = detail_ops::same_tape(a, b, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows())
    throw Error(cadiff::detail::concat("shape mismatch in 'matmul' at node ", t.size(), ": ",
                                       A.shape_str(), " x ", B.shape_str()));
  Tensor out(A.rows(), B.cols());
  detail_ops::view(out).noalias() = detail_ops::view(A) * detail_ops::view(B);
  std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), "matmul", {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    if (tp.needs_grad(ia))
      detail_ops::view(tp.grad_buffer(ia)).noalias() +=
          detail_ops::view(G) * detail_ops::view(tp.value(ib)).transpose();
    if (tp.needs_grad(ib))
      detail_ops::view(tp.grad_buffer(ib)).noalias() +=
          detail_ops::view(tp.value(ia)).transpose() * detail_ops::view(G);
  });
}

/// x W + b in one node: x [n,k], W [k,m], b [1,m].
inline Var affine(Var x, Var w, Var b) {
  Tape& t = detail_ops::same_tape(x, w, "affine");
  detail_ops::same_tape(x, b, "affine");
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& B = b.value();
  if (X.cols() != W.rows() || B.rows() != 1 || B.cols() != W.cols())
    throw Error(cadiff::detail::concat("shape mismatch in 'affine' at node ", t.size(), ": ", X.shape_str(),
                                       " x ", W.shape_str(), " + ", B.shape_str()));
  Tensor out(X.rows(), W.cols());
  auto O = detail_ops::view(out);
  O.noalias() = detail_ops::view(X) * detail_ops::view(W);
  O.rowwise() += detail_ops::view(B).row(0);
  std::size_t ix = x.id(), iw = w.id(), ib = b.id();
  return t.record(std::move(out), "affine", {ix, iw, ib}, [ix, iw, ib](Tape& tp, std::size_t self) {
    auto G = detail_ops::view(tp.grad_buffer(self));
    if (tp.needs_grad(ix))
      detail_ops::view(tp.grad_buffer(ix)).noalias() += G * detail_ops::view(tp.value(iw)).transpose();
    if (tp.needs_grad(iw))
      detail_ops::view(tp.grad_buffer(iw)).noalias() += detail_ops::view(tp.value(ix)).transpose() * G;
    if (tp.needs_grad(ib)) detail_ops::view(tp.grad_buffer(ib)).row(0) += G.colwise().sum();
  });
}

/// GRU state update from the gate pre-activations gx = x Wx + bx and
/// gh = h Wh + bh (both [n,3H], ordered update, reset, candidate):
/// z = sig(gx_z + gh_z), r = sig(gx_r + gh_r), c = tanh(gx_c + r gh_c),
/// h' = c + z (h - c). Gates are cached for the reverse pass.
inline Var gru_update(Var gx, Var gh, Var h) {
  using Arr = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Tape& t = detail_ops::same_tape(gx, gh, "gru_update");
  detail_ops::same_tape(gx, h, "gru_update");
  const Tensor& GX = gx.value();
  const Tensor& GH = gh.value();
  const Tensor& Hs = h.value();
  const auto n = static_cast<Eigen::Index>(Hs.rows()), H = static_cast<Eigen::Index>(Hs.cols());
  if (!GX.same_shape(GH) || GX.rows() != Hs.rows() || GX.cols() != 3 * Hs.cols())
    throw Error(cadiff::detail::concat("shape mismatch in 'gru_update' at node ", t.size(), ": ",
                                       GX.shape_str(), ", ", GH.shape_str(), ", ", Hs.shape_str()));
  auto X = detail_ops::view(GX).array();
  auto Y = detail_ops::view(GH).array();
  auto gates = std::make_shared<Arr>(n, 3 * H);
  auto z = gates->leftCols(H);
  auto r = gates->middleCols(H, H);
  auto c = gates->rightCols(H);
  z = 1.0 / (1.0 + (-(X.leftCols(H) + Y.leftCols(H))).exp());
  r = 1.0 / (1.0 + (-(X.middleCols(H, H) + Y.middleCols(H, H))).exp());
  // tanh(v) = 1 - 2 / (exp(2v) + 1), saturating cleanly at both ends.
  c = 1.0 - 2.0 / ((2.0 * (X.rightCols(H) + r * Y.rightCols(H))).exp() + 1.0);
  Tensor out(Hs.rows(), Hs.cols());
  detail_ops::view(out).array() = c + z * (detail_ops::view(Hs).array() - c);
  std::size_t ix = gx.id(), ih2 = gh.id(), ih = h.id();
  return t.record(std::move(out), "gru_update", {ix, ih2, ih}, [ix, ih2, ih, H, gates](Tape& tp, std::size_t self) {
    auto z = gates->leftCols(H);
    auto r = gates->middleCols(H, H);
    auto c = gates->rightCols(H);
    auto G = detail_ops::view(tp.grad_buffer(self)).array();
    auto Hv = detail_ops::view(tp.value(ih)).array();
    auto Yc = detail_ops::view(tp.value(ih2)).array().rightCols(H);
    Arr dc = G * (1.0 - z) * (1.0 - c * c);
    Arr dz = G * (Hv - c) * z * (1.0 - z);
    Arr dr = dc * Yc * r * (1.0 - r);
    if (tp.needs_grad(ix)) {
      auto D = detail_ops::view(tp.grad_buffer(ix)).array();
      D.leftCols(H) += dz;
      D.middleCols(H, H) += dr;
      D.rightCols(H) += dc;
    }
    if (tp.needs_grad(ih2)) {
      auto D = detail_ops::view(tp.grad_buffer(ih2)).array();
      D.leftCols(H) += dz;
      D.middleCols(H, H) += dr;
      D.rightCols(H) += dc * r;
    }
    if (tp.needs_grad(ih)) detail_ops::view(tp.grad_buffer(ih)).array() += G * z;
  });
}

/// Sum of all entries -> [1,1].
inline Var sum(Var a) {
  const Tensor& A = a.value();
  double s = std::accumulate(A.data.begin(), A.data.end(), 0.0);
  std::size_t ia = a.id();
  return a.tape()->record(Tensor::scalar(s), "sum", {ia}, [ia](Tape& tp, std::size_t self) {
    double g = tp.grad_buffer(self).data[0];
    for (auto& x : tp.grad_buffer(ia).data) x += g;
  });
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

/// Row-wise sum [n,m] -> [n,1].
inline Var sum_cols(Var a) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), 1);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    auto s = A.row_span(r);
    out(r, 0) = std::accumulate(s.begin(), s.end(), 0.0);
  }
  std::size_t ia = a.id();
  return a.tape()->record(std::move(out), "sum_cols", {ia}, [ia](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < GA.rows(); ++r)
      for (auto& x : GA.row_span(r)) x += G(r, 0);
  });
}

/// Horizontal concatenation of equal-row tensors.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  std::size_t rows = parts.front().rows(), cols = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    if (p.tape() != &t) throw Error("concat_cols: operands live on different tapes");
    if (p.rows() != rows)
      throw Error(cadiff::detail::concat("shape mismatch in 'concat_cols' at node ", t.size(),
                                         ": row counts ", rows, " vs ", p.rows()));
    cols += p.cols();
    ids.push_back(p.id());
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& P = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(P.row_span(r).begin(), P.row_span(r).end(), out.row_span(r).begin() + off);
    off += P.cols();
  }
  return t.record(std::move(out), "concat_cols", ids, [ids](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    std::size_t off = 0;
    for (auto id : ids) {
      std::size_t w = tp.value(id).cols();
      if (tp.needs_grad(id)) {
        Tensor& GP = tp.grad_buffer(id);
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < w; ++c) GP(r, c) += G(r, off + c);
      }
      off += w;
    }
  });
}

/// Columns [start, start+len).
inline Var slice_cols(Var a, std::size_t start, std::size_t len) {
  const Tensor& A = a.value();
  if (len == 0 || start + len > A.cols())
    throw Error(cadiff::detail::concat("slice_cols: range [", start, ",", start + len,
                                       ") outside ", A.shape_str()));
  Tensor out(A.rows(), len);
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < len; ++c) out(r, c) = A(r, start + c);
  std::size_t ia = a.id();
  return a.tape()->record(std::move(out), "slice_cols", {ia}, [ia, start, len](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    Tensor& GA = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < G.rows(); ++r)
      for (std::size_t c = 0; c < len; ++c) GA(r, start + c) += G(r, c);
  });
}

/// Copy of the value with no gradient path.
inline Var detach(Var a) { return a.tape()->constant(a.value()); }

}  // namespace cadiff::ad
