#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cadiff/numerics/tensor.hpp"
#include "cadiff/transport/simplex.hpp"

namespace cadiff {

/// Mean and per-dimension standard deviation; std = 0 is a point mass.
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t dim() const { return mean.size(); }

  void validate() const {
    if (mean.size() != std.size())
      throw Error(detail::concat("DiagGaussian: mean has ", mean.size(), " entries, std has ", std.size()));
    for (double s : std)
      if (!(s >= 0.0)) throw Error("DiagGaussian: negative or NaN std");
  }
};

/// Probabilities over a finite support indexed 0..n-1.
struct DiscreteDist {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }

  static DiscreteDist point(std::size_t n, std::size_t at) {
    DiscreteDist d{std::vector<double>(n, 0.0)};
    d.probs.at(at) = 1.0;
    return d;
  }

  void validate(double tol = 1e-12) const {
    if (probs.empty()) throw Error("DiscreteDist: empty support");
    double s = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw Error("DiscreteDist: negative or NaN probability");
      s += p;
    }
    if (std::abs(s - 1.0) > tol) throw Error(detail::concat("DiscreteDist: probabilities sum to ", s));
  }
};

/// Square matrix of pairwise ground distances (row-major).
struct CostMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  /// |x_i - y_j| between two real supports.
  static CostMatrix abs_diff(std::span<const double> xs, std::span<const double> ys) {
    CostMatrix c(xs.size(), ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j) c(i, j) = std::abs(xs[i] - ys[j]);
    return c;
  }

  double max() const { return data.empty() ? 0.0 : *std::max_element(data.begin(), data.end()); }
};

// ---------------------------------------------------------------------------
// Closed-form Gaussian distance

/// W2 between diagonal Gaussians, sqrt(|mu_a - mu_b|^2 + |std_a - std_b|^2).
inline double w2_diag_gaussian(const DiagGaussian& a, const DiagGaussian& b) {
  a.validate();
  b.validate();
  if (a.dim() != b.dim())
    throw Error(detail::concat("w2_diag_gaussian: dimension mismatch ", a.dim(), " vs ", b.dim()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double dm = a.mean[i] - b.mean[i], ds = a.std[i] - b.std[i];
    s += dm * dm + ds * ds;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Exact discrete transport

struct TransportPlan {
  double cost = 0.0;                 // min sum w_ij c_ij^p
  std::vector<double> plan;          // |mu| x |nu|, row-major
  std::vector<double> u, v;          // dual potentials: u_i + v_j <= c_ij^p
};

/// Solves the transportation LP with ground cost c^p. Zero-mass points are
/// removed before solving and restored (with zero flow) afterwards.
inline TransportPlan solve_transport(const DiscreteDist& mu, const DiscreteDist& nu, const CostMatrix& cost, double p) {
  if (!(p >= 1.0)) throw Error(detail::concat("transport: order p must be >= 1, got ", p));
  if (cost.rows != mu.size() || cost.cols != nu.size())
    throw Error(detail::concat("transport: cost is ", cost.rows, "x", cost.cols, " but supports are ", mu.size(), " and ",
                               nu.size()));
  double sm = 0.0, sn = 0.0;
  for (double x : mu.probs) {
    if (!(x >= 0.0)) throw Error("transport: negative probability in first marginal");
    sm += x;
  }
  for (double x : nu.probs) {
    if (!(x >= 0.0)) throw Error("transport: negative probability in second marginal");
    sn += x;
  }
  if (std::abs(sm - sn) > 1e-9)
    throw Error(detail::concat("transport: infeasible marginals, masses ", sm, " and ", sn));
  for (double c : cost.data)
    if (!(c >= 0.0)) throw Error("transport: negative or NaN cost entry");

  std::vector<std::size_t> I, J;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (mu.probs[i] > 0.0) I.push_back(i);
  for (std::size_t j = 0; j < nu.size(); ++j)
    if (nu.probs[j] > 0.0) J.push_back(j);

  auto cp = [&](std::size_t i, std::size_t j) { return p == 1.0 ? cost(i, j) : std::pow(cost(i, j), p); };

  TransportPlan out;
  out.plan.assign(mu.size() * nu.size(), 0.0);
  out.u.assign(mu.size(), 0.0);
  out.v.assign(nu.size(), 0.0);

  if (I.size() == 1 || J.size() == 1) {
    // A point mass admits only the product coupling.
    for (auto i : I)
      for (auto j : J) {
        const double w = I.size() == 1 ? nu.probs[j] : mu.probs[i];
        out.plan[i * nu.size() + j] = w;
        out.cost += w * cp(i, j);
        if (I.size() == 1)
          out.v[j] = cp(i, j);
        else
          out.u[i] = cp(i, j);
      }
  } else {
    // Rows: the |I| source constraints and all but the last sink constraint
    // (the dropped one is implied by equal masses).
    const std::size_t ni = I.size(), nj = J.size();
    lp::Simplex lp(ni + nj - 1, ni * nj);
    for (std::size_t a = 0; a < ni; ++a)
      for (std::size_t b = 0; b < nj; ++b) {
        const std::size_t col = a * nj + b;
        lp.c(col) = cp(I[a], J[b]);
        lp.a(a, col) = 1.0;
        if (b + 1 < nj) lp.a(ni + b, col) = 1.0;
      }
    for (std::size_t a = 0; a < ni; ++a) lp.b(a) = mu.probs[I[a]];
    for (std::size_t b = 0; b + 1 < nj; ++b) lp.b(ni + b) = nu.probs[J[b]];
    auto sol = lp.solve();
    for (std::size_t a = 0; a < ni; ++a)
      for (std::size_t b = 0; b < nj; ++b) out.plan[I[a] * nu.size() + J[b]] = std::max(sol.x[a * nj + b], 0.0);
    out.cost = std::max(sol.objective, 0.0);
    for (std::size_t a = 0; a < ni; ++a) out.u[I[a]] = sol.dual[a];
    for (std::size_t b = 0; b + 1 < nj; ++b) out.v[J[b]] = sol.dual[ni + b];
  }
  return out;
}

/// W_p(mu, nu) under the ground cost: (min over couplings sum w_ij c_ij^p)^(1/p).
inline double wp_discrete(const DiscreteDist& mu, const DiscreteDist& nu, const CostMatrix& cost, double p) {
  const double c = solve_transport(mu, nu, cost, p).cost;
  return p == 1.0 ? c : std::pow(c, 1.0 / p);
}

/// E_mu[f] - E_nu[f] for an f that is 1-Lipschitz under `cost`, a lower
/// bound on W1 by duality.
inline double w1_dual_check(const DiscreteDist& mu, const DiscreteDist& nu, const CostMatrix& cost,
                            std::span<const double> f, double tol = 1e-12) {
  const std::size_t n = f.size();
  if (cost.rows != n || cost.cols != n || mu.size() != n || nu.size() != n)
    throw Error("w1_dual_check: supports, cost and potential must share one size");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (std::abs(f[i] - f[j]) > cost(i, j) + tol)
        throw Error(detail::concat("w1_dual_check: potential is not 1-Lipschitz on pair (", i, ", ", j, "): |",
                                   f[i], " - ", f[j], "| > ", cost(i, j)));
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) e += (mu.probs[i] - nu.probs[i]) * f[i];
  return e;
}

/// An optimal W1 potential, f(x) = min_j (c(x, j) - v_j), built from the LP
/// duals. 1-Lipschitz whenever the cost is a metric.
inline std::vector<double> w1_optimal_potential(const DiscreteDist& mu, const DiscreteDist& nu, const CostMatrix& cost) {
  auto tp = solve_transport(mu, nu, cost, 1.0);
  std::vector<double> f(cost.rows, 0.0);
  for (std::size_t i = 0; i < cost.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cost.cols; ++j)
      if (nu.probs[j] > 0.0) best = std::min(best, cost(i, j) - tp.v[j]);
    f[i] = best;
  }
  return f;
}

// ---------------------------------------------------------------------------
// 1D empirical transport

/// (sum |x_(i) - y_(i)|^p / n)^(1/p) over sorted samples; the sorted coupling
/// is optimal on the line.
inline double wp_empirical_1d(std::vector<double> xs, std::vector<double> ys, double p) {
  if (xs.empty() || ys.empty()) throw Error("wp_empirical_1d: empty sample");
  if (xs.size() != ys.size())
    throw Error(detail::concat("wp_empirical_1d: sample sizes differ (", xs.size(), " vs ", ys.size(), ")"));
  if (!(p >= 1.0)) throw Error("wp_empirical_1d: order p must be >= 1");
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += std::pow(std::abs(xs[i] - ys[i]), p);
  return std::pow(s / static_cast<double>(xs.size()), 1.0 / p);
}

}  // namespace cadiff
