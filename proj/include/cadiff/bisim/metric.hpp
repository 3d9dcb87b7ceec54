#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "cadiff/bisim/mdp.hpp"
#include "cadiff/transport/wasserstein.hpp"

namespace cadiff {

/// Symmetric state-pair distance with the iteration record that produced it.
struct BisimMetric {
  CostMatrix d;
  double C_r = 0.0, C_s = 0.0, p = 1.0;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<double> residuals;  // sup-norm change per iteration

  double max() const { return d.max(); }
};

inline void check_weights(double C_r, double C_s) {
  if (!(C_r > 0.0 && C_r < 1.0 && C_s > 0.0 && C_s < 1.0))
    throw Error(detail::concat("bisim: weights C_r=", C_r, ", C_s=", C_s, " must lie in (0,1)"));
  if (!(C_r + C_s < 1.0)) throw Error(detail::concat("bisim: C_r + C_s = ", C_r + C_s, " must be < 1"));
}

inline constexpr std::size_t kBisimMaxIterations = 10000;

/// Fixed point of
///   d(i,j) = max_a C_r W_p(|.|)(R(i,a), R(j,a)) + C_s W_p(d)(P(i,a), P(j,a))
/// by iteration from `d0` (zero by default) until the sup-norm change is <= tol.
inline BisimMetric exact_bisim(const FiniteMDP& mdp, double C_r, double C_s, double p, double tol,
                               const std::optional<CostMatrix>& d0 = std::nullopt) {
  mdp.validate();
  check_weights(C_r, C_s);
  if (!(tol > 0.0)) throw Error("exact_bisim: tolerance must be positive");
  const std::size_t n = mdp.n_states, na = mdp.n_actions;

  // The reward term does not depend on d.
  std::vector<double> rew(n * n * na, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t a = 0; a < na; ++a)
        rew[(i * n + j) * na + a] = C_r * reward_wp(mdp.reward(i, a), mdp.reward(j, a), p);

  BisimMetric out;
  out.C_r = C_r, out.C_s = C_s, out.p = p;
  out.d = d0 ? *d0 : CostMatrix(n, n);
  if (out.d.rows != n || out.d.cols != n) throw Error("exact_bisim: initial metric has wrong size");
  for (std::size_t it = 1; it <= kBisimMaxIterations; ++it) {
    CostMatrix next(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double best = 0.0;
        for (std::size_t a = 0; a < na; ++a) {
          const double v = rew[(i * n + j) * na + a] + C_s * wp_discrete(mdp.trans(i, a), mdp.trans(j, a), out.d, p);
          best = std::max(best, v);
        }
        next(i, j) = next(j, i) = best;
      }
    double res = 0.0;
    for (std::size_t k = 0; k < next.data.size(); ++k) res = std::max(res, std::abs(next.data[k] - out.d.data[k]));
    out.d = std::move(next);
    out.iterations = it;
    out.residual = res;
    out.residuals.push_back(res);
    if (res <= tol) return out;
  }
  throw Error(detail::concat("exact_bisim: no convergence after ", kBisimMaxIterations, " iterations, residual ",
                             out.residual));
}

/// C_r (r_max - r_min) / (1 - C_s): the largest distance the fixed point can reach.
inline double bisim_diameter_bound(const FiniteMDP& mdp, double C_r, double C_s) {
  return C_r * (mdp.reward_max() - mdp.reward_min()) / (1.0 - C_s);
}

/// Optimal values V(s) = max_a E[r] + gamma sum_s' P V(s').
inline std::vector<double> value_iteration(const FiniteMDP& mdp, double tol) {
  mdp.validate();
  if (!(tol > 0.0)) throw Error("value_iteration: tolerance must be positive");
  std::vector<double> V(mdp.n_states, 0.0), next(mdp.n_states);
  for (;;) {
    double res = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      double best = -1e300;
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        double q = mdp.reward(s, a).mean();
        const auto& pr = mdp.trans(s, a).probs;
        for (std::size_t t = 0; t < mdp.n_states; ++t) q += mdp.gamma * pr[t] * V[t];
        best = std::max(best, q);
      }
      next[s] = best;
      res = std::max(res, std::abs(best - V[s]));
    }
    V.swap(next);
    if (res <= tol) return V;
  }
}

/// Values of a fixed stochastic policy pi[s][a].
inline std::vector<double> policy_evaluation(const FiniteMDP& mdp, const std::vector<std::vector<double>>& pi,
                                             double tol) {
  mdp.validate();
  if (pi.size() != mdp.n_states) throw Error("policy_evaluation: policy has wrong number of states");
  std::vector<double> V(mdp.n_states, 0.0), next(mdp.n_states);
  for (;;) {
    double res = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      double v = 0.0;
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        double q = mdp.reward(s, a).mean();
        const auto& pr = mdp.trans(s, a).probs;
        for (std::size_t t = 0; t < mdp.n_states; ++t) q += mdp.gamma * pr[t] * V[t];
        v += pi[s].at(a) * q;
      }
      next[s] = v;
      res = std::max(res, std::abs(v - V[s]));
    }
    V.swap(next);
    if (res <= tol) return V;
  }
}

// ---------------------------------------------------------------------------
// Verification reports

struct ValueBoundReport {
  double max_violation = 0.0;  // max_ij C_r |V_i - V_j| - d(i,j)
  std::size_t pairs_checked = 0;
};

/// Checks C_r |V_i - V_j| <= d(i,j) for optimal values. Requires C_s >= gamma.
inline ValueBoundReport verify_value_bound(const FiniteMDP& mdp, double C_r, double C_s, double p, double tol) {
  if (C_s < mdp.gamma)
    throw Error(detail::concat("verify_value_bound: hypothesis C_s >= gamma fails (C_s=", C_s, ", gamma=", mdp.gamma, ")"));
  auto bm = exact_bisim(mdp, C_r, C_s, p, tol);
  auto V = value_iteration(mdp, tol);
  ValueBoundReport rep;
  rep.max_violation = -1e300;
  for (std::size_t i = 0; i < mdp.n_states; ++i)
    for (std::size_t j = i + 1; j < mdp.n_states; ++j) {
      rep.max_violation = std::max(rep.max_violation, C_r * std::abs(V[i] - V[j]) - bm.d(i, j));
      ++rep.pairs_checked;
    }
  return rep;
}

struct ContractionReport {
  double observed_rate = 0.0;  // largest residual ratio over measured iterations
  std::size_t ratios = 0;
  std::size_t iterations = 0;
};

/// Measures ||d_{t+1} - d_t|| / ||d_t - d_{t-1}|| along the fixed-point
/// iteration. Ratios whose denominator is below `floor` are dominated by LP
/// round-off and are skipped; the first `burn_in` ratios are skipped too.
inline ContractionReport verify_contraction(const FiniteMDP& mdp, double C_r, double C_s, double p,
                                            double tol = 1e-12, std::size_t burn_in = 0, double floor = 1e-9) {
  auto bm = exact_bisim(mdp, C_r, C_s, p, tol);
  ContractionReport rep;
  rep.iterations = bm.iterations;
  for (std::size_t t = 1 + burn_in; t < bm.residuals.size(); ++t) {
    if (bm.residuals[t - 1] < floor) continue;
    rep.observed_rate = std::max(rep.observed_rate, bm.residuals[t] / bm.residuals[t - 1]);
    ++rep.ratios;
  }
  return rep;
}

struct ModelErrorReport {
  double lhs = 0.0;        // ||d - d_hat||_inf
  double e_phi = 0.0;      // max_{s,a} W1(R, R_hat)
  double e_theta = 0.0;    // max_{s,a} W1(d)(P, P_hat)
  double rhs = 0.0;        // (2 C_r E_phi + 2 C_s E_theta) / (1 - C_r - C_s)
  double rhs_tight = 0.0;  // same numerator over (1 - C_s)
  double slack() const { return rhs - lhs; }
};

/// Compares the p=1 metrics of an MDP and a perturbed copy against the
/// model-error bound.
inline ModelErrorReport verify_model_error_bound(const FiniteMDP& mdp, const FiniteMDP& hat, double C_r, double C_s,
                                                 double tol) {
  if (mdp.n_states != hat.n_states || mdp.n_actions != hat.n_actions)
    throw Error("verify_model_error_bound: state/action sets differ");
  for (std::size_t k = 0; k < mdp.R.size(); ++k)
    if (mdp.R[k].values != hat.R[k].values)
      throw Error(detail::concat("verify_model_error_bound: reward support mismatch in row ", k));
  auto d = exact_bisim(mdp, C_r, C_s, 1.0, tol);
  auto dh = exact_bisim(hat, C_r, C_s, 1.0, tol);
  ModelErrorReport rep;
  for (std::size_t k = 0; k < d.d.data.size(); ++k) rep.lhs = std::max(rep.lhs, std::abs(d.d.data[k] - dh.d.data[k]));
  for (std::size_t k = 0; k < mdp.P.size(); ++k) {
    rep.e_phi = std::max(rep.e_phi, reward_wp(mdp.R[k], hat.R[k], 1.0));
    rep.e_theta = std::max(rep.e_theta, wp_discrete(mdp.P[k], hat.P[k], d.d, 1.0));
  }
  const double num = 2.0 * C_r * rep.e_phi + 2.0 * C_s * rep.e_theta;
  rep.rhs = num / (1.0 - C_r - C_s);
  rep.rhs_tight = num / (1.0 - C_s);
  return rep;
}

}  // namespace cadiff
