#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "cadiff/adm/mixture.hpp"
#include "cadiff/bisim.hpp"
#include "cadiff/harness/config.hpp"
#include "cadiff/numerics/gradcheck.hpp"
#include "cadiff/numerics/random.hpp"
#include "cadiff/transport.hpp"

namespace cadiff {

/// One bound checked over a family of seeded instances. `measured` is the
/// worst value seen, `bound` the value it must not exceed.
struct SuiteCheck {
  SuiteCheck() = default;
  explicit SuiteCheck(std::string n) : name(std::move(n)) {}

  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  std::size_t instances = 0;
  std::vector<std::uint64_t> violating_seeds;

  bool pass() const { return violating_seeds.empty() && instances > 0; }
  double slack() const { return bound - measured; }

  /// Records one instance; a value above `limit` marks its seed.
  void observe(double value, double limit, std::uint64_t seed) {
    if (instances == 0 || value - limit > measured - bound) {
      measured = value;
      bound = limit;
    }
    ++instances;
    if (!(value <= limit)) violating_seeds.push_back(seed);
  }
};

struct SuiteReport {
  std::string suite;
  std::vector<SuiteCheck> checks;
  double seconds = 0.0;

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass()) return false;
    return !checks.empty();
  }

  const SuiteCheck& check(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw Error("verify: no check named '" + name + "' in suite '" + suite + "'");
  }
};

inline nlohmann::ordered_json to_json(const SuiteReport& r) {
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name},
                      {"pass", c.pass()},
                      {"measured", c.measured},
                      {"bound", c.bound},
                      {"slack", c.slack()},
                      {"instances", c.instances},
                      {"violating_seeds", c.violating_seeds}});
  return {{"suite", r.suite}, {"pass", r.pass()}, {"seconds", r.seconds}, {"checks", checks}};
}

/// Parameters shared by the oracle suites; defaults are the acceptance ones.
struct VerifyOptions {
  std::uint64_t seed = 0;
  std::size_t mdps = 100;
  std::size_t model_pairs = 50;
  std::vector<double> shifts{0.01, 0.05, 0.1};  // mass shifts, cycled over the model pairs
  std::size_t transport_pairs = 100;
  std::size_t gaussian_samples = 100000;
  double c_r = 0.4;
  double c_s = 0.5;
  double gamma = 0.3;
  double value_tol = 1e-6;
  double contraction_tol = 1e-9;
  double diameter_tol = 1e-9;
  double model_tol = 1e-6;
  double theorem_seconds = 60.0;
  MixtureRunConfig mixture;
  double mixture_ratio = 0.5;
  double mixture_roundtrip = 1e-10;
  double mixture_seconds = 300.0;
  std::size_t gradchecks = 200;
  double gradcheck_tol = 1e-4;
};

namespace detail {

inline double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline DiscreteDist random_dist(Rng& rng, std::size_t n) {
  DiscreteDist d{std::vector<double>(n)};
  double s = 0.0;
  for (auto& p : d.probs) {
    p = uniform(rng, 0, 1) < 0.3 ? 0.0 : uniform(rng, 0.0, 1.0);
    s += p;
  }
  if (s == 0.0) {
    d.probs[0] = 1.0;
    return d;
  }
  for (auto& p : d.probs) p /= s;
  return d;
}

// Euclidean distances between random points in the plane.
inline CostMatrix random_metric(Rng& rng, std::size_t n) {
  std::vector<std::pair<double, double>> pts(n);
  for (auto& [x, y] : pts) x = uniform(rng, -1, 1), y = uniform(rng, -1, 1);
  CostMatrix c(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
  return c;
}

inline RandomMdpOptions suite_mdp_options(const VerifyOptions& o) {
  RandomMdpOptions m;
  m.max_states = 6;
  m.max_actions = 3;
  m.gamma = o.gamma;
  return m;
}

}  // namespace detail

/// Monotonicity of W_p in p, weak duality of the W1 dual, and the diagonal
/// Gaussian closed form against sorted-sample estimates.
inline SuiteReport verify_wasserstein(const VerifyOptions& o = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport rep{"wasserstein", {}, 0.0};
  SuiteCheck mono{"wp_monotone_in_p"}, dual{"w1_dual_below_primal"}, gauss{"w2_gaussian_vs_empirical"};
  for (std::size_t i = 0; i < o.transport_pairs; ++i) {
    const std::uint64_t seed = derive_seed(o.seed, 1000 + i);
    Rng rng(seed);
    const std::size_t n = 2 + i % 6;
    auto c = detail::random_metric(rng, n);
    auto mu = detail::random_dist(rng, n), nu = detail::random_dist(rng, n);
    // Largest drop between consecutive orders; must not be positive.
    double prev = 0.0, worst_drop = -1e300;
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      const double w = wp_discrete(mu, nu, c, p);
      if (p > 1.0) worst_drop = std::max(worst_drop, prev - w);
      prev = w;
    }
    mono.observe(worst_drop, 1e-9, seed);

    const double w1 = wp_discrete(mu, nu, c, 1.0);
    double best = w1_dual_check(mu, nu, c, w1_optimal_potential(mu, nu, c));
    for (int k = 0; k < 20; ++k) {
      // min_j (g_j + c(x, j)) is 1-Lipschitz for any g.
      std::vector<double> g(n), f(n, 1e300);
      for (auto& x : g) x = uniform(rng, -1, 1);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) f[a] = std::min(f[a], g[b] + c(a, b));
      best = std::max(best, w1_dual_check(mu, nu, c, f));
    }
    dual.observe(best, w1 + 1e-9, seed);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const std::uint64_t seed = derive_seed(o.seed, 2000 + i);
    Rng rng(seed);
    // Means at least 1 apart keep W2 well away from 0, where a relative
    // error would measure sampling noise only.
    const double m1 = uniform(rng, -1, 1), s1 = uniform(rng, 0.5, 2.0);
    const double m2 = m1 + (uniform(rng, 0, 1) < 0.5 ? -1 : 1) * uniform(rng, 1.0, 2.0), s2 = uniform(rng, 0.5, 2.0);
    std::vector<double> xs(o.gaussian_samples), ys(o.gaussian_samples);
    for (auto& x : xs) x = m1 + s1 * standard_normal(rng);
    for (auto& y : ys) y = m2 + s2 * standard_normal(rng);
    const double closed = w2_diag_gaussian({{m1}, {s1}}, {{m2}, {s2}});
    gauss.observe(std::abs(wp_empirical_1d(xs, ys, 2.0) - closed) / closed, 0.02, seed);
  }
  rep.checks = {mono, dual, gauss};
  rep.seconds = detail::elapsed_since(t0);
  return rep;
}

/// Contraction rate and diameter of the exact metric on the random MDP suite.
inline SuiteReport verify_bisim(const VerifyOptions& o = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport rep{"bisim", {}, 0.0};
  SuiteCheck rate{"contraction_rate"}, diam{"diameter"};
  for (std::size_t i = 0; i < o.mdps; ++i) {
    const std::uint64_t seed = derive_seed(o.seed, 3000 + i);
    Rng rng(seed);
    const auto m = random_finite_mdp(rng, detail::suite_mdp_options(o));
    const double p = i % 2 ? 2.0 : 1.0;
    rate.observe(verify_contraction(m, o.c_r, o.c_s, p).observed_rate, o.c_r + o.c_s + o.contraction_tol, seed);
    const auto bm = exact_bisim(m, o.c_r, o.c_s, p, 1e-12);
    double dmax = 0.0;
    for (double v : bm.d.data) dmax = std::max(dmax, v);
    diam.observe(dmax, bisim_diameter_bound(m, o.c_r, o.c_s) + o.diameter_tol, seed);
  }
  rep.checks = {rate, diam};
  rep.seconds = detail::elapsed_since(t0);
  return rep;
}

/// Value-difference bound C_r |V_i - V_j| <= d(i, j) on the random MDP suite,
/// within the time budget.
inline SuiteReport verify_theorem1(const VerifyOptions& o = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport rep{"theorem1", {}, 0.0};
  SuiteCheck bound{"value_difference_bound"}, time{"runtime_seconds"};
  for (std::size_t i = 0; i < o.mdps; ++i) {
    const std::uint64_t seed = derive_seed(o.seed, 3000 + i);
    Rng rng(seed);
    const auto m = random_finite_mdp(rng, detail::suite_mdp_options(o));
    const double p = i % 2 ? 2.0 : 1.0;
    bound.observe(verify_value_bound(m, o.c_r, o.c_s, p, 1e-12).max_violation, o.value_tol, seed);
  }
  rep.seconds = detail::elapsed_since(t0);
  time.observe(rep.seconds, o.theorem_seconds, o.seed);
  rep.checks = {bound, time};
  return rep;
}

/// Model-error bound for (mdp, mass-shifted mdp) pairs.
inline SuiteReport verify_corollary1(const VerifyOptions& o = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport rep{"corollary1", {}, 0.0};
  SuiteCheck bound{"model_error_bound"};
  for (std::size_t i = 0; i < o.model_pairs; ++i) {
    const std::uint64_t seed = derive_seed(o.seed, 4000 + i);
    Rng rng(seed);
    const auto m = random_finite_mdp(rng, detail::suite_mdp_options(o));
    const double eps = o.shifts.at(i % o.shifts.size());
    const auto r = verify_model_error_bound(m, mass_shift(m, eps, rng), o.c_r, o.c_s, 1e-12);
    bound.observe(r.lhs, r.rhs + o.model_tol, seed);
  }
  rep.checks = {bound};
  rep.seconds = detail::elapsed_since(t0);
  return rep;
}

/// Denoising quality on the two-component mixture.
inline SuiteReport verify_diffusion(const VerifyOptions& o = {}) {
  SuiteReport rep{"diffusion", {}, 0.0};
  const auto r = run_mixture_experiment(o.mixture);
  SuiteCheck ratio{"w1_ratio"}, trip{"oracle_roundtrip"}, time{"runtime_seconds"};
  ratio.observe(r.ratio(), o.mixture_ratio, o.mixture.seed);
  trip.observe(r.roundtrip_error, o.mixture_roundtrip, o.mixture.seed);
  time.observe(r.seconds, o.mixture_seconds, o.mixture.seed);
  rep.checks = {ratio, trip, time};
  rep.seconds = r.seconds;
  return rep;
}

/// Reverse-mode gradients of random graphs against central differences.
inline SuiteReport verify_autodiff(const VerifyOptions& o = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport rep{"autodiff", {}, 0.0};
  SuiteCheck grad{"relative_error"};
  for (std::size_t i = 0; i < o.gradchecks; ++i) {
    const std::uint64_t seed = derive_seed(o.seed, 5000 + i);
    Rng rng(seed);
    ParamSet ps;
    auto g = RandomGraph::make(ps, rng);
    auto r = gradient_check(ps, [&](ad::Tape& t, const ParamSet& p) { return g(t, p); });
    // Strict inequality: a relative error equal to the tolerance fails.
    grad.observe(r.max_rel_error, std::nextafter(o.gradcheck_tol, 0.0), seed);
  }
  rep.checks = {grad};
  rep.seconds = detail::elapsed_since(t0);
  return rep;
}

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{"wasserstein", "bisim", "theorem1", "corollary1", "diffusion", "autodiff"};
  return names;
}

inline SuiteReport run_verify_suite(const std::string& name, const VerifyOptions& o = {}) {
  if (name == "wasserstein") return verify_wasserstein(o);
  if (name == "bisim") return verify_bisim(o);
  if (name == "theorem1") return verify_theorem1(o);
  if (name == "corollary1") return verify_corollary1(o);
  if (name == "diffusion") return verify_diffusion(o);
  if (name == "autodiff") return verify_autodiff(o);
  throw ConfigError("verify: unknown suite '" + name + "'");
}

}  // namespace cadiff
