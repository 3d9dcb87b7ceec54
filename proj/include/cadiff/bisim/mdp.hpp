#pragma once

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cadiff/numerics/random.hpp"
#include "cadiff/transport/wasserstein.hpp"

namespace cadiff {

/// Finite reward distribution: values in [0,1] with probabilities.
struct RewardDist {
  std::vector<double> values;
  std::vector<double> probs;

  double mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) m += values[k] * probs[k];
    return m;
  }
};

/// W_p between two reward distributions under |r - r'|.
inline double reward_wp(const RewardDist& a, const RewardDist& b, double p) {
  return wp_discrete({a.probs}, {b.probs}, CostMatrix::abs_diff(a.values, b.values), p);
}

/// Tabular MDP; entries are indexed by s * n_actions + a.
struct FiniteMDP {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  double gamma = 0.9;
  std::vector<DiscreteDist> P;
  std::vector<RewardDist> R;

  std::size_t idx(std::size_t s, std::size_t a) const { return s * n_actions + a; }
  const DiscreteDist& trans(std::size_t s, std::size_t a) const { return P[idx(s, a)]; }
  const RewardDist& reward(std::size_t s, std::size_t a) const { return R[idx(s, a)]; }

  void validate() const {
    if (n_states == 0 || n_actions == 0) throw Error("FiniteMDP: need at least one state and one action");
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error(detail::concat("FiniteMDP: gamma ", gamma, " outside (0,1)"));
    if (P.size() != n_states * n_actions || R.size() != n_states * n_actions)
      throw Error("FiniteMDP: table sizes do not match states x actions");
    for (std::size_t k = 0; k < P.size(); ++k) {
      if (P[k].size() != n_states)
        throw Error(detail::concat("FiniteMDP: transition row ", k, " has ", P[k].size(), " entries"));
      try {
        P[k].validate();
      } catch (const Error& e) {
        throw Error(detail::concat("FiniteMDP: transition row ", k, ": ", e.what()));
      }
      const auto& r = R[k];
      if (r.values.empty() || r.values.size() != r.probs.size())
        throw Error(detail::concat("FiniteMDP: malformed reward distribution ", k));
      for (double v : r.values)
        if (!(v >= 0.0 && v <= 1.0)) throw Error(detail::concat("FiniteMDP: reward ", v, " outside [0,1]"));
      try {
        DiscreteDist{r.probs}.validate();
      } catch (const Error& e) {
        throw Error(detail::concat("FiniteMDP: reward row ", k, ": ", e.what()));
      }
    }
  }

  double reward_min() const {
    double m = 1.0;
    for (const auto& r : R)
      for (std::size_t k = 0; k < r.values.size(); ++k)
        if (r.probs[k] > 0.0) m = std::min(m, r.values[k]);
    return m;
  }

  double reward_max() const {
    double m = 0.0;
    for (const auto& r : R)
      for (std::size_t k = 0; k < r.values.size(); ++k)
        if (r.probs[k] > 0.0) m = std::max(m, r.values[k]);
    return m;
  }
};

struct RandomMdpOptions {
  std::size_t max_states = 6;
  std::size_t max_actions = 3;
  double gamma = 0.3;
  bool deterministic = false;   // one-hot transitions, single-valued rewards
  double sparsity = 0.3;        // chance a transition entry is zeroed
  std::size_t max_reward_support = 3;
};

inline std::vector<double> random_simplex(Rng& rng, std::size_t n, double sparsity) {
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& x : p) {
    x = uniform(rng, 0.0, 1.0) < sparsity ? 0.0 : -std::log(uniform(rng, 1e-12, 1.0));
    s += x;
  }
  if (s == 0.0) {
    p[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)] = 1.0;
    return p;
  }
  for (auto& x : p) x /= s;
  return p;
}

/// Seeded random MDP with 2..max_states states and 1..max_actions actions.
inline FiniteMDP random_finite_mdp(Rng& rng, const RandomMdpOptions& opt = {}) {
  FiniteMDP m;
  m.n_states = std::uniform_int_distribution<std::size_t>(2, opt.max_states)(rng);
  m.n_actions = std::uniform_int_distribution<std::size_t>(1, opt.max_actions)(rng);
  m.gamma = opt.gamma;
  for (std::size_t k = 0; k < m.n_states * m.n_actions; ++k) {
    if (opt.deterministic) {
      m.P.push_back(DiscreteDist::point(m.n_states, std::uniform_int_distribution<std::size_t>(0, m.n_states - 1)(rng)));
      m.R.push_back({{uniform(rng, 0.0, 1.0)}, {1.0}});
      continue;
    }
    m.P.push_back({random_simplex(rng, m.n_states, opt.sparsity)});
    const std::size_t nr = std::uniform_int_distribution<std::size_t>(1, opt.max_reward_support)(rng);
    RewardDist r;
    for (std::size_t i = 0; i < nr; ++i) r.values.push_back(uniform(rng, 0.0, 1.0));
    r.probs = random_simplex(rng, nr, 0.0);
    m.R.push_back(std::move(r));
  }
  return m;
}

/// Moves up to `eps` probability mass inside one random transition row and
/// one random reward distribution (when it has more than one value).
inline FiniteMDP mass_shift(const FiniteMDP& m, double eps, Rng& rng) {
  FiniteMDP h = m;
  auto shift = [&](std::vector<double>& p) {
    if (p.size() < 2) return;
    std::vector<std::size_t> donors;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] > 0.0) donors.push_back(i);
    const std::size_t from = donors[std::uniform_int_distribution<std::size_t>(0, donors.size() - 1)(rng)];
    std::size_t to = std::uniform_int_distribution<std::size_t>(0, p.size() - 2)(rng);
    if (to >= from) ++to;
    const double moved = std::min(eps, p[from]);
    p[from] -= moved;
    p[to] += moved;
  };
  std::uniform_int_distribution<std::size_t> pick(0, m.P.size() - 1);
  shift(h.P[pick(rng)].probs);
  shift(h.R[pick(rng)].probs);
  return h;
}

// Text format:
//   states actions gamma
//   one line per (s, a), row-major:  p_0 ... p_{n-1} | r_1 q_1 r_2 q_2 ...
// Blank lines and '#' comments are ignored.

inline void write_mdp(std::ostream& os, const FiniteMDP& m) {
  os << std::setprecision(17);
  os << m.n_states << ' ' << m.n_actions << ' ' << m.gamma << '\n';
  for (std::size_t s = 0; s < m.n_states; ++s)
    for (std::size_t a = 0; a < m.n_actions; ++a) {
      for (double p : m.trans(s, a).probs) os << p << ' ';
      os << '|';
      const auto& r = m.reward(s, a);
      for (std::size_t k = 0; k < r.values.size(); ++k) os << ' ' << r.values[k] << ' ' << r.probs[k];
      os << '\n';
    }
}

inline FiniteMDP read_mdp(std::istream& is) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw Error("read_mdp: empty input");
  FiniteMDP m;
  {
    std::istringstream hs(lines[0]);
    if (!(hs >> m.n_states >> m.n_actions >> m.gamma)) throw Error("read_mdp: bad header, expected 'states actions gamma'");
  }
  if (lines.size() != 1 + m.n_states * m.n_actions)
    throw Error(detail::concat("read_mdp: expected ", m.n_states * m.n_actions, " rows, found ", lines.size() - 1));
  for (std::size_t k = 1; k < lines.size(); ++k) {
    auto bar = lines[k].find('|');
    if (bar == std::string::npos) throw Error(detail::concat("read_mdp: row ", k, " lacks '|'"));
    std::istringstream ps(lines[k].substr(0, bar)), rs(lines[k].substr(bar + 1));
    DiscreteDist d;
    for (double x; ps >> x;) d.probs.push_back(x);
    if (!ps.eof()) throw Error(detail::concat("read_mdp: row ", k, ": unparsable probability"));
    RewardDist r;
    for (double v, q; rs >> v;) {
      if (!(rs >> q)) throw Error(detail::concat("read_mdp: row ", k, ": reward value without probability"));
      r.values.push_back(v);
      r.probs.push_back(q);
    }
    if (!rs.eof()) throw Error(detail::concat("read_mdp: row ", k, ": unparsable reward pair"));
    m.P.push_back(std::move(d));
    m.R.push_back(std::move(r));
  }
  m.validate();
  return m;
}

}  // namespace cadiff
