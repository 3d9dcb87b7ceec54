#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "cadiff/agent.hpp"

using namespace cadiff;

namespace {

SacConfig small_config() {
  SacConfig c;
  c.state_dim = 3;
  c.action_dim = 2;
  c.hidden = 16;
  return c;
}

SacBatch random_batch(std::size_t n, const SacConfig& c, Rng& rng) {
  SacBatch b{Tensor(n, c.state_dim), Tensor(n, c.action_dim), Tensor(n, 1), Tensor(n, c.state_dim), Tensor(n, 1)};
  for (auto* t : {&b.s, &b.s2})
    for (auto& v : t->data) v = uniform(rng, -1, 1);
  for (auto& v : b.a.data) v = uniform(rng, -0.9, 0.9);
  for (auto& v : b.r.data) v = uniform(rng, 0, 1);
  return b;
}

double max_abs_diff(const ParamSet& a, const ParamSet& b) {
  double m = 0.0;
  for (const auto& [name, t] : a.values)
    for (std::size_t i = 0; i < t.size(); ++i) m = std::max(m, std::abs(t.data[i] - b.at(name).data[i]));
  return m;
}

}  // namespace

TEST(Sac, ZeroActorGivesZeroMeanAction) {
  Rng rng(1);
  Sac sac(small_config(), rng);
  for (auto& [_, t] : sac.actor.values)
    for (auto& v : t.data) v = 0.0;
  auto a = sac.select_action(std::vector<double>{0.3, -0.2, 0.9}, true, rng);
  for (double v : a) EXPECT_EQ(v, 0.0);
}

TEST(Sac, DeterministicActionIsRepeatable) {
  Rng rng(2), r1(5), r2(6);
  Sac sac(small_config(), rng);
  std::vector<double> s{0.1, 0.2, -0.4};
  EXPECT_EQ(sac.select_action(s, true, r1), sac.select_action(s, true, r2));
}

TEST(Sac, LogProbMatchesChangeOfVariables) {
  Rng rng(3);
  Sac sac(small_config(), rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
    double lp = 0.0;
    auto a = sac.select_action(s, false, rng, &lp);
    auto [mean, sd] = sac.policy_stats(s);
    std::vector<double> u;
    for (double v : a) u.push_back(std::atanh(v));
    EXPECT_NEAR(lp, squashed_log_prob(u, mean, sd), 1e-8);
  }
}

TEST(Sac, TanhJacobianIsStable) {
  for (double u : {-30.0, -3.0, 0.0, 0.5, 3.0, 30.0}) {
    const double direct = std::log(1.0 - std::tanh(u) * std::tanh(u));
    if (std::isfinite(direct) && std::abs(u) < 10) {
      EXPECT_NEAR(log_tanh_jacobian(u), direct, 1e-10);
    }
    EXPECT_TRUE(std::isfinite(log_tanh_jacobian(u)));
  }
}

TEST(Sac, ActionsStayStrictlyInsideTheBox) {
  Rng rng(4);
  Sac sac(small_config(), rng);
  auto& b = sac.actor.at("actor.l2.b");
  b.data[0] = 1e3;
  b.data[1] = -1e3;
  for (bool det : {true, false}) {
    auto a = sac.select_action(std::vector<double>{0.0, 0.0, 0.0}, det, rng);
    for (double v : a) {
      EXPECT_LT(v, 1.0);
      EXPECT_GT(v, -1.0);
    }
  }
}

TEST(Sac, TauOneCopiesCriticsExactly) {
  Rng rng(5);
  auto c = small_config();
  c.tau = 1.0;
  Sac sac(c, rng);
  sac.update(random_batch(32, c, rng), rng);
  EXPECT_EQ(max_abs_diff(sac.target1, sac.critic1), 0.0);
  EXPECT_EQ(max_abs_diff(sac.target2, sac.critic2), 0.0);
}

TEST(Sac, TauZeroFreezesTargets) {
  Rng rng(6);
  auto c = small_config();
  c.tau = 0.0;
  Sac sac(c, rng);
  const ParamSet t1 = sac.target1, t2 = sac.target2;
  for (int i = 0; i < 3; ++i) sac.update(random_batch(32, c, rng), rng);
  EXPECT_EQ(max_abs_diff(sac.target1, t1), 0.0);
  EXPECT_EQ(max_abs_diff(sac.target2, t2), 0.0);
  EXPECT_GT(max_abs_diff(sac.critic1, t1), 0.0);
}

TEST(Sac, TargetDriftIsBoundedByTau) {
  Rng rng(7);
  auto c = small_config();
  Sac sac(c, rng);
  for (int i = 0; i < 5; ++i) {
    const ParamSet before = sac.target1;
    sac.update(random_batch(32, c, rng), rng);
    for (const auto& [name, t] : sac.target1.values)
      for (std::size_t k = 0; k < t.size(); ++k) {
        const double drift = std::abs(t.data[k] - before.at(name).data[k]);
        const double gap = std::abs(sac.critic1.at(name).data[k] - before.at(name).data[k]);
        const double ulp = 4 * std::numeric_limits<double>::epsilon() * std::abs(before.at(name).data[k]);
        EXPECT_LE(drift, c.tau * gap + ulp) << name;
      }
  }
}

TEST(Sac, ZeroDiscountCriticConvergesToReward) {
  Rng rng(8);
  auto c = small_config();
  c.gamma = 0.0;
  Sac sac(c, rng);
  const std::size_t n = 64;
  SacBatch b{Tensor(n, 3), Tensor(n, 2), Tensor(n, 1, 0.6), Tensor(n, 3), Tensor(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    b.s(i, 0) = 0.5, b.s(i, 1) = -0.3, b.s(i, 2) = 0.1;
    b.a(i, 0) = 0.2, b.a(i, 1) = -0.7;
    b.s2(i, 0) = -0.2;
  }
  for (int step = 0; step < 2000; ++step) sac.update(b, rng);
  Tensor s = Tensor::row(b.s.row_span(0)), a = Tensor::row(b.a.row_span(0));
  EXPECT_NEAR(sac.q_values(s, a, 1).item(), 0.6, 1e-3);
  EXPECT_NEAR(sac.q_values(s, a, 2).item(), 0.6, 1e-3);
}

TEST(Sac, CriticLossFallsOnAFixedDistribution) {
  Rng rng(9), data(10);
  auto c = small_config();
  c.gamma = 0.5;
  Sac sac(c, rng);
  auto window = [&] {
    double m = 0.0;
    for (int i = 0; i < 200; ++i) {
      auto b = random_batch(64, c, data);
      for (std::size_t k = 0; k < 64; ++k) b.r(k, 0) = 0.5 * (b.s(k, 0) + 1.0) * (1.0 - b.a(k, 0) * b.a(k, 0));
      m += sac.update(b, rng).critic_loss;
    }
    return m / 200.0;
  };
  const double first = window();
  window();
  const double third = window();
  EXPECT_LT(third, first);
}

TEST(Sac, TemperatureFollowsTheEntropyGap) {
  Rng rng(11);
  auto c = small_config();
  c.entropy_mode = TargetEntropyMode::literal;
  c.target_entropy = 50.0;  // unreachable: alpha must grow
  Sac sac(c, rng);
  const double a0 = sac.alpha();
  for (int i = 0; i < 20; ++i) sac.update(random_batch(32, c, rng), rng);
  EXPECT_GT(sac.alpha(), a0);
  EXPECT_EQ(small_config().effective_target_entropy(), -2.0);
  EXPECT_EQ(c.effective_target_entropy(), 50.0);
}

TEST(Sac, NonFiniteLossNamesTheComponent) {
  Rng rng(12);
  auto c = small_config();
  Sac sac(c, rng);
  auto b = random_batch(8, c, rng);
  b.r(3, 0) = std::nan("");
  try {
    sac.update(b, rng);
    FAIL() << "expected a failure";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("critic"), std::string::npos) << e.what();
  }
  Sac other(c, rng);
  other.actor.at("actor.l0.W").data[0] = std::numeric_limits<double>::infinity();
  try {
    other.update(random_batch(8, c, rng), rng);
    FAIL() << "expected a failure";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("sac: non-finite"), std::string::npos) << e.what();
  }
}

TEST(Sac, RejectsBadConfigAndShapes) {
  Rng rng(13);
  auto c = small_config();
  c.gamma = 1.0;
  EXPECT_THROW(Sac(c, rng), Error);
  Sac sac(small_config(), rng);
  auto b = random_batch(8, small_config(), rng);
  b.a = Tensor(8, 3);
  EXPECT_THROW(sac.update(b, rng), Error);
}

TEST(Sac, UpdatesAreBitReproducible) {
  auto run = [] {
    Rng rng(14), data(15);
    Sac sac(small_config(), rng);
    for (int i = 0; i < 10; ++i) sac.update(random_batch(16, small_config(), data), rng);
    return sac.checksum();
  };
  EXPECT_EQ(run(), run());
}
