#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cadiff/envs.hpp"

using namespace cadiff;

namespace {

EnvConfig point_mass(ObsMode mode, double noise, std::uint64_t seed = 0) {
  EnvConfig c;
  c.obs_mode = mode;
  c.noise_scale = noise;
  c.seed = seed;
  return c;
}

template <typename Policy>
double mean_return(EnvConfig cfg, int episodes, Policy policy) {
  PointMassEnv env(cfg);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env.reset();
    for (bool done = false; !done;) {
      auto res = env.step(policy(env.state()));
      total += res.reward;
      done = res.done;
    }
  }
  return total / episodes;
}

}  // namespace

TEST(PointMass, NoiselessFullObservationIsState) {
  PointMassEnv env(point_mass(ObsMode::full, 0.0));
  auto r = env.reset();
  EXPECT_EQ(r.observation, r.true_state);
  auto s = env.step(std::vector<double>{0.3, -0.2});
  EXPECT_EQ(s.observation, s.true_state);
}

TEST(PointMass, ObservationMasks) {
  PointMassEnv p(point_mass(ObsMode::positions_only, 0.0)), v(point_mass(ObsMode::velocities_only, 0.0));
  auto rp = p.reset();
  auto rv = v.reset();
  ASSERT_EQ(rp.observation.size(), 2u);
  EXPECT_EQ(rp.observation[0], rp.true_state[0]);
  EXPECT_EQ(rp.observation[1], rp.true_state[1]);
  rv = v.step(std::vector<double>{1.0, 1.0});
  EXPECT_EQ(rv.observation[0], rv.true_state[2]);
  EXPECT_EQ(rv.observation[1], rv.true_state[3]);
  EXPECT_EQ(p.obs_dim(), 2u);
  EXPECT_THROW(parse_obs_mode("pos"), Error);
  EXPECT_EQ(parse_obs_mode("P"), ObsMode::positions_only);
}

TEST(PointMass, SameSeedSameStart) {
  PointMassEnv a(point_mass(ObsMode::full, 0.5, 7)), b(point_mass(ObsMode::full, 0.5, 7));
  EXPECT_EQ(a.reset().true_state, b.reset().true_state);
}

TEST(PointMass, ObservationNoiseStd) {
  PointMassEnv env(point_mass(ObsMode::full, 0.5, 1));
  const int n = 10000;
  double s2 = 0.0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    auto r = env.reset();
    for (std::size_t j = 0; j < 4; ++j, ++count) s2 += std::pow(r.observation[j] - r.true_state[j], 2);
  }
  const double sd = std::sqrt(s2 / count);
  EXPECT_NEAR(sd, 0.5, 3 * 0.5 / std::sqrt(2.0 * count));
}

TEST(PointMass, GoalIsAFixedPoint) {
  EnvConfig c = point_mass(ObsMode::full, 0.0);
  c.transition_std = 0.0;
  PointMassEnv env(c);
  env.reset();
  env.set_state({0.0, 0.0, 0.0, 0.0});
  auto r = env.step(std::vector<double>{0.0, 0.0});
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_EQ(r.true_state, (std::vector<double>{0.0, 0.0, 0.0, 0.0}));
}

TEST(PointMass, TrajectoryBitReproducible) {
  auto run = [] {
    PointMassEnv env(point_mass(ObsMode::positions_only, 0.5, 3));
    Rng policy(4);
    std::ostringstream os;
    TrajectoryCsv csv(os, 4, 2, 2);
    auto r = env.reset();
    for (long t = 0; !r.done; ++t) {
      std::vector<double> a{uniform(policy, -1, 1), uniform(policy, -1, 1)};
      r = env.step(a);
      csv.row(t, r.true_state, r.observation, a, r.reward, r.done);
    }
    return os.str();
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_EQ(a.substr(0, a.find('\n')), "step,s0,s1,s2,s3,o0,o1,a0,a1,r,done");
}

TEST(PointMass, ActionsAreClampedAndCounted) {
  PointMassEnv env(point_mass(ObsMode::full, 0.0));
  env.reset();
  env.step(std::vector<double>{3.0, -0.5});
  EXPECT_EQ(env.clamped_actions(), 1u);
  EXPECT_THROW(env.step(std::vector<double>{0.0}), Error);
  EXPECT_THROW(env.step(std::vector<double>{NAN, 0.0}), Error);
}

TEST(PointMass, EpisodeCapEndsEpisode) {
  EnvConfig c = point_mass(ObsMode::full, 0.0);
  c.episode_cap = 5;
  PointMassEnv env(c);
  env.reset();
  StepResult r;
  for (int i = 0; i < 5; ++i) r = env.step(std::vector<double>{0.0, 0.0});
  EXPECT_TRUE(r.done);
  EXPECT_THROW(env.step(std::vector<double>{0.0, 0.0}), Error);
}

TEST(PointMass, ControllerBeatsRandomThreefold) {
  // Brute-force baseline on the noiseless task.
  EnvConfig c = point_mass(ObsMode::full, 0.0, 11);
  Rng rng(12);
  const double pd = mean_return(c, 100, [](const std::vector<double>& s) { return pd_controller(s); });
  const double rnd = mean_return(c, 100, [&](const std::vector<double>&) {
    return std::vector<double>{uniform(rng, -1, 1), uniform(rng, -1, 1)};
  });
  EXPECT_GE(pd, 3.0 * rnd) << "pd " << pd << " random " << rnd;
}

TEST(PointMass, RewardClippingIsRare) {
  for (double noise : {0.1, 0.5}) {
    EnvConfig c = point_mass(ObsMode::full, noise, 13);
    PointMassEnv env(c);
    Rng rng(14);
    for (int e = 0; e < 100; ++e) {
      auto r = env.reset();
      while (!r.done) r = env.step(std::vector<double>{uniform(rng, -1, 1), uniform(rng, -1, 1)});
    }
    EXPECT_LE(static_cast<double>(env.clipped_rewards()), 0.01 * env.total_steps()) << "noise " << noise;
  }
}

TEST(PointMass, NoiseStreamsAreIndependent) {
  // Re-drawing one stream leaves the other factors unchanged.
  auto rollout = [](std::uint64_t obs_seed, std::uint64_t reward_seed) {
    PointMassEnv env(point_mass(ObsMode::full, 0.5, 5));
    env.streams().obs.seed(obs_seed);
    env.streams().reward.seed(reward_seed);
    std::vector<StepResult> out{env.reset()};
    for (int t = 0; t < 50; ++t) out.push_back(env.step(std::vector<double>{0.5, -0.5}));
    return out;
  };
  auto base = rollout(1, 1), other_obs = rollout(2, 1), other_rew = rollout(1, 2);
  for (std::size_t t = 0; t < base.size(); ++t) {
    EXPECT_EQ(base[t].true_state, other_obs[t].true_state);
    EXPECT_EQ(base[t].reward, other_obs[t].reward);
    EXPECT_NE(base[t].observation, other_obs[t].observation);
    EXPECT_EQ(base[t].true_state, other_rew[t].true_state);
    EXPECT_EQ(base[t].observation, other_rew[t].observation);
    if (t > 0) {
      EXPECT_NE(base[t].reward, other_rew[t].reward);
    }
  }
}

TEST(FinitePomdp, NoiselessChannelIsIdentity) {
  EnvConfig c;
  c.kind = EnvKind::finite;
  Rng rng(1);
  auto p = make_finite_pomdp(c, rng);
  for (std::size_t s = 0; s < p.mdp.n_states; ++s)
    for (std::size_t o = 0; o < p.mdp.n_states; ++o) EXPECT_EQ(p.channel.rows[s][o], s == o ? 1.0 : 0.0);
}

TEST(FinitePomdp, RowsAreStochasticAndSeeded) {
  EnvConfig c;
  c.kind = EnvKind::finite;
  c.n_states = 12;
  c.noise_scale = 0.3;
  Rng a(2), b(2);
  auto p = make_finite_pomdp(c, a), q = make_finite_pomdp(c, b);
  p.mdp.validate();
  for (const auto& row : p.channel.rows) {
    double z = 0.0;
    for (double v : row) z += v;
    EXPECT_NEAR(z, 1.0, 1e-12);
  }
  EXPECT_EQ(p.channel.rows, q.channel.rows);
  std::ostringstream x, y;
  write_mdp(x, p.mdp);
  write_mdp(y, q.mdp);
  EXPECT_EQ(x.str(), y.str());
  c.n_states = 13;
  EXPECT_THROW(make_finite_pomdp(c, a), Error);
}
