#include <gtest/gtest.h>

#include <cmath>

#include "cadiff/encoder.hpp"
#include "cadiff/numerics/gradcheck.hpp"

using namespace cadiff;

namespace {

EncoderConfig small_config() {
  EncoderConfig c;
  c.obs_dim = 2;
  c.state_dim = 3;
  c.hidden = 8;
  c.window = 4;
  return c;
}

std::vector<std::vector<double>> random_history(std::size_t len, Rng& rng) {
  std::vector<std::vector<double>> h(len, std::vector<double>(2));
  for (auto& o : h)
    for (auto& v : o) v = uniform(rng, -1, 1);
  return h;
}

}  // namespace

TEST(Encoder, ZeroWeightsGiveBiasOutput) {
  Rng rng(1);
  Encoder enc("z", small_config(), rng);
  for (auto& [name, t] : enc.params().values)
    for (auto& v : t.data) v = 0.0;
  auto& b = enc.params().at("z.mean.b");
  for (std::size_t i = 0; i < b.size(); ++i) b.data[i] = 0.1 * static_cast<double>(i + 1);
  for (int trial = 0; trial < 3; ++trial) {
    ad::Tape t;
    auto g = enc.encode_history(t, random_history(1 + trial, rng));
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_DOUBLE_EQ(g.mean.value()(0, i), 0.1 * static_cast<double>(i + 1));
      EXPECT_DOUBLE_EQ(g.std.value()(0, i), 1.0);
    }
  }
}

TEST(Encoder, SameHistoryIsBitIdentical) {
  Rng rng(2);
  Encoder enc("z", small_config(), rng);
  auto h = random_history(4, rng);
  ad::Tape t1, t2;
  auto a = enc.encode_history(t1, h), b = enc.encode_history(t2, h);
  EXPECT_EQ(a.mean.value().data, b.mean.value().data);
  EXPECT_EQ(a.std.value().data, b.std.value().data);
}

TEST(Encoder, OrderSensitive) {
  Rng rng(3);
  Encoder enc("z", small_config(), rng);
  auto h = random_history(4, rng);
  auto p = h;
  std::swap(p[0], p[3]);
  ad::Tape t;
  auto a = enc.encode_history(t, h), b = enc.encode_history(t, p);
  double diff = 0.0;
  for (std::size_t i = 0; i < 3; ++i) diff += std::abs(a.mean.value()(0, i) - b.mean.value()(0, i));
  EXPECT_GT(diff, 1e-6);
}

TEST(Encoder, ShortHistoryMatchesPaddedWindow) {
  Rng rng(4);
  Encoder enc("z", small_config(), rng);
  auto h = random_history(2, rng);
  ad::Tape t;
  auto a = enc.encode_history(t, h);
  auto b = enc.encode(t, Tensor::row(enc.pack(h)), false);
  EXPECT_EQ(a.mean.value().data, b.mean.value().data);
  EXPECT_EQ(enc.pack(h)[0], 0.0);
}

TEST(Encoder, RejectsBadHistories) {
  Rng rng(5);
  Encoder enc("z", small_config(), rng);
  ad::Tape t;
  EXPECT_THROW(enc.encode_history(t, {}), Error);
  EXPECT_THROW(enc.encode_history(t, random_history(5, rng)), Error);
  EXPECT_THROW(enc.encode_history(t, {{1.0, 2.0, 3.0}}), Error);
}

TEST(Encoder, StdStaysInsideClampBounds) {
  Rng rng(6);
  Encoder enc("z", small_config(), rng);
  for (const double s : {1e3, -1e3}) {
    auto& b = enc.params().at("z.logstd.b");
    for (auto& v : b.data) v = s;
    ad::Tape t;
    auto g = enc.encode_history(t, random_history(4, rng));
    for (double v : g.std.value().data) {
      EXPECT_GE(v, std::exp(-5.0) * (1 - 1e-12));
      EXPECT_LE(v, std::exp(2.0) * (1 + 1e-12));
    }
  }
}

TEST(Encoder, GradientsReachEveryRecurrentParameter) {
  Rng rng(7);
  Encoder enc("z", small_config(), rng);
  Tensor w(16, enc.window_width());
  for (auto& v : w.data) v = uniform(rng, -1, 1);
  ad::Tape t;
  auto g = enc.encode(t, w);
  auto target = t.constant(standard_normal_tensor(16, 3, rng));
  t.backward(ad::add(ad::sum(ad::square(ad::sub(g.mean, target))), ad::sum(g.std)));
  auto grads = t.grads(enc.params());
  for (const char* name : {"z.gru.Wx", "z.gru.Wh", "z.gru.bx", "z.gru.bh"}) {
    ASSERT_TRUE(grads.count(name)) << name;
    double norm = 0.0;
    for (double v : grads.at(name).data) norm += v * v;
    EXPECT_GT(norm, 0.0) << name;
  }
}

TEST(Encoder, FrozenEncodeLeavesNoGradients) {
  Rng rng(8);
  Encoder enc("z", small_config(), rng);
  ad::Tape t;
  auto g = enc.encode(t, Tensor(2, enc.window_width(), 0.3), false);
  EXPECT_TRUE(t.grads(enc.params()).empty());
  EXPECT_THROW(t.backward(ad::sum(g.mean)), Error);
}

TEST(Encoder, GradientsMatchFiniteDifferences) {
  Rng rng(9);
  Encoder enc("z", small_config(), rng);
  Tensor w(3, enc.window_width());
  for (auto& v : w.data) v = uniform(rng, -1, 1);
  Tensor a = standard_normal_tensor(3, 2, rng);
  // gradient_check perturbs enc.params() in place.
  auto rep = gradient_check(enc.params(), [&](ad::Tape& t, const ParamSet&) {
    auto g = enc.encode(t, w);
    auto pred = enc.predict_next(t, g.mean, t.constant(a));
    return ad::add(ad::sum(ad::square(pred.mean)), ad::sum(ad::mul(g.std, pred.std)));
  });
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst;
}

TEST(SampleState, ZeroStdReturnsMean) {
  ad::Tape t;
  GaussianVar g{t.constant(Tensor({1, 3}, {0.5, -1.0, 2.0})), t.constant(Tensor({1, 3}, {0.0, 0.0, 0.0}))};
  auto s = sample_state(g, Tensor({1, 3}, {1.0, -2.0, 3.0}));
  EXPECT_EQ(s.value().data, g.mean.value().data);
}

TEST(SampleState, MonteCarloMeanWithinThreeSigma) {
  Rng rng(10);
  const std::size_t n = 100000;
  ad::Tape t;
  GaussianVar g{t.constant(Tensor(n, 1, 0.7)), t.constant(Tensor(n, 1, 1.3))};
  auto s = sample_state(g, standard_normal_tensor(n, 1, rng));
  double m = 0.0;
  for (double v : s.value().data) m += v;
  m /= static_cast<double>(n);
  EXPECT_LT(std::abs(m - 0.7), 3.0 * 1.3 / std::sqrt(static_cast<double>(n)));
}

TEST(SampleState, ReparameterizationGradientMatchesFiniteDifferences) {
  Rng rng(11);
  ParamSet ps;
  ps.add("mu", standard_normal_tensor(4, 2, rng));
  ps.add("log_sd", standard_normal_tensor(4, 2, rng));
  Tensor eps = standard_normal_tensor(4, 2, rng);
  auto rep = gradient_check(ps, [&](ad::Tape& t, const ParamSet& p) {
    GaussianVar g{t.param(p, "mu"), ad::exp(t.param(p, "log_sd"))};
    return ad::sum(ad::tanh(sample_state(g, eps)));
  });
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst;
}

TEST(SampleState, RejectsMismatchedNoise) {
  ad::Tape t;
  GaussianVar g{t.constant(Tensor(2, 3)), t.constant(Tensor(2, 3))};
  EXPECT_THROW(sample_state(g, Tensor(3, 2)), Error);
}
