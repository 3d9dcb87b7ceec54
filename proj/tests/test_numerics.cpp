#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cadiff/numerics.hpp"

using namespace cadiff;

TEST(Tape, SquareAndIdentity) {
  ad::Tape t;
  auto x = t.leaf(Tensor::scalar(3.0), "x");
  EXPECT_DOUBLE_EQ(ad::square(x).item(), 9.0);
  Tensor v({1, 3}, {1.5, -2.0, 4.0});
  auto y = t.constant(v);
  EXPECT_EQ(y.value().data, v.data);
}

TEST(Tape, AnalyticDerivatives) {
  ad::Tape t;
  auto x = t.leaf(Tensor::scalar(3.0), "x");
  t.backward(ad::square(x));
  EXPECT_DOUBLE_EQ(t.grad(x).item(), 6.0);

  ad::Tape t2;
  auto z = t2.leaf(Tensor::scalar(0.0), "z");
  t2.backward(ad::tanh(z));
  EXPECT_DOUBLE_EQ(t2.grad(z).item(), 1.0);
}

TEST(Tape, TanhMlpMatchesHandEvaluation) {
  Rng rng(0);
  ParamSet ps;
  Mlp mlp{"m", {3, 4, 2}, Activation::tanh};
  mlp.init(ps, rng);
  for (auto& x : ps.at("m.l0.b").data) x = uniform(rng, -1.0, 1.0);
  for (auto& x : ps.at("m.l1.b").data) x = uniform(rng, -1.0, 1.0);

  ad::Tape t;
  auto out = mlp(t, ps, t.constant(Tensor(1, 3))).value();

  // Zero input: out_j = sum_i tanh(b0_i) W1_ij + b1_j.
  const Tensor& b0 = ps.at("m.l0.b");
  const Tensor& w1 = ps.at("m.l1.W");
  const Tensor& b1 = ps.at("m.l1.b");
  for (std::size_t j = 0; j < 2; ++j) {
    double e = b1(0, j);
    for (std::size_t i = 0; i < 4; ++i) e += std::tanh(b0(0, i)) * w1(i, j);
    EXPECT_NEAR(out(0, j), e, 1e-15);
  }
}

TEST(Tape, ShapeMismatchNamesNode) {
  ad::Tape t;
  auto a = t.constant(Tensor(2, 3));
  auto b = t.constant(Tensor(3, 2));
  try {
    ad::add(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'add' at node 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ad::matmul(a, a), Error);
}

TEST(Tape, BackwardRejectsNonScalarAndDetached) {
  ad::Tape t;
  auto x = t.leaf(Tensor(2, 2, 1.0), "x");
  EXPECT_THROW(t.backward(x), Error);
  auto c = t.constant(Tensor::scalar(1.0));
  EXPECT_THROW(t.backward(ad::square(c)), Error);
  EXPECT_THROW(t.backward(ad::sum(ad::detach(x))), Error);
}

TEST(Tape, BroadcastGradientsAccumulate) {
  ad::Tape t;
  auto a = t.leaf(Tensor({2, 2}, {1, 2, 3, 4}), "a");
  auto b = t.leaf(Tensor({1, 2}, {10, 20}), "b");
  t.backward(ad::sum(ad::mul(a, b)));
  EXPECT_EQ(t.grad(b).data, (std::vector<double>{4, 6}));
  EXPECT_EQ(t.grad(a).data, (std::vector<double>{10, 20, 10, 20}));
}

TEST(Tape, SharedParameterAccumulates) {
  ParamSet ps;
  ps.add("w", Tensor::scalar(2.0));
  ad::Tape t;
  auto w1 = t.param(ps, "w");
  auto w2 = t.param(ps, "w");
  EXPECT_EQ(w1.id(), w2.id());
  t.backward(ad::mul(w1, w2));
  EXPECT_DOUBLE_EQ(t.grads(ps).at("w").item(), 4.0);
}

TEST(Tape, RandomGraphsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    ParamSet ps;
    auto g = RandomGraph::make(ps, rng);
    auto rep = gradient_check(ps, [&](ad::Tape& t, const ParamSet& p) { return g(t, p); });
    EXPECT_LT(rep.max_rel_error, 1e-4) << "seed " << seed << " worst " << rep.worst;
  }
}

TEST(Tape, GruGradientsMatchFiniteDifferences) {
  Rng rng(7);
  ParamSet ps;
  GruCell cell{"gru", 3, 4};
  cell.init(ps, rng);
  for (auto& x : ps.at("gru.bx").data) x = uniform(rng, -0.5, 0.5);
  Tensor xs(2, 3);
  for (auto& x : xs.data) x = uniform(rng, -1, 1);
  auto f = [&](ad::Tape& t, const ParamSet& p) {
    auto h = t.constant(Tensor(2, 4));
    for (int s = 0; s < 3; ++s) h = cell.step(t, p, t.constant(xs), h);
    return ad::sum(ad::square(h));
  };
  auto rep = gradient_check(ps, f);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst;
}

TEST(Tape, LargeInputsStayFinite) {
  Rng rng(3);
  ParamSet ps;
  Mlp mlp{"m", {2, 8, 8, 1}, Activation::silu};
  mlp.init(ps, rng);
  ad::Tape t;
  auto x = t.leaf(Tensor({2, 2}, {1e3, -1e3, -1e3, 1e3}), "x");
  auto y = mlp(t, ps, x);
  auto loss = ad::sum(ad::add(ad::softplus(y), ad::sigmoid(ad::scale(y, -1.0))));
  t.backward(loss);
  EXPECT_TRUE(t.grad(x).all_finite());
  for (auto& [_, g] : t.grads(ps)) EXPECT_TRUE(g.all_finite());
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParamSet ps;
  ps.add("w", Tensor({1, 2}, {0.3, -0.7}));
  GradMap g{{"w", Tensor(1, 2)}};
  adam_step(ps, g, {0.1});
  EXPECT_EQ(ps.at("w").data, (std::vector<double>{0.3, -0.7}));
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  ParamSet ps;
  ps.add("w", Tensor::scalar(1.0));
  adam_step(ps, {{"w", Tensor::scalar(1.0)}}, {0.1, 0.9, 0.999, 1e-8});
  // m_hat = 1, v_hat = 1 => step = 0.1 / (1 + 1e-8).
  EXPECT_NEAR(ps.at("w").item(), 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(ps.step_count, 1u);
}

TEST(Adam, ZeroLearningRateStillCounts) {
  ParamSet ps;
  ps.add("w", Tensor::scalar(1.0));
  adam_step(ps, {{"w", Tensor::scalar(5.0)}}, {0.0});
  EXPECT_EQ(ps.at("w").item(), 1.0);
  EXPECT_EQ(ps.step_count, 1u);
}

TEST(Adam, NanGradientNamesParameter) {
  ParamSet ps;
  ps.add("critic.l0.W", Tensor::scalar(1.0));
  try {
    adam_step(ps, {{"critic.l0.W", Tensor::scalar(std::nan(""))}}, {0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("critic.l0.W"), std::string::npos);
  }
  EXPECT_THROW(adam_step(ps, {{"other", Tensor::scalar(1.0)}}, {0.1}), Error);
}

namespace {
std::vector<std::uint64_t> trajectory(std::uint64_t seed) {
  Rng rng(seed);
  ParamSet ps;
  Mlp mlp{"m", {3, 16, 1}, Activation::tanh};
  mlp.init(ps, rng);
  std::vector<std::uint64_t> sums;
  for (int step = 0; step < 100; ++step) {
    Tensor x(8, 3), y(8, 1);
    for (auto& v : x.data) v = standard_normal(rng);
    for (std::size_t r = 0; r < 8; ++r) y(r, 0) = std::sin(x(r, 0)) + x(r, 1) * x(r, 2);
    ad::Tape t;
    auto loss = ad::mean(ad::square(ad::sub(mlp(t, ps, t.constant(x)), t.constant(y))));
    t.backward(loss);
    adam_step(ps, t.grads(ps), {1e-2});
    sums.push_back(ps.checksum());
  }
  return sums;
}
}  // namespace

TEST(Adam, TrajectoriesAreBitIdentical) {
  EXPECT_EQ(trajectory(11), trajectory(11));
  EXPECT_NE(trajectory(11).back(), trajectory(12).back());
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(5);
  ParamSet ps;
  Mlp{"net", {4, 6, 2}, Activation::relu}.init(ps, rng);
  ps.add("odd", Tensor({2, 3, 1}, {1, -0.0, 3.25, 1e-300, -7, 8}));
  std::stringstream buf;
  write_checkpoint(buf, ps.values);
  EXPECT_EQ(buf.str().substr(0, 4), "CDF1");
  auto back = read_checkpoint(buf);
  ASSERT_EQ(back.size(), ps.values.size());
  for (const auto& [name, t] : ps.values) {
    EXPECT_EQ(back.at(name).shape, t.shape);
    EXPECT_EQ(back.at(name).data, t.data);
  }
}

TEST(Checkpoint, RejectsCorruption) {
  std::stringstream bad("CDF2xxxx");
  EXPECT_THROW(read_checkpoint(bad), Error);
  ParamSet ps;
  ps.add("w", Tensor(2, 2, 1.0));
  std::stringstream buf;
  write_checkpoint(buf, ps.values);
  std::string s = buf.str();
  std::stringstream truncated(s.substr(0, s.size() - 3));
  EXPECT_THROW(read_checkpoint(truncated), Error);
}
