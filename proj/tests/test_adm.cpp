#include <gtest/gtest.h>

#include <cmath>

#include "cadiff/adm.hpp"

using namespace cadiff;

namespace {

NoiseSchedule table_schedule(int delta = 2) { return make_schedule(500, 1e-4, 2e-2, 1, delta); }

// Noise predictor that knows the clean sample: exact inverse of the forward map.
EpsModel oracle(const Tensor& x0, const NoiseSchedule& s) {
  return [&x0, &s](const Tensor& x, int k, bool) {
    Tensor e = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) e.data[i] = (x.data[i] - s.sqrt_ab(k) * x0.data[i]) / s.sqrt_1m_ab(k);
    return e;
  };
}

}  // namespace

TEST(Schedule, SingleStep) {
  auto s = make_schedule(1, 0.3, 0.3, 1, 1);
  EXPECT_DOUBLE_EQ(s.alpha_bar[1], 0.7);
  EXPECT_EQ(s.alpha_bar[0], 1.0);
}

TEST(Schedule, LinearTableSchedule) {
  auto s = table_schedule();
  double prod = 1.0;
  for (int k = 1; k <= 500; ++k) {
    prod *= 1.0 - (1e-4 + (2e-2 - 1e-4) * (k - 1) / 499.0);
    EXPECT_NEAR(s.alpha_bar[k], prod, 1e-15);
    EXPECT_LT(s.alpha_bar[k], s.alpha_bar[k - 1]);
    EXPECT_DOUBLE_EQ(s.sigma2[k], 1.0 - s.alpha[k]);
  }
  // The linear table ends well short of 1e-3 (about 6.35e-3).
  EXPECT_NEAR(s.alpha_bar[500], 6.35271e-3, 1e-8);
  EXPECT_DOUBLE_EQ(s.beta[1], 1e-4);
  EXPECT_DOUBLE_EQ(s.beta[500], 2e-2);
}

TEST(Schedule, RejectsBadOrdering) {
  EXPECT_THROW(make_schedule(500, 2e-2, 1e-4, 1, 2), Error);
  EXPECT_THROW(make_schedule(500, 0.0, 1e-2, 1, 2), Error);
  EXPECT_THROW(make_schedule(500, 1e-4, 1.0, 1, 2), Error);
  EXPECT_THROW(make_schedule(500, 1e-4, 2e-2, 3, 2), Error);
  EXPECT_THROW(make_schedule(500, 1e-4, 2e-2, 0, 2), Error);
  EXPECT_THROW(make_schedule(10, 1e-4, 2e-2, 1, 11), Error);
}

TEST(ForwardSample, Examples) {
  std::vector<double> x0{0.3, -1.2}, eps{0.5, 0.25}, zero{0.0, 0.0};
  auto s = table_schedule();
  EXPECT_EQ(forward_sample(x0, 0, eps, s), x0);
  auto q = make_schedule(1, 0.75, 0.75, 1, 1);  // alpha_bar_1 = 0.25
  auto h = forward_sample(x0, 1, zero, q);
  EXPECT_DOUBLE_EQ(h[0], 0.15);
  EXPECT_DOUBLE_EQ(h[1], -0.6);
  EXPECT_THROW(forward_sample(x0, 501, eps, s), Error);
  EXPECT_THROW(forward_sample(x0, 1, std::vector<double>{1.0}, s), Error);
}

TEST(ForwardSample, VariancePreservingMarginals) {
  auto s = table_schedule();
  Rng rng(1);
  const int n = 100000;
  for (int k : {1, 2, 50, 250, 500}) {
    // x0 ~ N(0,1) keeps unit variance at every step.
    double m = 0, v = 0;
    for (int i = 0; i < n; ++i) {
      double x0 = standard_normal(rng), e = standard_normal(rng);
      double x = forward_sample(std::span<const double>(&x0, 1), k, std::span<const double>(&e, 1), s)[0];
      m += x, v += x * x;
    }
    m /= n, v = v / n - m * m;
    EXPECT_NEAR(v, 1.0, 3 * std::sqrt(2.0 / n)) << "k=" << k;

    // Fixed x0: mean sqrt(ab) x0, std sqrt(1 - ab).
    const double x0 = 0.7;
    double mm = 0, vv = 0;
    for (int i = 0; i < n; ++i) {
      double e = standard_normal(rng);
      double x = forward_sample(std::span<const double>(&x0, 1), k, std::span<const double>(&e, 1), s)[0];
      mm += x, vv += x * x;
    }
    mm /= n, vv = vv / n - mm * mm;
    const double sd = s.sqrt_1m_ab(k);
    EXPECT_NEAR(mm, s.sqrt_ab(k) * x0, 3 * sd / std::sqrt(n));
    EXPECT_NEAR(std::sqrt(vv), sd, 3 * sd / std::sqrt(2.0 * n));
  }
}

TEST(InvertDelta, RoundTrips) {
  auto s = table_schedule();
  std::vector<double> zero{0.0, 0.0, 0.0};
  EXPECT_EQ(invert_delta(zero, zero, s), zero);
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto x0 = normal_vector(rng, 4), eps = normal_vector(rng, 4);
    auto back = invert_delta(forward_sample(x0, s.delta, eps, s), eps, s);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(back[i], x0[i], 1e-12);
  }
}

TEST(GuidanceMask, FairCoin) {
  Rng rng(3);
  const std::size_t n = 100000;
  auto m = draw_guidance_mask(n, rng);
  double ones = 0;
  for (int v : m) ones += v;
  EXPECT_NEAR(ones / n, 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(ScoreNet, ShapesAndNullToken) {
  Rng rng(4);
  ScoreNet net("theta", {3, 2, 64, 32}, rng);
  auto s = table_schedule();
  Tensor x(5, 3, 0.2), y1(5, 2, 1.0), y2(5, 2, -4.0);
  auto e1 = net.predict(x, y1, false, 10, s), e2 = net.predict(x, y2, false, 10, s);
  EXPECT_EQ(e1.cols(), 3u);
  EXPECT_EQ(e1.data, e2.data);
  EXPECT_NE(net.predict(x, y1, true, 10, s).data, net.predict(x, y2, true, 10, s).data);
  EXPECT_THROW(net.predict(Tensor(5, 2), y1, true, 10, s), Error);
  EXPECT_THROW(net.predict(x, Tensor(5, 3), true, 10, s), Error);
  EXPECT_THROW(net.predict(x, y1, true, 0, s), Error);
}

TEST(AdmLoss, OracleAndZeroPredictions) {
  Rng rng(5);
  auto s = table_schedule();
  ScoreNet net("theta", {2, 0, 16, 8}, rng);
  Tensor x(20000, 2);
  for (auto& v : x.data) v = standard_normal(rng);
  auto batch = make_adm_batch(x, Tensor(), net, s, rng);

  ad::Tape t;
  EXPECT_EQ(adm_loss_from_prediction(t.constant(batch.target), batch.target).item(), 0.0);

  // Zero prediction: E|target|^2 = w (1/2 + 1/2 E_k[(1 - ab_k) / (1 - ab_k / ab_delta)]).
  double ratio = 0.0;
  for (int k = s.delta + 1; k <= s.K; ++k)
    ratio += (1 - s.alpha_bar[k]) / (1 - s.alpha_bar[k] / s.alpha_bar[s.delta]);
  ratio /= s.K - s.delta;
  const double expected = 2.0 * (0.5 + 0.5 * ratio);
  const double loss = adm_loss_from_prediction(t.constant(Tensor(40000, 2)), batch.target).item();
  EXPECT_NEAR(loss, expected, 0.03 * expected);
  EXPECT_GT(ratio, 1.0);

  EXPECT_THROW(make_adm_batch(Tensor(), Tensor(), net, s, rng), Error);
}

TEST(AdmLoss, BitReproducible) {
  auto run = [] {
    Rng init(6), rng(7);
    auto s = table_schedule();
    ScoreNet net("theta", {1, 1, 16, 8}, init);
    auto batch = make_adm_batch(Tensor({1, 1}, {0.4}), Tensor({1, 1}, {-0.2}), net, s, rng);
    ad::Tape t;
    return adm_loss(t, net, batch, s).item();
  };
  EXPECT_EQ(run(), run());
}

TEST(AdmLoss, GradientsReachOnlyTheNetwork) {
  Rng rng(8);
  auto s = table_schedule();
  ScoreNet net("phi", {1, 3, 16, 8}, rng);
  Tensor x(8, 1, 0.3), y(8, 3, 0.1);
  const auto before = net.params.checksum();
  adm_train_step(net, x, y, s, {1e-3}, rng);
  EXPECT_NE(net.params.checksum(), before);
  EXPECT_EQ(net.params.step_count, 1u);
}

TEST(Denoise, OracleRecoversCleanSample) {
  Rng rng(9);
  for (int delta : {1, 2, 3}) {
    auto s = table_schedule(delta);
    Tensor x0(6, 3), xd(6, 3);
    for (auto& v : x0.data) v = standard_normal(rng);
    for (std::size_t i = 0; i < x0.size(); ++i)
      xd.data[i] = s.sqrt_ab(delta) * x0.data[i] + s.sqrt_1m_ab(delta) * standard_normal(rng);
    auto out = denoise(xd, oracle(x0, s), s, 1.0);
    for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_NEAR(out.data[i], x0.data[i], 1e-8) << "delta " << delta;
    if (delta == 1) {
      // delta == k0: a single inversion.
      Tensor e = oracle(x0, s)(xd, 1, true);
      for (std::size_t r = 0; r < 6; ++r) {
        auto inv = invert_delta(xd.row_span(r), e.row_span(r), s);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out(r, j), inv[j], 1e-10);
      }
    }
  }
}

TEST(Denoise, GuidanceWeightZeroIsUnconditional) {
  Rng rng(10);
  auto s = table_schedule();
  ScoreNet net("theta", {2, 2, 16, 8}, rng);
  Tensor x(4, 2, 0.1), y(4, 2, 0.5);
  auto w0 = denoise(x, y, net, s, 0.0);
  EpsModel uncond = [&](const Tensor& xx, int k, bool) { return net.predict(xx, y, false, k, s); };
  EXPECT_EQ(w0.data, denoise(x, uncond, s, 1.0).data);
  auto w2 = denoise(x, y, net, s, 2.0);
  EXPECT_NE(w2.data, w0.data);
}

TEST(Denoise, NonFiniteNamesStep) {
  auto s = table_schedule(3);
  EpsModel bad = [](const Tensor& x, int k, bool) { return Tensor(x.rows(), x.cols(), k == 2 ? NAN : 0.0); };
  try {
    denoise(Tensor(1, 1), bad, s, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos) << e.what();
  }
}

TEST(ScoreNet, LearnsGaussianScore) {
  // x0 ~ N(0, 0.5^2): the optimal noise estimate is linear,
  // sqrt(1-ab) x / (ab s^2 + 1 - ab).
  Rng init(11), data(12), noise(13);
  auto s = table_schedule();
  const double sd = 0.5;
  ScoreNet net("theta", {1, 0, 64, 32}, init);
  Tensor x(128, 1);
  for (int step = 0; step < 5000; ++step) {
    for (auto& v : x.data) v = s.sqrt_ab(s.delta) * sd * standard_normal(data) + s.sqrt_1m_ab(s.delta) * standard_normal(data);
    adm_train_step(net, x, Tensor(), s, {1e-3}, noise);
  }
  double err = 0.0;
  int count = 0;
  for (int k : {5, 25, 100, 250, 500}) {
    const double ab = s.alpha_bar[k];
    const double spread = std::sqrt(ab * sd * sd + 1 - ab);
    for (double z = -2.0; z <= 2.0; z += 0.25) {
      const double xv = z * spread;
      const double eps = net.predict(Tensor(1, 1, xv), Tensor(), true, k, s).item();
      err += std::abs(eps - std::sqrt(1 - ab) * xv / (ab * sd * sd + 1 - ab));
      ++count;
    }
  }
  EXPECT_LT(err / count, 0.1);
}

TEST(Mixture, LossMovingAverageDoesNotRise) {
  MixtureRunConfig cfg;
  cfg.train_steps = 2000;
  cfg.batch = 256;
  cfg.eval_samples = 512;
  auto rep = run_mixture_experiment(cfg);
  const std::size_t window = 500;
  double prev = 1e300;
  for (std::size_t start = 0; start + window <= rep.losses.size(); start += window) {
    double m = 0.0;
    for (std::size_t i = start; i < start + window; ++i) m += rep.losses[i];
    m /= window;
    EXPECT_LE(m, 1.05 * prev) << "window at " << start;
    prev = m;
  }
  EXPECT_LT(rep.roundtrip_error, 1e-10);
}
