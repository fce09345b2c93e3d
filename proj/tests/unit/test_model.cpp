#include <gtest/gtest.h>

#include <cmath>

#include "../test_util.hpp"
#include "mcdseg/errors.hpp"
#include "mcdseg/losses.hpp"
#include "mcdseg/metrics.hpp"
#include "mcdseg/uncertainty.hpp"
#include "mcdseg/unet.hpp"

using namespace mcdseg;
using testutil::random_binary;
using testutil::random_tensor;

namespace {

UNetConfig tiny() {
  UNetConfig c = UNetConfig::desk();
  c.base_channels = 4;
  c.kernel_size = 3;
  return c;
}

StochasticPredictionSet set_from(std::size_t h, std::size_t w, const std::vector<std::vector<std::uint8_t>>& trials) {
  StochasticPredictionSet s;
  s.height = h;
  s.width = w;
  s.prob_maps = Tensor<float>({trials.size(), h, w});
  for (std::size_t t = 0; t < trials.size(); ++t) {
    s.bin_masks.emplace_back(h, w, trials[t]);
    for (std::size_t i = 0; i < h * w; ++i) s.prob_maps[t * h * w + i] = trials[t][i];
  }
  return s;
}

}  // namespace

// ---- unet

TEST(UNet, DeskChannelsAndConfigErrors) {
  const auto c = UNetConfig::desk();
  EXPECT_EQ(c.channels_at(0), 16);
  EXPECT_EQ(c.channels_at(1), 32);
  EXPECT_EQ(c.channels_at(2), 64);
  UNetConfig bad = c;
  bad.depth = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  RngStream rng(1, 1);
  EXPECT_THROW(UNetModel<float>(bad, rng), ConfigError);
  EXPECT_EQ(UNetConfig::full().depth, 5);
  EXPECT_EQ(UNetConfig::full().base_channels, 64);
}

TEST(UNet, IdenticalSeedsGiveIdenticalParameters) {
  RngStream a(5, 1), b(5, 1);
  UNetModel<float> m1(tiny(), a), m2(tiny(), b);
  auto p1 = m1.parameters();
  auto p2 = m2.parameters();
  ASSERT_EQ(p1.size(), p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    EXPECT_EQ(p1[i].first, p2[i].first);
    EXPECT_EQ(p1[i].second->value.value(), p2[i].second->value.value());
  }
}

TEST(UNet, ForwardModes) {
  RngStream init(2, 2);
  UNetModel<float> model(tiny(), init);
  RngStream rng(3, 3);
  const auto x = random_tensor<float>({2, 1, 16, 16}, rng);
  RngStream r(0, 0);
  const auto d1 = model.forward(x, ForwardMode::deterministic, r).value();
  const auto d2 = model.forward(x, ForwardMode::deterministic, r).value();
  EXPECT_EQ(d1, d2);
  EXPECT_EQ(d1.shape(), (Shape{2, 1, 16, 16}));
  for (float v : d1.data()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
  RngStream s1(9, 1), s2(9, 2);
  EXPECT_NE(model.forward(x, ForwardMode::mc_dropout, s1).value(), model.forward(x, ForwardMode::mc_dropout, s2).value());
  EXPECT_THROW(model.forward(random_tensor<float>({1, 1, 10, 16}, rng), ForwardMode::deterministic, r), DimensionError);
}

TEST(UNet, ReplicatedForwardMatchesBatchedCopies) {
  RngStream init(4, 4);
  UNetModel<float> model(tiny(), init);
  RngStream rng(5, 5);
  const auto img = random_tensor<float>({1, 1, 16, 16}, rng);
  std::vector<RngStream> streams;
  for (std::uint64_t i = 0; i < 3; ++i) streams.push_back(trial_stream(77, i));
  auto s2 = streams;
  const auto rep = model.forward_replicated(img, streams);
  Tensor<float> batch({3, 1, 16, 16});
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < 256; ++i) batch[n * 256 + i] = img[i];
  NoGradGuard g;
  const auto full = model.forward(batch, ForwardMode::mc_dropout, std::span<RngStream>(s2)).value();
  EXPECT_EQ(rep, full);
}

// ---- losses

TEST(Losses, SoftConfusionExamples) {
  Tensor<double> y({4}, std::vector<double>{1, 1, 0, 0});
  Tensor<double> p({4}, std::vector<double>{0.8, 0.4, 0.3, 0.0});
  const auto c = soft_confusion(y, p);
  EXPECT_NEAR(c.tp, 1.2, 1e-15);
  EXPECT_NEAR(c.fp, 0.3, 1e-15);
  EXPECT_NEAR(c.fn_, 0.8, 1e-15);
  const auto same = soft_confusion(y, y);
  EXPECT_EQ(same.tp, 2.0);
  EXPECT_EQ(same.fp + same.fn_, 0.0);
  Tensor<double> inv({4}, std::vector<double>{0, 0, 1, 1});
  EXPECT_EQ(soft_confusion(y, inv).tp, 0.0);
  EXPECT_THROW(soft_confusion(p, y), InputError);
}

TEST(Losses, BceExamples) {
  Tensor<double> y({2}, std::vector<double>{1, 0});
  EXPECT_NEAR(bce_loss(y, Var<double>(Tensor<double>({2}, std::vector<double>{0.9, 0.2}))).value()[0],
              -(std::log(0.9) + std::log(0.8)) / 2, 1e-15);
  EXPECT_EQ(bce_loss(y, Var<double>(Tensor<double>({2}, 0.5))).value()[0], std::log(2.0));
  EXPECT_LE(bce_loss(y, Var<double>(y)).value()[0], -std::log(1 - 1e-7) * (1 + 1e-9));
}

TEST(Losses, DiceExamples) {
  Tensor<double> y({6}, std::vector<double>{1, 1, 1, 0, 0, 0});
  EXPECT_LE(dice_loss(y, Var<double>(y)).value()[0], 1.0 / 7.0 + 1e-15);
  EXPECT_NEAR(dice_loss(y, Var<double>(y), 0.0).value()[0], 0.0, 1e-15);
  Tensor<double> d({6}, std::vector<double>{0, 0, 0, 1, 1, 0});
  EXPECT_NEAR(dice_loss(y, Var<double>(d), 1e-12).value()[0], 1.0, 1e-9);
  Tensor<double> e({6});
  EXPECT_EQ(dice_loss(e, Var<double>(e)).value()[0], 0.0);
}

TEST(Losses, TverskyExamples) {
  Tensor<double> y({4}, std::vector<double>{1, 1, 0, 0});
  Tensor<double> p({4}, std::vector<double>{0.8, 0.4, 0.3, 0.0});
  EXPECT_NEAR(tversky_loss(y, Var<double>(p), 0.9, 0.0).value()[0], 1.0 - 1.2 / 1.95, 1e-14);
  for (double b : {0.1, 0.5, 0.9}) EXPECT_NEAR(tversky_loss(y, Var<double>(y), b, 0.0).value()[0], 0.0, 1e-15);
  EXPECT_THROW(tversky_loss(y, Var<double>(p), 0.0), ParameterError);
  EXPECT_THROW(tversky_loss(y, Var<double>(p), 1.0), ParameterError);
  RngStream rng(1, 2);
  for (int i = 0; i < 50; ++i) {
    const auto yy = random_binary<double>({30}, rng);
    const auto pp = random_tensor<double>({30}, rng, 0.0, 1.0);
    EXPECT_NEAR(tversky_loss(yy, Var<double>(pp), 0.5).value()[0], dice_loss(yy, Var<double>(pp)).value()[0], 1e-12);
  }
}

TEST(Losses, ConfigValidation) {
  EXPECT_THROW(LossConfig::tversky(1.2).validate(), ParameterError);
  LossConfig c = LossConfig::tversky(0.3);
  c.beta.reset();
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(parse_loss_kind("bce"), LossKind::bce);
  EXPECT_THROW(parse_loss_kind("focal"), ConfigError);
}

// ---- uncertainty

TEST(Uncertainty, MeanPredictionMajorityAndTie) {
  auto s = set_from(1, 3, {{1, 0, 1}, {1, 1, 0}, {0, 0, 1}});
  EXPECT_EQ(mean_prediction(s), BinaryMask(1, 3, {1, 0, 1}));
  auto tie = set_from(1, 2, {{1, 0}, {0, 0}});
  EXPECT_EQ(mean_prediction(tie), BinaryMask(1, 2, {1, 0}));
  auto same = set_from(1, 2, {{1, 0}, {1, 0}});
  EXPECT_EQ(mean_prediction(same), BinaryMask(1, 2, {1, 0}));
}

TEST(Uncertainty, MapValues) {
  auto s = set_from(1, 3, {{1, 1, 0}, {0, 1, 0}, {0, 1, 0}, {1, 1, 0}});
  const auto m = uncertainty_map(s);
  EXPECT_DOUBLE_EQ(m[0], 0.5);
  EXPECT_EQ(m[1], 0.0);
  EXPECT_EQ(m[2], 0.0);
  auto q = set_from(1, 1, {{1}, {0}, {0}, {0}});
  EXPECT_NEAR(uncertainty_map(q)[0], std::sqrt(0.25 * 0.75), 1e-15);
  EXPECT_NEAR(uncertainty_map(q)[0], 0.4330, 1e-4);
  EXPECT_THROW(uncertainty_map(set_from(1, 1, {{1}})), InsufficientTrials);
}

TEST(Uncertainty, DiceUncertainty) {
  BinaryMask ref(1, 10, {1, 1, 1, 1, 1, 0, 0, 0, 0, 0});
  // trial 0 swaps one pixel: 2*4/10 = 0.8; trial 1 is exact
  auto s = set_from(1, 10, {{1, 1, 1, 1, 0, 1, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 0, 0, 0, 0, 0}});
  const auto d = trial_dice(s, ref);
  EXPECT_DOUBLE_EQ(d[0], 0.8);
  EXPECT_DOUBLE_EQ(d[1], 1.0);
  EXPECT_NEAR(dice_uncertainty(s, ref), 0.1, 1e-15);
  auto same = set_from(1, 10, {{1, 1, 0, 0, 0, 0, 0, 0, 0, 0}, {1, 1, 0, 0, 0, 0, 0, 0, 0, 0}});
  EXPECT_EQ(dice_uncertainty(same, ref), 0.0);
  EXPECT_THROW(dice_uncertainty(s, BinaryMask()), UsageError);
  EXPECT_THROW(dice_uncertainty(s, BinaryMask(2, 5)), DimensionError);
  // the two-point example: Dice 0.8 and 0.9 -> 0.05
  EXPECT_NEAR(population_std(std::vector<double>{0.8, 0.9}), 0.05, 1e-15);
}

TEST(Uncertainty, McdScoreBruteForce) {
  // 4 pixels x 4 trials
  const std::vector<std::vector<std::uint8_t>> t{{1, 1, 0, 1}, {1, 0, 0, 1}, {1, 1, 1, 0}, {1, 0, 0, 0}};
  auto s = set_from(2, 2, t);
  double total = 0;
  std::size_t vol = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    double p = 0;
    for (const auto& tr : t) p += tr[i];
    p /= 4;
    total += std::sqrt(p * (1 - p));
    vol += p >= 0.5 ? 1 : 0;
  }
  EXPECT_NEAR(mcd_uncertainty(s), total / vol, 1e-15);
  auto same = set_from(1, 2, {{1, 0}, {1, 0}});
  EXPECT_EQ(mcd_uncertainty(same), 0.0);
  auto empty = set_from(1, 2, {{0, 0}, {0, 1}, {0, 0}});
  EXPECT_THROW(mcd_uncertainty(empty), EmptyPrediction);
  const auto rep = uncertainty_report(empty, BinaryMask(1, 2, {0, 1}));
  EXPECT_FALSE(rep.mcd_uncertainty.has_value());
}

TEST(Uncertainty, McPredictContract) {
  RngStream init(6, 6);
  UNetModel<float> model(tiny(), init);
  RngStream rng(7, 7);
  const auto img = random_tensor<float>({1, 16, 16}, rng);
  const auto one = mc_predict(model, img, 1, 99, 1);
  ASSERT_EQ(one.n_trials(), 1u);
  std::vector<RngStream> st{trial_stream(99, 0)};
  const auto direct =
      model.forward(img.reshaped({1, 1, 16, 16}), ForwardMode::mc_dropout, std::span<RngStream>(st)).value();
  for (std::size_t i = 0; i < 256; ++i) ASSERT_EQ(one.prob_maps[i], direct[i]);

  const auto a = mc_predict(model, img, 20, 5, 1);
  const auto b = mc_predict(model, img, 20, 5, 64);
  const auto c = mc_predict(model, img, 20, 5, 7);
  EXPECT_EQ(a.prob_maps, b.prob_maps);
  EXPECT_EQ(a.prob_maps, c.prob_maps);
  EXPECT_EQ(a.bin_masks, b.bin_masks);
  EXPECT_THROW(mc_predict(model, img, 0, 5, 1), ParameterError);
  EXPECT_THROW(mc_predict(model, img, 4, 5, 0), ParameterError);
}

TEST(Uncertainty, BootstrapEdgeCases) {
  RngStream rng(1, 1);
  std::vector<std::vector<std::uint8_t>> t;
  for (int i = 0; i < 40; ++i) {
    std::vector<std::uint8_t> m(16);
    for (auto& v : m) v = rng.next_uniform() < 0.6;
    t.push_back(m);
  }
  auto s = set_from(4, 4, t);
  const std::vector<std::size_t> full{40};
  RngStream b(2, 2);
  const auto pts = bootstrap_trial_convergence(s, full, 10, b);
  EXPECT_EQ(pts[0].std, 0.0);
  EXPECT_NEAR(pts[0].mean, mcd_uncertainty(s), 1e-12);
  const std::vector<std::size_t> too_many{41};
  EXPECT_THROW(bootstrap_trial_convergence(s, too_many, 10, b), ParameterError);
  const std::vector<std::size_t> ns{4, 32};
  const auto conv = bootstrap_trial_convergence(s, ns, 200, b);
  EXPECT_GT(conv[0].std, conv[1].std);
}
