#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "../test_util.hpp"
#include "mcdseg/errors.hpp"
#include "mcdseg/losses.hpp"
#include "mcdseg/mask.hpp"
#include "mcdseg/metrics.hpp"
#include "mcdseg/phantom.hpp"

using namespace mcdseg;

namespace {

BinaryMask square(std::size_t n, std::size_t y0, std::size_t x0, std::size_t side) {
  BinaryMask m(n, n);
  for (std::size_t y = y0; y < y0 + side; ++y)
    for (std::size_t x = x0; x < x0 + side; ++x) m.set(y, x, true);
  return m;
}

PhantomConfig noiseless() {
  PhantomConfig c;
  c.noise_sigma = 0.0;
  return c;
}

}  // namespace

// ---- metrics

TEST(Metrics, DiceExamples) {
  const auto a = square(6, 0, 0, 2);
  EXPECT_EQ(dice_coefficient(a, a), 1.0);
  EXPECT_EQ(dice_coefficient(a, square(6, 3, 3, 2)), 0.0);
  EXPECT_EQ(dice_coefficient(a, square(6, 0, 1, 2)), 0.5);
  EXPECT_EQ(dice_coefficient(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);
  EXPECT_EQ(dice_coefficient(BinaryMask(3, 3), square(3, 0, 0, 1)), 0.0);
  EXPECT_THROW(dice_coefficient(BinaryMask(3, 3), BinaryMask(3, 4)), DimensionError);
}

TEST(Metrics, DiceMatchesLossAtZeroEpsilon) {
  RngStream rng(3, 3);
  for (int i = 0; i < 50; ++i) {
    const auto a = testutil::random_binary<double>({8, 8}, rng, 0.3);
    const auto b = testutil::random_binary<double>({8, 8}, rng, 0.3);
    const auto ma = BinaryMask::threshold(a.data(), 8, 8), mb = BinaryMask::threshold(b.data(), 8, 8);
    EXPECT_NEAR(dice_coefficient(ma, mb), 1.0 - dice_loss(a, Var<double>(b), 0.0).value()[0], 1e-12);
    EXPECT_EQ(dice_coefficient(ma, mb), dice_coefficient(mb, ma));
  }
}

TEST(Metrics, FpFnRates) {
  const auto ref = square(8, 2, 2, 3);
  auto plus = ref;
  plus.set(0, 0, true);
  plus.set(0, 1, true);
  plus.set(7, 7, true);
  auto minus = ref;
  minus.set(2, 2, false);
  minus.set(4, 4, false);
  const std::vector<BinaryMask> refs{ref};
  auto r = fp_fn_rates(std::vector<BinaryMask>{plus}, refs);
  EXPECT_EQ(r.fp_rate, 3.0);
  EXPECT_EQ(r.fn_rate, 0.0);
  r = fp_fn_rates(std::vector<BinaryMask>{minus}, refs);
  EXPECT_EQ(r.fp_rate, 0.0);
  EXPECT_EQ(r.fn_rate, 2.0);
  r = fp_fn_rates(refs, refs);
  EXPECT_EQ(r.fp_rate + r.fn_rate, 0.0);
  EXPECT_THROW(fp_fn_rates(std::vector<BinaryMask>{}, std::vector<BinaryMask>{}), UsageError);
}

TEST(Metrics, Morphology) {
  BinaryMask ring(7, 7);
  for (std::size_t i = 1; i < 6; ++i) {
    ring.set(1, i, true);
    ring.set(5, i, true);
    ring.set(i, 1, true);
    ring.set(i, 5, true);
  }
  EXPECT_EQ(erode1(ring).count(), 0u);
  EXPECT_EQ(dilate1(square(5, 2, 2, 1)), square(5, 1, 1, 3));
  EXPECT_EQ(dilate1(square(5, 0, 0, 1)), square(5, 0, 0, 2));
  const auto edge = square(10, 0, 3, 5);
  EXPECT_EQ(erode1(edge).count(), 9u);  // out of bounds counts as background
  const auto m = square(10, 2, 3, 5);
  EXPECT_EQ(erode1(m).count(), 9u);
  EXPECT_TRUE(erode1(m).subset_of(m));
  EXPECT_TRUE(m.subset_of(dilate1(m)));
  EXPECT_TRUE(m.subset_of(erode1(dilate1(m))));
  EXPECT_TRUE(dilate1(erode1(m)).subset_of(m));
}

TEST(Metrics, RegressionExamples) {
  const std::vector<double> x{0, 1, 2}, y{0, 2, 4};
  const auto r = linear_regression(x, y);
  EXPECT_NEAR(r.slope, 2.0, 1e-15);
  EXPECT_NEAR(r.intercept, 0.0, 1e-15);
  EXPECT_NEAR(r.r_squared, 1.0, 1e-15);
  // cov = 4/3, var x = 2/3, var y = 8/3, mean diff = 1
  EXPECT_NEAR(r.ccc, 2 * (4.0 / 3) / (2.0 / 3 + 8.0 / 3 + 1.0), 1e-15);
  const std::vector<double> z{-1, 0, 1}, nz{1, 0, -1};
  EXPECT_NEAR(linear_regression(z, nz).ccc, -1.0, 1e-15);
  EXPECT_NEAR(linear_regression(z, z).ccc, 1.0, 1e-15);
  EXPECT_THROW(linear_regression(std::vector<double>{1, 1, 1}, z), DegenerateError);
  EXPECT_THROW(linear_regression(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DegenerateError);
}

TEST(Metrics, RegressionMatchesGridSearch) {
  RngStream rng(8, 8);
  for (int d = 0; d < 10; ++d) {
    std::vector<double> x(12), y(12);
    for (std::size_t i = 0; i < 12; ++i) {
      x[i] = rng.next_uniform(-2, 2);
      y[i] = 0.7 * x[i] + 0.3 + rng.next_normal() * 0.2;
    }
    const auto r = linear_regression(x, y);
    auto sse = [&](double a, double b) {
      double s = 0;
      for (std::size_t i = 0; i < 12; ++i) s += (y[i] - a * x[i] - b) * (y[i] - a * x[i] - b);
      return s;
    };
    // coordinate refinement from a coarse grid
    double a = 0, b = 0, step = 1.0;
    for (int it = 0; it < 80; ++it, step *= 0.7) {
      for (bool moved = true; moved;) {
        moved = false;
        for (auto [da, db] : {std::pair{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}}) {
          if (sse(a + da, b + db) < sse(a, b)) {
            a += da;
            b += db;
            moved = true;
          }
        }
      }
    }
    EXPECT_NEAR(r.slope, a, 1e-6);
    EXPECT_NEAR(r.intercept, b, 1e-6);
  }
}

TEST(Metrics, SpearmanAndMoments) {
  const std::vector<double> x{1, 2, 3, 4}, y{10, 20, 30, 40}, rev{4, 3, 2, 1}, tie{1, 1, 2, 3};
  EXPECT_NEAR(spearman_correlation(x, y), 1.0, 1e-15);
  EXPECT_NEAR(spearman_correlation(x, rev), -1.0, 1e-15);
  // average ranks 1.5,1.5,3,4 against 1..4
  EXPECT_NEAR(spearman_correlation(tie, x), 0.9486832980505138, 1e-12);
  EXPECT_NEAR(population_std(std::vector<double>{1, 1, 1, 1, 1, 7}), std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(standard_error(std::vector<double>{1, 2, 3}), 1.0 / std::sqrt(3.0), 1e-15);
}

// ---- phantom

TEST(Phantom, ConfigValidation) {
  PhantomConfig c;
  c.blood_radius = {5, 30};
  EXPECT_THROW(c.validate(), ConfigError);
  c = PhantomConfig{};
  c.labeled_cnr = 30;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Phantom, DeterministicAndGeometry) {
  PhantomConfig c;
  RngStream a(4, 4), b(4, 4);
  const auto s1 = generate_series(c, a), s2 = generate_series(c, b);
  for (std::size_t p = 0; p < kPairsPerSeries; ++p) {
    EXPECT_EQ(s1.control[p], s2.control[p]);
    EXPECT_EQ(s1.labeled[p], s2.labeled[p]);
  }
  for (std::size_t i = 0; i < s1.reference_mask.size(); ++i) {
    ASSERT_FALSE(s1.reference_mask[i] && s1.blood_mask[i]);
    ASSERT_FALSE(s1.reference_mask[i] && s1.background_mask[i]);
  }
  EXPECT_GT(s1.reference_mask.count(), 0u);
  EXPECT_GT(s1.blood_mask.count(), 0u);
  EXPECT_GT(s1.background_mask.count(), 0u);
}

TEST(Phantom, NoiselessRoundTrip) {
  RngStream rng(5, 5);
  for (int i = 0; i < 100; ++i) {
    const auto s = generate_series(noiseless(), rng);
    const auto r = quantify_mbf(s, s.reference_mask);
    ASSERT_NEAR(r.mean_mbf, s.true_mbf, 1e-9);
    ASSERT_NEAR(r.physiological_noise, 0.0, 1e-9);
  }
}

TEST(Phantom, QuantifyHandComputation) {
  MbfConstants k;
  std::vector<Tensor<double>> ctrl, lab;
  for (int p = 0; p < 6; ++p) {
    ctrl.emplace_back(Shape{2, 2}, std::vector<double>{1000, 1010, 990, 0});
    lab.emplace_back(Shape{2, 2}, std::vector<double>{880.0 + p, 890, 870, 0});
  }
  BinaryMask m(2, 2, {1, 1, 1, 0});
  const auto r = quantify_mbf(ctrl, lab, m, k);
  const double scale = 2 * k.m0 * k.inversion_time * std::exp(-k.inversion_time / k.t1_blood) / k.partition_coefficient;
  for (int p = 0; p < 6; ++p) EXPECT_NEAR(r.per_pair_mbf[p], (120.0 - p / 3.0) / scale, 1e-12);
  EXPECT_NEAR(k.flow_from_difference(k.signal_difference(1.3)), 1.3, 1e-14);

  const auto zero = quantify_mbf(ctrl, ctrl, m, k);
  for (double v : zero.per_pair_mbf) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(quantify_mbf(ctrl, lab, BinaryMask(2, 2), k), EmptyMask);
}

TEST(Phantom, PhysiologicalNoiseAndCnr) {
  MBFResult r;
  r.per_pair_mbf = {1, 1, 1, 1, 1, 7};
  EXPECT_NEAR(physiological_noise(r), std::sqrt(5.0), 1e-15);
  // blood 10, myo 4, background values 0/4 (std 2)
  Tensor<double> img({1, 6}, std::vector<double>{10, 10, 4, 4, 0, 4});
  BinaryMask blood(1, 6, {1, 1, 0, 0, 0, 0}), myo(1, 6, {0, 0, 1, 1, 0, 0}), bg(1, 6, {0, 0, 0, 0, 1, 1});
  EXPECT_NEAR(compute_cnr(img, myo, blood, bg), 3.0, 1e-15);
  Tensor<double> flat({1, 6}, std::vector<double>{4, 4, 4, 4, 0, 4});
  EXPECT_EQ(compute_cnr(flat, myo, blood, bg), 0.0);
  Tensor<double> nobg({1, 6}, std::vector<double>{4, 4, 4, 4, 1, 1});
  EXPECT_THROW(compute_cnr(nobg, myo, blood, bg), DegenerateError);
}

TEST(Phantom, ControlCnrExceedsLabeled) {
  RngStream rng(6, 6);
  for (int i = 0; i < 30; ++i) {
    const auto s = generate_series(PhantomConfig{}, rng);
    for (std::size_t p = 0; p < kPairsPerSeries; ++p) {
      EXPECT_GT(compute_cnr(s.control[p], s.reference_mask, s.blood_mask, s.background_mask),
                compute_cnr(s.labeled[p], s.reference_mask, s.blood_mask, s.background_mask));
    }
  }
}

TEST(Phantom, NormalizeImage) {
  RngStream rng(7, 7);
  const auto img = testutil::random_tensor<double>({12, 9}, rng, -3, 10);
  const auto n = normalize_image(img);
  double s = 0, s2 = 0;
  for (double v : n.data()) {
    s += v;
    s2 += v * v;
  }
  EXPECT_LE(std::abs(s / 108), 1e-9);
  EXPECT_LE(std::abs(s2 / 108 - 1), 1e-9);
  const auto again = normalize_image(n);
  for (std::size_t i = 0; i < n.size(); ++i) EXPECT_NEAR(again[i], n[i], 1e-12);
  EXPECT_THROW(normalize_image(Tensor<double>({3, 3}, 2.0)), DegenerateError);
}

TEST(Phantom, ReferenceMaskUnbiasedUnderNoise) {
  RngStream rng(8, 8);
  std::vector<double> err;
  for (int i = 0; i < 200; ++i) {
    const auto s = generate_series(PhantomConfig{}, rng);
    err.push_back(quantify_mbf(s, s.reference_mask).mean_mbf - s.true_mbf);
  }
  EXPECT_LE(std::abs(mean_of(err)), 2 * standard_error(err));
}
