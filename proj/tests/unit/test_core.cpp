#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "../gradient_suite.hpp"
#include "mcdseg/errors.hpp"
#include "mcdseg/kernels.hpp"
#include "mcdseg/ops.hpp"
#include "mcdseg/optim.hpp"
#include "mcdseg/rng.hpp"

using namespace mcdseg;
using testutil::random_tensor;

// ---- rng

TEST(Rng, RandomAccessMatchesSequentialWalk) {
  RngStream a(42, 7);
  for (std::uint64_t k = 0; k < 100; ++k) EXPECT_EQ(a.next_u64(), RngStream(42, 7).bits_at(k));
  EXPECT_EQ(a.position(), 100u);
}

TEST(Rng, StreamsAndSeedsDiffer) {
  EXPECT_NE(RngStream(1, 0).bits_at(0), RngStream(1, 1).bits_at(0));
  EXPECT_NE(RngStream(1, 0).bits_at(0), RngStream(2, 0).bits_at(0));
  const RngStream r(3, 4);
  EXPECT_NE(r.child(0).bits_at(0), r.child(1).bits_at(0));
  EXPECT_EQ(r.child(5).bits_at(9), RngStream(3, 4).child(5).bits_at(9));
}

TEST(Rng, UniformAndBelowRanges) {
  RngStream r(9, 9);
  double s = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.next_uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    ASSERT_LT(r.next_below(7), 7u);
  }
  EXPECT_NEAR(s / 20000, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
  RngStream r(5, 1);
  double s = 0, s2 = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const double z = r.next_normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.03);
  EXPECT_EQ(r.position(), 2u * n);
}

// ---- kernels: optimized vs reference

template <typename T>
class KernelTyped : public ::testing::Test {};
using KernelTypes = ::testing::Types<float, double>;
TYPED_TEST_SUITE(KernelTyped, KernelTypes);

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

TYPED_TEST(KernelTyped, GemmMatchesReferenceAllTransposes) {
  using T = TypeParam;
  const double tol = std::is_same_v<T, float> ? 1e-3 : 1e-10;
  RngStream rng(11, 0);
  for (auto [m, n, k] : {std::array<std::size_t, 3>{1, 1, 1}, {7, 13, 5}, {37, 70, 300}, {100, 33, 257}}) {
    for (bool ta : {false, true}) {
      for (bool tb : {false, true}) {
        auto a = random_tensor<T>({m * k}, rng), b = random_tensor<T>({k * n}, rng);
        std::vector<T> c1(m * n, T(0.5)), c2(m * n, T(0.5));
        const std::size_t lda = ta ? m : k, ldb = tb ? k : n;
        kernels::gemm(m, n, k, a.ptr(), lda, ta, b.ptr(), ldb, tb, c1.data(), n, true);
        kernels::reference::gemm(m, n, k, a.ptr(), lda, ta, b.ptr(), ldb, tb, c2.data(), n, true);
        EXPECT_LT(max_abs_diff(c1, c2), tol) << m << "x" << n << "x" << k << " " << ta << tb;
      }
    }
  }
}

TYPED_TEST(KernelTyped, ConvMatchesReference) {
  using T = TypeParam;
  const double tol = std::is_same_v<T, float> ? 1e-3 : 1e-10;
  RngStream rng(12, 0);
  for (std::size_t k : {1u, 3u, 5u, 7u}) {
    kernels::ConvGeometry g{2, 3, 4, 9, 8, k};
    auto x = random_tensor<T>({g.batch * g.in_channels * g.plane()}, rng);
    auto w = random_tensor<T>({g.out_channels * g.patch()}, rng);
    auto b = random_tensor<T>({g.out_channels}, rng);
    auto dy = random_tensor<T>({g.batch * g.out_channels * g.plane()}, rng);
    std::vector<T> y1(dy.size()), y2(dy.size());
    kernels::conv2d_forward(x.ptr(), w.ptr(), b.ptr(), y1.data(), g);
    kernels::reference::conv2d_forward(x.ptr(), w.ptr(), b.ptr(), y2.data(), g);
    EXPECT_LT(max_abs_diff(y1, y2), tol) << k;

    std::vector<T> dx1(x.size()), dx2(x.size()), dw1(w.size()), dw2(w.size()), db1(b.size()), db2(b.size());
    kernels::conv2d_backward(x.ptr(), w.ptr(), dy.ptr(), dx1.data(), dw1.data(), db1.data(), g);
    kernels::reference::conv2d_backward(x.ptr(), w.ptr(), dy.ptr(), dx2.data(), dw2.data(), db2.data(), g);
    EXPECT_LT(max_abs_diff(dx1, dx2), tol);
    EXPECT_LT(max_abs_diff(dw1, dw2), tol);
    EXPECT_LT(max_abs_diff(db1, db2), tol);
  }
}

TEST(Kernels, ConvSampleResultIndependentOfBatch) {
  RngStream rng(13, 0);
  kernels::ConvGeometry g{5, 4, 8, 12, 12, 5};
  auto x = random_tensor<float>({g.batch * g.in_channels * g.plane()}, rng);
  auto w = random_tensor<float>({g.out_channels * g.patch()}, rng);
  std::vector<float> full(g.batch * g.out_channels * g.plane());
  kernels::conv2d_forward<float>(x.ptr(), w.ptr(), nullptr, full.data(), g);
  kernels::ConvGeometry one = g;
  one.batch = 1;
  for (std::size_t n = 0; n < g.batch; ++n) {
    std::vector<float> y(g.out_channels * g.plane());
    kernels::conv2d_forward<float>(x.ptr() + n * g.in_channels * g.plane(), w.ptr(), nullptr, y.data(), one);
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_EQ(y[i], full[n * y.size() + i]);
  }
}

// ---- ops: worked examples

TEST(Ops, ConvIdentityZeroAndSlidingWindow) {
  RngStream rng(1, 1);
  Var<double> x(random_tensor<double>({2, 3, 4, 5}, rng));
  Tensor<double> w({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  EXPECT_EQ(conv2d<double>(x, Var<double>(w), std::nullopt).value().data()[17], x.value()[17]);
  const auto ident = conv2d<double>(x, Var<double>(w), std::nullopt).value();
  for (std::size_t i = 0; i < ident.size(); ++i) ASSERT_EQ(ident[i], x.value()[i]);

  Tensor<double> b({2}, 0.0);
  b[0] = 1.5;
  b[1] = -2.0;
  const auto flat = conv2d(x, Var<double>(Tensor<double>({2, 3, 3, 3})), std::optional(Var<double>(b))).value();
  for (std::size_t i = 0; i < 20; ++i) ASSERT_EQ(flat[i], 1.5);
  for (std::size_t i = 20; i < 40; ++i) ASSERT_EQ(flat[i], -2.0);

  Tensor<double> img({1, 1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto y = conv2d<double>(Var<double>(img), Var<double>(Tensor<double>({1, 1, 3, 3}, 1.0)), std::nullopt).value();
  EXPECT_EQ(y[4], 45.0);
  EXPECT_EQ(y[0], 12.0);
}

TEST(Ops, ConvSamePaddingShapesAndChannelMismatch) {
  for (std::size_t k : {1u, 3u, 5u, 7u}) {
    Var<double> x(Tensor<double>({1, 2, 9, 6}));
    auto y = conv2d<double>(x, Var<double>(Tensor<double>({3, 2, k, k})), std::nullopt);
    EXPECT_EQ(y.shape(), (Shape{1, 3, 9, 6}));
  }
  EXPECT_THROW(conv2d<double>(Var<double>(Tensor<double>({1, 2, 4, 4})), Var<double>(Tensor<double>({3, 1, 3, 3})),
                              std::nullopt),
               DimensionError);
}

TEST(Ops, TransposedConvScatter) {
  Tensor<double> w({1, 1, 2, 2}, std::vector<double>{2, 3, 5, 7});
  const auto y = transposed_conv2d<double>(Var<double>(Tensor<double>({1, 1, 1, 1}, 1.5)), Var<double>(w), std::nullopt).value();
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y[0], 3.0);
  EXPECT_EQ(y[1], 4.5);
  EXPECT_EQ(y[2], 7.5);
  EXPECT_EQ(y[3], 10.5);
  const auto z = transposed_conv2d<double>(Var<double>(Tensor<double>({2, 1, 3, 3})), Var<double>(w), std::nullopt).value();
  for (double v : z.data()) ASSERT_EQ(v, 0.0);

  Tensor<double> corner({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 0});
  Tensor<double> in({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto c = transposed_conv2d<double>(Var<double>(in), Var<double>(corner), std::nullopt).value();
  const std::vector<double> expect{1, 0, 2, 0, 0, 0, 0, 0, 3, 0, 4, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(c[i], expect[i]);
}

TEST(Ops, MaxPool) {
  Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1, 4, 3, 2});
  EXPECT_EQ(max_pool2d(Var<double>(x)).value()[0], 4.0);
  const auto c = max_pool2d(Var<double>(Tensor<double>({2, 3, 6, 4}, 2.5))).value();
  EXPECT_EQ(c.shape(), (Shape{2, 3, 3, 2}));
  for (double v : c.data()) ASSERT_EQ(v, 2.5);
  EXPECT_THROW(max_pool2d(Var<double>(Tensor<double>({1, 1, 3, 4}))), DimensionError);
  // pool then up-conv restores H, W
  auto up = transposed_conv2d<double>(max_pool2d(Var<double>(Tensor<double>({2, 3, 8, 6}))),
                                      Var<double>(Tensor<double>({3, 3, 2, 2})), std::nullopt);
  EXPECT_EQ(up.shape(), (Shape{2, 3, 8, 6}));
}

TEST(Ops, BatchNorm) {
  RngStream rng(2, 2);
  auto x = random_tensor<double>({4, 2, 3, 3}, rng, -3.0, 5.0);
  BatchNormState<double> st(2);
  const auto y = batch_norm2d(Var<double>(x), Var<double>(Tensor<double>({2}, 1.0)), Var<double>(Tensor<double>({2})),
                              st, NormMode::train)
                     .value();
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, s2 = 0, mu = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 9; ++i) {
        s += y[(n * 2 + c) * 9 + i];
        s2 += y[(n * 2 + c) * 9 + i] * y[(n * 2 + c) * 9 + i];
        mu += x[(n * 2 + c) * 9 + i];
      }
    EXPECT_NEAR(s / 36, 0.0, 1e-12);
    EXPECT_NEAR(s2 / 36, 1.0, 1e-4);
    EXPECT_NEAR(st.running_mean[c], 0.1 * mu / 36, 1e-12);
  }
  BatchNormState<double> st2(1);
  const auto k = batch_norm2d(Var<double>(Tensor<double>({2, 1, 2, 2}, 3.0)), Var<double>(Tensor<double>({1}, 2.0)),
                              Var<double>(Tensor<double>({1}, 0.7)), st2, NormMode::train)
                     .value();
  for (double v : k.data()) EXPECT_NEAR(v, 0.7, 1e-12);
  BatchNormState<double> st3(1);
  EXPECT_THROW(batch_norm2d(Var<double>(Tensor<double>({1, 1, 1, 1})), Var<double>(Tensor<double>({1}, 1.0)),
                            Var<double>(Tensor<double>({1})), st3, NormMode::train),
               DegenerateError);
}

TEST(Ops, Dropout) {
  RngStream rng(3, 3);
  Var<double> x(random_tensor<double>({3, 4, 5}, rng));
  RngStream r1(1, 1);
  EXPECT_EQ(dropout(x, 0.0, r1, true).value(), x.value());
  EXPECT_EQ(dropout(x, 0.7, r1, false).value(), x.value());
  EXPECT_THROW(dropout(x, 1.0, r1, true), ParameterError);

  Var<double> ones(Tensor<double>({100000}, 1.0));
  RngStream r2(4, 4);
  const auto y = dropout(ones, 0.5, r2, true).value();
  double s = 0;
  for (double v : y.data()) s += v;
  EXPECT_NEAR(s / 100000, 1.0, 0.02);

  RngStream a(8, 8), b(8, 8);
  EXPECT_EQ(dropout(x, 0.5, a, true).value(), dropout(x, 0.5, b, true).value());
  EXPECT_EQ(a, b);
}

TEST(Ops, ActivationsAndConcat) {
  Var<double> x(Tensor<double>({3}, std::vector<double>{-1, 2, 0}));
  const auto r = relu(x).value();
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 2.0);
  EXPECT_EQ(sigmoid(x).value()[2], 0.5);
  const double h = 1e-6;
  const double d = (sigmoid(Var<double>(Tensor<double>({1}, h))).value()[0] -
                    sigmoid(Var<double>(Tensor<double>({1}, -h))).value()[0]) /
                   (2 * h);
  EXPECT_NEAR(d, 0.25, 1e-9);

  auto c = concat_channels(Var<double>(Tensor<double>({1, 2, 4, 4})), Var<double>(Tensor<double>({1, 3, 4, 4})));
  EXPECT_EQ(c.shape(), (Shape{1, 5, 4, 4}));
  RngStream rng(5, 5);
  Var<double> a(random_tensor<double>({2, 2, 3, 3}, rng));
  EXPECT_EQ(concat_channels(a, Var<double>(Tensor<double>({2, 0, 3, 3}))).value(), a.value());
  EXPECT_THROW(concat_channels(a, Var<double>(Tensor<double>({2, 1, 3, 4}))), DimensionError);
}

TEST(Autodiff, BackwardExamples) {
  RngStream rng(6, 6);
  Var<double> x(random_tensor<double>({2, 3}, rng), true);
  backward(sum(x));
  for (double g : x.grad().data()) EXPECT_EQ(g, 1.0);
  x.zero_grad();
  backward(sum(mul(x, x)));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2 * x.value()[i]);
  EXPECT_THROW(backward(x), UsageError);
}

TEST(Autodiff, NoGradGuardRecordsNothing) {
  Var<double> x(Tensor<double>({2}, 1.0), true);
  Var<double> y;
  {
    NoGradGuard g;
    y = sum(mul(x, x));
  }
  EXPECT_FALSE(y.requires_grad());
}

TEST(Autodiff, GradientSuiteThreeSeeds) {
  for (const auto& c : gradsuite::op_cases()) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) EXPECT_LE(c.run(seed), 1e-4) << c.name << " seed " << seed;
  }
  EXPECT_LE(gradsuite::unet_gradient_error(1, 2), 1e-4);
}

// ---- Adam

TEST(Adam, ZeroGradientAndZeroLr) {
  RngStream rng(7, 7);
  Parameter<double> p(random_tensor<double>({5}, rng));
  const auto before = p.value.value();
  adam_step(p, AdamConfig{});
  EXPECT_EQ(p.value.value(), before);

  p.value.grad() = random_tensor<double>({5}, rng);
  AdamConfig zero;
  zero.learning_rate = 0.0;
  adam_step(p, zero);
  EXPECT_EQ(p.value.value(), before);
}

TEST(Adam, FirstStepIsSignAndTextbookRecurrence) {
  Parameter<double> p(Tensor<double>({2}, std::vector<double>{1.0, -1.0}));
  p.value.grad() = Tensor<double>({2}, std::vector<double>{0.3, -2.0});
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  adam_step(p, cfg);
  EXPECT_NEAR(p.value.value()[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p.value.value()[1], -1.0 + 0.01, 1e-9);

  // two steps of a scalar with constant g
  Parameter<double> q(Tensor<double>({1}, 0.5));
  const double g = 0.7;
  double m = 0, v = 0, x = 0.5;
  for (int t = 1; t <= 2; ++t) {
    q.value.grad() = Tensor<double>({1}, g);
    adam_step(q, cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    x -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(q.value.value()[0], x, 1e-12);
  }
  EXPECT_EQ(q.step_count, 2u);
}
