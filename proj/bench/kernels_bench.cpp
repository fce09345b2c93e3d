// Optimized kernels against the serial reference loops, plus whole-network
// forward/backward and MC trial batching on the desk U-Net.
//
//   ./mcdseg_bench --benchmark_filter=Conv
#include <benchmark/benchmark.h>

#include <vector>

#include "mcdseg/kernels.hpp"
#include "mcdseg/losses.hpp"
#include "mcdseg/uncertainty.hpp"
#include "mcdseg/unet.hpp"

namespace {

using namespace mcdseg;

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.next_uniform(-1.0, 1.0));
  return v;
}

void gemm_args(benchmark::internal::Benchmark* b) {
  b->Args({16, 2304, 400})->Args({32, 576, 800})->Args({64, 144, 1600})->Args({400, 2304, 16});
}

template <bool kReference>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto k = static_cast<std::size_t>(state.range(2));
  const auto a = random_vec(m * k, 1), b = random_vec(k * n, 2);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (kReference) {
      kernels::reference::gemm(m, n, k, a.data(), k, false, b.data(), n, false, c.data(), n, false);
    } else {
      kernels::gemm(m, n, k, a.data(), k, false, b.data(), n, false, c.data(), n, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * m * n * k, benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Gemm<false>)->Name("Gemm/blocked")->Apply(gemm_args);
BENCHMARK(BM_Gemm<true>)->Name("Gemm/reference")->Apply(gemm_args);

kernels::ConvGeometry conv_geometry(const benchmark::State& state) {
  kernels::ConvGeometry g;
  g.batch = static_cast<std::size_t>(state.range(0));
  g.in_channels = static_cast<std::size_t>(state.range(1));
  g.out_channels = static_cast<std::size_t>(state.range(2));
  g.height = g.width = static_cast<std::size_t>(state.range(3));
  g.kernel = 5;
  return g;
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({4, 16, 16, 48})->Args({4, 32, 32, 24})->Args({4, 64, 32, 24});
}

template <bool kReference>
void BM_ConvForward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vec(g.batch * g.in_channels * g.plane(), 3);
  const auto w = random_vec(g.out_channels * g.patch(), 4);
  std::vector<float> y(g.batch * g.out_channels * g.plane());
  for (auto _ : state) {
    if constexpr (kReference) kernels::reference::conv2d_forward<float>(x.data(), w.data(), nullptr, y.data(), g);
    else kernels::conv2d_forward<float>(x.data(), w.data(), nullptr, y.data(), g);
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * g.batch * g.out_channels * g.plane() * g.patch(),
                         benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}
BENCHMARK(BM_ConvForward<false>)->Name("ConvForward/optimized")->Apply(conv_args);
BENCHMARK(BM_ConvForward<true>)->Name("ConvForward/reference")->Apply(conv_args);

template <bool kReference>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vec(g.batch * g.in_channels * g.plane(), 5);
  const auto w = random_vec(g.out_channels * g.patch(), 6);
  const auto dy = random_vec(g.batch * g.out_channels * g.plane(), 7);
  std::vector<float> dx(x.size()), dw(w.size()), db(g.out_channels);
  for (auto _ : state) {
    if constexpr (kReference) {
      kernels::reference::conv2d_backward(x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data(), g);
    } else {
      kernels::conv2d_backward(x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data(), g);
    }
    benchmark::DoNotOptimize(dx.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(4.0 * g.batch * g.out_channels * g.plane() * g.patch(),
                         benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}
BENCHMARK(BM_ConvBackward<false>)->Name("ConvBackward/optimized")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<true>)->Name("ConvBackward/reference")->Apply(conv_args);

Tensor<float> random_images(std::size_t n, std::uint64_t seed) {
  Tensor<float> t(Shape{n, 1, 48, 48});
  RngStream rng(seed, 1);
  for (auto& v : t.data()) v = static_cast<float>(rng.next_normal());
  return t;
}

void BM_UNetTrainStep(benchmark::State& state) {
  RngStream rng(1, 2);
  UNetModel<float> model(UNetConfig::desk(), rng);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_images(n, 3);
  Tensor<float> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > 0.0f ? 1.0f : 0.0f;
  for (auto _ : state) {
    model.zero_grad();
    auto out = model.forward(x, ForwardMode::train, rng);
    auto loss = dice_loss(y, out);
    backward(loss);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_UNetTrainStep)->Arg(1)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_UNetForward(benchmark::State& state) {
  RngStream rng(1, 2);
  UNetModel<float> model(UNetConfig::desk(), rng);
  const auto x = random_images(static_cast<std::size_t>(state.range(0)), 4);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, ForwardMode::deterministic, rng));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * state.range(0)));
}
BENCHMARK(BM_UNetForward)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_McPredict(benchmark::State& state) {
  RngStream rng(1, 2);
  UNetModel<float> model(UNetConfig::desk(), rng);
  const auto x = random_images(1, 5).reshaped(Shape{1, 48, 48});
  for (auto _ : state) {
    benchmark::DoNotOptimize(mc_predict(model, x, 64, 7, static_cast<std::size_t>(state.range(0))));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 64));
}
BENCHMARK(BM_McPredict)->Arg(1)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
