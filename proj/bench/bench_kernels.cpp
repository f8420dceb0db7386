// Serial reference convolution against the OpenMP/GEMM path on the layer
// shapes of the desk network, plus whole-network inference.
//
//   ./drht_bench --benchmark_filter=Forward

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "drht/kernels.hpp"
#include "drht/model.hpp"
#include "drht/parallel.hpp"

namespace {

using drht::kernels::ConvGeometry;

struct Layer {
  std::size_t cin, cout, k, stride, hw;
};

// Encoder layers of the desk network on a 64x64 patch.
const Layer kLayers[] = {
    {3, 64, 9, 1, 64},
    {64, 64, 5, 1, 64},
    {64, 128, 3, 2, 64},
    {128, 128, 3, 2, 32},
};

std::vector<float> random_buffer(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = u(rng);
  return v;
}

struct Fixture {
  ConvGeometry g;
  std::vector<float> x, w, b, y;

  explicit Fixture(const Layer& l) {
    g = drht::kernels::conv_geometry({1, l.cin, l.hw, l.hw}, {l.cout, l.cin, l.k, l.k}, l.stride);
    x = random_buffer(g.batch * g.in_channels * g.in_pixels(), 1);
    w = random_buffer(g.out_channels * g.patch_size(), 2);
    b = random_buffer(g.out_channels, 3);
    y.assign(g.batch * g.out_channels * g.out_pixels(), 0.0f);
  }

  double flops() const { return 2.0 * g.batch * g.out_channels * g.out_pixels() * g.patch_size(); }
};

// state.range(0): layer index; state.range(1): 0 = reference, else thread count.
void BM_ConvForward(benchmark::State& state) {
  Fixture f(kLayers[state.range(0)]);
  const int threads = static_cast<int>(state.range(1));
  if (threads > 0) drht::set_num_threads(threads);
  for (auto _ : state) {
    if (threads == 0) {
      drht::kernels::reference::conv2d_forward(f.g, f.x.data(), f.w.data(), f.b.data(), f.y.data());
    } else {
      drht::kernels::conv2d_forward(f.g, f.x.data(), f.w.data(), f.b.data(), f.y.data());
    }
    benchmark::DoNotOptimize(f.y.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(f.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_ConvBackwardInput(benchmark::State& state) {
  Fixture f(kLayers[state.range(0)]);
  const int threads = static_cast<int>(state.range(1));
  if (threads > 0) drht::set_num_threads(threads);
  std::vector<float> dx(f.x.size());
  const auto dy = random_buffer(f.y.size(), 4);
  for (auto _ : state) {
    std::fill(dx.begin(), dx.end(), 0.0f);
    if (threads == 0) {
      drht::kernels::reference::conv2d_backward_input(f.g, dy.data(), f.w.data(), dx.data());
    } else {
      drht::kernels::conv2d_backward_input(f.g, dy.data(), f.w.data(), dx.data());
    }
    benchmark::DoNotOptimize(dx.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(f.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_ConvBackwardWeight(benchmark::State& state) {
  Fixture f(kLayers[state.range(0)]);
  const int threads = static_cast<int>(state.range(1));
  if (threads > 0) drht::set_num_threads(threads);
  std::vector<float> dw(f.w.size()), db(f.b.size());
  const auto dy = random_buffer(f.y.size(), 5);
  for (auto _ : state) {
    std::fill(dw.begin(), dw.end(), 0.0f);
    std::fill(db.begin(), db.end(), 0.0f);
    if (threads == 0) {
      drht::kernels::reference::conv2d_backward_weight(f.g, f.x.data(), dy.data(), dw.data(), db.data());
    } else {
      drht::kernels::conv2d_backward_weight(f.g, f.x.data(), dy.data(), dw.data(), db.data());
    }
    benchmark::DoNotOptimize(dw.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(f.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

void conv_args(benchmark::internal::Benchmark* b) {
  const int max_threads = drht::num_threads();
  for (int layer = 0; layer < 4; ++layer) {
    b->Args({layer, 0});
    b->Args({layer, 1});
    if (max_threads > 1) b->Args({layer, max_threads});
  }
  b->ArgNames({"layer", "threads"})->Unit(benchmark::kMillisecond);
}

BENCHMARK(BM_ConvForward)->Apply(conv_args);
BENCHMARK(BM_ConvBackwardInput)->Apply(conv_args);
BENCHMARK(BM_ConvBackwardWeight)->Apply(conv_args);

// Full DRHT inference on an H x W frame with the optimized kernels.
void BM_DrhtInference(benchmark::State& state) {
  const auto spec = drht::desk_network_spec(3);
  const auto f1 = drht::build_network<float>(spec, 1);
  const auto f2 = drht::build_network<float>(spec, 2);
  const auto h = static_cast<std::size_t>(state.range(0)), w = static_cast<std::size_t>(state.range(1));
  drht::Tensor<float> x({1, 3, h, w});
  const auto buf = random_buffer(x.size(), 6);
  std::copy(buf.begin(), buf.end(), x.values().begin());
  for (auto& v : x.values()) v = 0.5f + 0.5f * v;
  for (auto _ : state) {
    auto out = drht::forward_drht(f1, f2, x, drht::DomainTransferParams{});
    benchmark::DoNotOptimize(out.i_ldr.values().data());
  }
}

BENCHMARK(BM_DrhtInference)->Args({64, 64})->Args({256, 512})->ArgNames({"h", "w"})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
