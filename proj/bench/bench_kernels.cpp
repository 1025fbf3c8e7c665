// Production kernels against the serial reference versions, and the
// mini-batch gradient with and without OpenMP.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <vector>

#include "vth/features.hpp"
#include "vth/kernels.hpp"
#include "vth/pnet.hpp"
#include "vth/rng.hpp"
#include "vth/trainer.hpp"

using namespace vth;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

Plane noise_plane(std::size_t side, std::uint64_t seed) {
  Plane p(side, side);
  p.data = noise(side * side, seed);
  return p;
}

// conv1 shape: 4 x 32 x 32 input, 32 filters of 5 x 5.
constexpr std::size_t kIn = 4, kSide = 32, kOut = 32, kK = 5, kOSide = kSide - kK + 1;

void BM_ConvForward(benchmark::State& state) {
  const auto in = noise(kIn * kSide * kSide, 1);
  const auto w = noise(kOut * kIn * kK * kK, 2);
  const std::vector<double> b(kOut, 0.1);
  std::vector<double> col(kIn * kK * kK * kOSide * kOSide), out(kOut * kOSide * kOSide);
  for (auto _ : state) {
    kernels::conv2d_forward(in, kIn, kSide, kSide, w, b, kOut, kK, col, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_ConvForward);

void BM_ConvForwardReference(benchmark::State& state) {
  const auto in = noise(kIn * kSide * kSide, 1);
  const auto w = noise(kOut * kIn * kK * kK, 2);
  const std::vector<double> b(kOut, 0.1);
  std::vector<double> out(kOut * kOSide * kOSide);
  for (auto _ : state) {
    kernels::reference::conv2d_forward(in, kIn, kSide, kSide, w, b, kOut, kK, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_ConvForwardReference);

void BM_ConvBackward(benchmark::State& state) {
  const auto in = noise(kIn * kSide * kSide, 1);
  const auto w = noise(kOut * kIn * kK * kK, 2);
  const auto d_out = noise(kOut * kOSide * kOSide, 3);
  const std::vector<double> b(kOut, 0.1);
  std::vector<double> col(kIn * kK * kK * kOSide * kOSide), out(kOut * kOSide * kOSide);
  std::vector<double> dw(w.size()), db(kOut), d_in(in.size()), scratch(col.size());
  kernels::conv2d_forward(in, kIn, kSide, kSide, w, b, kOut, kK, col, out);
  for (auto _ : state) {
    kernels::conv2d_backward(d_out, col, kIn, kSide, kSide, w, kOut, kK, dw, db, d_in, scratch);
    benchmark::DoNotOptimize(d_in.data());
  }
}
BENCHMARK(BM_ConvBackward);

void BM_ConvBackwardReference(benchmark::State& state) {
  const auto in = noise(kIn * kSide * kSide, 1);
  const auto w = noise(kOut * kIn * kK * kK, 2);
  const auto d_out = noise(kOut * kOSide * kOSide, 3);
  std::vector<double> dw(w.size()), db(kOut), d_in(in.size());
  for (auto _ : state) {
    kernels::reference::conv2d_backward(d_out, in, kIn, kSide, kSide, w, kOut, kK, dw, db, d_in);
    benchmark::DoNotOptimize(d_in.data());
  }
}
BENCHMARK(BM_ConvBackwardReference);

void BM_GaussianFilter(benchmark::State& state) {
  const auto src = noise_plane(static_cast<std::size_t>(state.range(0)), 4);
  const auto win = gaussian_window();
  Plane dst;
  for (auto _ : state) {
    kernels::separable_filter(src, win.taps, dst);
    benchmark::DoNotOptimize(dst.data.data());
  }
}
BENCHMARK(BM_GaussianFilter)->Arg(64)->Arg(512);

void BM_GaussianFilterReference(benchmark::State& state) {
  const auto src = noise_plane(static_cast<std::size_t>(state.range(0)), 4);
  const auto win = gaussian_window();
  Plane dst;
  for (auto _ : state) {
    kernels::reference::filter2d(src, win.weights, win.size, dst);
    benchmark::DoNotOptimize(dst.data.data());
  }
}
BENCHMARK(BM_GaussianFilterReference)->Arg(64)->Arg(512);

// One default-size mini-batch (64 patches) of forward + backward passes.
void BM_BatchGradient(benchmark::State& state) {
  std::vector<QualityRecord> records;
  for (std::uint64_t i = 0; i < 64; ++i) {
    auto ref = noise(32 * 32, 10 + i);
    for (double& v : ref) v = 0.5 + 0.3 * v;
    auto dist = ref;
    Rng rng(100 + i);
    for (double& v : dist) v = std::clamp(v + rng.uniform(-0.05, 0.05), 0.0, 1.0);
    records.push_back({GrayImage(32, 32, std::move(ref)), GrayImage(32, 32, std::move(dist)), 0.4});
  }
  TrainConfig cfg;
  const auto samples = build_samples(records, cfg);
  std::vector<std::size_t> batch(samples.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
  const auto params = init_params(1);
  PNetGrads grads;
  const auto exec = state.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(params, samples, batch, cfg, 0, 0, grads, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_BatchGradient)->ArgName("parallel")->Arg(0)->Arg(1)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
