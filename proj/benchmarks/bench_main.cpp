// Throughput benchmarks for the hot paths: the spectral transform pair, a
// representative complex conv block, one streaming hop, and whole-utterance
// offline enhancement.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <vector>

#include "sdccrn/model.hpp"
#include "sdccrn/streaming.hpp"

using namespace sdccrn;

namespace {

std::vector<float> random_wave(size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<float> d(0.f, 0.1f);
  std::vector<float> w(n);
  for (auto& x : w) x = d(gen);
  return w;
}

}  // namespace

static void BM_StftRoundTrip(benchmark::State& state) {
  const AnalysisConfig a = ModelSpec{}.analysis;
  const auto wave = random_wave(static_cast<size_t>(a.sample_rate), 1);
  NdArray<float> x({static_cast<int64_t>(wave.size())});
  std::copy(wave.begin(), wave.end(), x.data());
  NdArray<float> re, im;
  for (auto _ : state) {
    stft(x, a, re, im);
    auto back = istft(re, im, a, x.numel());
    benchmark::DoNotOptimize(back.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(wave.size()));
}
BENCHMARK(BM_StftRoundTrip)->Unit(benchmark::kMillisecond);

static void BM_ComplexConvBlock(benchmark::State& state) {
  NoGradGuard ng;
  ParamRegistry<float> reg;
  const ConvGeom g = conv_geom(5, 2, 2, 1, 2);
  ComplexConv2d<float> conv(reg, "bench.conv", 16, 32, g);
  const int64_t T = 100, F = 256;
  NdArray<float> re({1, 16, T, F}), im({1, 16, T, F});
  Rng data_rng(9);
  for (int64_t i = 0; i < re.numel(); ++i) {
    re.data()[i] = static_cast<float>(data_rng.normal());
    im.data()[i] = static_cast<float>(data_rng.normal());
  }
  CVar<float> x{Var<float>::constant(re), Var<float>::constant(im)};
  for (auto _ : state) {
    auto y = conv.forward_grouped(x, 2);
    benchmark::DoNotOptimize(y.re.val().data());
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_ComplexConvBlock)->Unit(benchmark::kMillisecond);

static void BM_StreamingHop(benchmark::State& state) {
  SdccrnModel<float> model{ModelSpec{}};
  StreamingEnhancer se(model);
  const auto block = random_wave(static_cast<size_t>(se.hop()), 3);
  // warm past the start-up blocks so each iteration emits a hop of audio
  for (int i = 0; i < 4; ++i) se.push_block(block.data());
  for (auto _ : state) {
    auto out = se.push_block(block.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * se.hop());
}
BENCHMARK(BM_StreamingHop)->Unit(benchmark::kMillisecond);

static void BM_OfflineEnhance(benchmark::State& state) {
  NoGradGuard ng;
  SdccrnModel<float> model{ModelSpec{}};
  const auto wave = random_wave(static_cast<size_t>(model.spec.analysis.sample_rate), 5);
  NdArray<float> x({1, static_cast<int64_t>(wave.size())});
  std::copy(wave.begin(), wave.end(), x.data());
  const Var<float> xv = Var<float>::constant(x);
  for (auto _ : state) {
    auto out = model.forward(xv, false);
    benchmark::DoNotOptimize(out.val().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(wave.size()));
}
BENCHMARK(BM_OfflineEnhance)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
