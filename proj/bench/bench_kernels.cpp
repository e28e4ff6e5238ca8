// Copyright 2026 The cswhisper Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against their OpenMP counterparts.
// Run with OMP_NUM_THREADS=N to compare thread counts.

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "cswhisper/audio/features.hpp"
#include "cswhisper/kernels/gemm.hpp"
#include "cswhisper/scoring/mer.hpp"

namespace {

std::vector<float> random_floats(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_GemmNN(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_floats(std::size_t(n) * n, 1);
  auto b = random_floats(std::size_t(n) * n, 2);
  std::vector<float> c(std::size_t(n) * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      csw::kernels::gemm_nn(a, b, c, n, n, n);
    else
      csw::kernels::serial::gemm_nn(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
  state.counters["threads"] = Parallel ? csw::kernels::max_threads() : 1;
}
BENCHMARK(BM_GemmNN<false>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_GemmNN<true>)->Name("gemm_nn/omp")->Arg(64)->Arg(256);

template <bool Parallel>
void BM_PowerSpectrum(benchmark::State& state) {
  const csw::audio::LogMelExtractor ex;
  auto samples = random_floats(16000 * static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    auto p = Parallel ? ex.power_spectrum(samples) : csw::audio::serial::power_spectrum(ex, samples);
    benchmark::DoNotOptimize(p.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));  // seconds of audio
}
BENCHMARK(BM_PowerSpectrum<false>)->Name("power_spectrum/serial")->Arg(30);
BENCHMARK(BM_PowerSpectrum<true>)->Name("power_spectrum/omp")->Arg(30);

std::vector<csw::scoring::TextPair> scoring_pairs(int count) {
  const char* words[] = {"我们", "今天", "meeting", "那个", "project", "ok", "因为", "lunch"};
  std::mt19937 rng(4);
  std::vector<csw::scoring::TextPair> out;
  for (int i = 0; i < count; ++i) {
    std::string ref, hyp;
    for (int w = 0; w < 20; ++w) {
      ref += std::string(words[rng() % 8]) + " ";
      if (rng() % 5) hyp += std::string(words[rng() % 8]) + " ";
    }
    out.push_back({"u" + std::to_string(i), ref, hyp});
  }
  return out;
}

template <bool Parallel>
void BM_ScorePairs(benchmark::State& state) {
  const auto pairs = scoring_pairs(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto r = Parallel ? csw::scoring::score_pairs(pairs) : csw::scoring::serial::score_pairs(pairs);
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScorePairs<false>)->Name("score_pairs/serial")->Arg(1000);
BENCHMARK(BM_ScorePairs<true>)->Name("score_pairs/omp")->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
