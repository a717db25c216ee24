// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "vitslim/flops.hpp"

namespace vitslim {
namespace {

void BM_CountFlops(benchmark::State& state) {
  ViTConfig cfg = presets::deit_small();
  cfg.keep_rate = 0.7;
  for (auto _ : state) benchmark::DoNotOptimize(count_flops(cfg).total);
}
BENCHMARK(BM_CountFlops);

void BM_SlimOverhead(benchmark::State& state) {
  const ViTConfig cfg = presets::vit_base();
  for (auto _ : state) benchmark::DoNotOptimize(compare_slim_overhead(cfg).ratio);
}
BENCHMARK(BM_SlimOverhead);

}  // namespace
}  // namespace vitslim

BENCHMARK_MAIN();
