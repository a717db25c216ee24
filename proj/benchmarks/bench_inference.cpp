// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "vitslim/autograd.hpp"
#include "vitslim/graph.hpp"
#include "vitslim/slimming.hpp"
#include "vitslim/throughput.hpp"
#include "vitslim/trainer.hpp"

namespace vitslim {
namespace {

// Args: keep rate in percent, batch size.
void BM_InferDeitSmall(benchmark::State& state) {
  ViTConfig cfg = presets::deit_small();
  cfg.keep_rate = static_cast<double>(state.range(0)) / 100.0;
  static const ModelWeights weights = init_weights(presets::deit_small(), 1);
  SlimEngine engine(weights, cfg);
  engine.set_threads(1);
  const auto images = random_images(cfg, static_cast<std::size_t>(state.range(1)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(engine.infer(images));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_InferDeitSmall)
    ->ArgsProduct({{100, 90, 80, 70}, {8}})
    ->Args({70, 4})
    ->Unit(benchmark::kMillisecond)
    ->MinTime(2.0);

void BM_InferToy(benchmark::State& state) {
  ViTConfig cfg = presets::toy();
  cfg.keep_rate = static_cast<double>(state.range(0)) / 100.0;
  SlimEngine engine(init_weights(cfg, 1), cfg);
  engine.set_threads(1);
  const auto images = random_images(cfg, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(engine.infer(images));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_InferToy)->Arg(100)->Arg(70)->Unit(benchmark::kMicrosecond);

// One forward + backward pass of the soft-weight training graph.
void BM_TrainStepToy(benchmark::State& state) {
  ViTConfig cfg = presets::toy();
  cfg.keep_rate = 0.7;
  const ModelWeights weights = init_weights(cfg, 1);
  const auto data = make_synth_dataset(1, 32, cfg.grid(), cfg.num_classes, cfg.patch,
                                       cfg.channels);
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const TrainBatch batch = make_batch(cfg, data, idx);
  const SlimSchedule schedule = make_schedule(cfg);
  for (auto _ : state) {
    ag::Tape tape;
    const ParamVars vars = bind_params(tape, weights, true, true);
    const GraphOutput out =
        build_forward(tape, vars, cfg, schedule, batch, BetaPolicy::kAllLayers);
    tape.backward(out.loss);
    benchmark::DoNotOptimize(tape.grad(vars.head));
  }
}
BENCHMARK(BM_TrainStepToy)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace vitslim
