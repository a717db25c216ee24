// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vitslim/config.hpp"
#include "vitslim/life_regression.hpp"
#include "vitslim/schedule.hpp"
#include "vitslim/tensor.hpp"
#include "vitslim/weight_conversion.hpp"
#include "vitslim/weights.hpp"

namespace vitslim {

// Patches used at each layer, in original (0-based) patch indices. [CLS] is
// implicit and always present.
struct SurvivorSets {
  // Patches ordered by decreasing life, ties broken by smaller index.
  std::vector<std::size_t> ranking;
  // keep[t-1]: the n_t longest-lived patches, ascending index order.
  std::vector<std::vector<std::size_t>> keep;

  const std::vector<std::size_t>& at(int layer) const {
    return keep.at(static_cast<std::size_t>(layer - 1));
  }
  // Sequence positions used at `layer`: 0 for [CLS], 1 + i for patch i.
  std::vector<std::size_t> tokens(int layer) const;
};

// Top-n_t patches by life at every layer. Only the lives are compared; by
// monotonicity of the life-to-weight map this equals ranking by weight.
SurvivorSets select_survivors(const LifeVector& lives, const SlimSchedule& schedule);

// 0/1 weights reproducing a survivor schedule: 1 iff the token is used.
WeightMatrix survivor_weights(const SurvivorSets& survivors, std::size_t num_patches);

struct SlimCounters {
  std::size_t images = 0;
  std::size_t life_module_calls = 0;
  // Layers at which the life module ran (one entry per call).
  std::vector<int> life_module_layers;
  // Number of physical compactions (one per image per shrinking layer).
  std::size_t gathers = 0;
};

struct SlimOpCounts {
  double life_module_calls = 0.0;               // per image
  double per_layer_scorer_calls_baseline = 0.0; // per image
  double ratio = 0.0;                           // baseline / ours, 0 if unused
};

// Per-image prediction calls of this engine next to a reference scorer that
// runs at every slimming layer.
SlimOpCounts count_slim_ops(const SlimCounters& counters, const SlimSchedule& schedule);

struct SlimResult {
  TensorF logits;  // batch x classes
  std::vector<LifeVector> lives;
  std::vector<SurvivorSets> survivors;
};

// Hard-slimming inference: dense up to t_base, one life prediction per image,
// then each image's sequence is physically compacted to its top-n_t patches
// before every layer whose budget shrinks. Runs in float.
class SlimEngine {
 public:
  SlimEngine(const ModelWeights& weights, const ViTConfig& config);

  const ViTConfig& config() const noexcept { return config_; }
  const SlimSchedule& schedule() const noexcept { return schedule_; }
  const Weights<float>& weights() const noexcept { return weights_; }

  // Worker threads used to split a batch (default: VITSLIM_THREADS or 1).
  void set_threads(std::size_t threads) { threads_ = threads == 0 ? 1 : threads; }
  std::size_t threads() const noexcept { return threads_; }

  TensorF infer(std::span<const TensorF> images);
  SlimResult run(std::span<const TensorF> images);

  const SlimCounters& counters() const noexcept { return counters_; }
  void reset_counters() { counters_ = {}; }

 private:
  SlimResult run_chunk(std::span<const TensorF> images, SlimCounters& counters) const;
  TensorF run_one(const TensorF& image, LifeVector* lives, SurvivorSets* survivors,
                  SlimCounters& counters) const;

  ViTConfig config_;
  SlimSchedule schedule_;
  Weights<float> weights_;
  std::size_t threads_ = 1;
  SlimCounters counters_;
};

// Thread cap from VITSLIM_THREADS; 1 when unset or invalid.
std::size_t threads_from_env();

}  // namespace vitslim
