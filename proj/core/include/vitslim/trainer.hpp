// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vitslim/config.hpp"
#include "vitslim/graph.hpp"
#include "vitslim/tensor.hpp"
#include "vitslim/weights.hpp"

namespace vitslim {

struct SynthSample {
  TensorD image;  // side x side x channels, values in [0, 1]
  std::size_t label = 0;
  std::vector<std::size_t> salient_patches;  // ascending patch indices
};

// Dim noise images with a bright structured motif covering 1-3 adjacent
// patches. The motif sits inside the region owned by the label (a quadrant
// when classes <= 4 and the grid side is even, otherwise the cells whose
// index is congruent to the label). Deterministic in seed.
std::vector<SynthSample> make_synth_dataset(std::uint64_t seed, std::size_t count, int grid,
                                            int classes, int patch = 4, int channels = 1);

// Patch cells owned by one label.
std::vector<std::size_t> label_region(int grid, int classes, std::size_t label);

// -log softmax(logits)[label] and its gradient softmax(logits) - onehot.
double cross_entropy(std::span<const double> logits, std::size_t label);
std::vector<double> cross_entropy_grad(std::span<const double> logits, std::size_t label);

// Decoupled weight decay Adam. Decay applies to matrices only.
class AdamW {
 public:
  AdamW(const ModelWeights& like, const TrainConfig& config);

  // Updates every parameter whose group is enabled, using that group's rate.
  void step(ModelWeights& weights, const ModelWeights& grads, bool backbone, bool life);

  std::size_t steps() const noexcept { return steps_; }

 private:
  TrainConfig config_;
  ModelWeights m_;
  ModelWeights v_;
  std::size_t steps_ = 0;
};

struct StepRecord {
  std::size_t step = 0;
  std::string stage;
  double loss = 0.0;
  double lr = 0.0;
};
using StepSink = std::function<void(const StepRecord&)>;

struct StageSummary {
  std::string stage;
  std::vector<double> epoch_losses;
};

struct TrainReport {
  std::vector<StageSummary> stages;
};

TrainBatch make_batch(const ViTConfig& config, std::span<const SynthSample> data,
                      std::span<const std::size_t> indices);

// Dense backbone training (no life module), the stand-in for loading
// pre-trained weights.
StageSummary pretrain_dense(ModelWeights& weights, const ViTConfig& config,
                            const std::vector<SynthSample>& data, const TrainConfig& train,
                            const StepSink& sink = {});

// Stage 1 trains only the life predictor with the backbone frozen; stage 2
// fine-tunes only the backbone with the predictor frozen. Both stages use
// soft weights and keep every patch.
TrainReport train_two_stage(ModelWeights& weights, const ViTConfig& config,
                            const std::vector<SynthSample>& data, const TrainConfig& train,
                            const StepSink& sink = {});

// Ablation: predictor and backbone updated together for
// epochs_stage1 + epochs_stage2 epochs.
TrainReport train_single_stage(ModelWeights& weights, const ViTConfig& config,
                               const std::vector<SynthSample>& data, const TrainConfig& train,
                               const StepSink& sink = {});

// Top-1 accuracy of the hard-slimming engine under config's schedule.
double evaluate_accuracy(const ModelWeights& weights, const ViTConfig& config,
                         const std::vector<SynthSample>& data, std::size_t batch = 64);

struct LifeSeparation {
  double salient_mean_life = 0.0;
  double other_mean_life = 0.0;
  // Mean position in ascending life order (0 = shortest lived).
  double salient_mean_rank = 0.0;
  double other_mean_rank = 0.0;
};

// Predicted lives of ground-truth salient patches against the rest.
LifeSeparation life_separation(const ModelWeights& weights, const ViTConfig& config,
                               const std::vector<SynthSample>& data, std::size_t batch = 64);

}  // namespace vitslim
