// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vitslim {

// Which form of the sigmoid life-to-weight map to use. kCorrected decays
// with depth (1 / (1 + exp(U (t - tau)))); kPaperLiteral flips the sign of
// the exponent and is kept only for comparison.
enum class BetaSign { kCorrected, kPaperLiteral };

struct ViTConfig {
  int layers = 12;          // T
  int embed_dim = 384;      // d
  int heads = 6;            // H
  int patch = 16;           // p, pixels per patch side
  int image_side = 224;
  int channels = 3;
  int num_classes = 1000;
  int t_base = 3;           // layer whose output feeds the life predictor
  double temperature = 1.5; // U
  std::vector<int> t_slim = {4, 7, 10};
  double keep_rate = 1.0;   // rho
  BetaSign beta_sign = BetaSign::kCorrected;
  // Training only: attach weights to layers > t_base instead of every layer.
  bool beta_after_tbase_only = false;

  int grid() const { return image_side / patch; }
  int num_patches() const { return grid() * grid(); }  // N
  int tokens() const { return num_patches() + 1; }
  int head_dim() const { return embed_dim / heads; }
  int patch_dim() const { return patch * patch * channels; }
  int mlp_dim() const { return 4 * embed_dim; }

  // Throws ConfigError naming the first violated invariant.
  void validate() const;

  friend bool operator==(const ViTConfig&, const ViTConfig&) = default;
};

struct TrainConfig {
  double lr_life = 1e-5;
  double lr_backbone = 1e-3;
  // Backbone rate during stage 2; zero means lr_backbone.
  double lr_finetune = 0.0;
  // Stage 2 attends with the inference survivor weights (BetaPolicy::kHard)
  // instead of sigmoid weights.
  bool stage2_hard = false;
  std::size_t batch = 32;
  int epochs_pretrain = 20;
  int epochs_stage1 = 5;
  int epochs_stage2 = 5;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.05;
  // Early stop once the epoch-mean loss improves by less than this fraction
  // for `patience` consecutive epochs.
  double convergence_rel_tol = 1e-4;
  int convergence_patience = 2;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct RunConfig {
  ViTConfig model;
  TrainConfig train;
};

namespace presets {

ViTConfig deit_small();
ViTConfig vit_base();
// 16x16 single-channel images, 4x4 patches, 6 layers of width 32.
ViTConfig toy();
// Gradient-check scale: T=3, d=8, N=4.
ViTConfig micro();
// "deit_small", "vit_base", "toy" or "micro".
ViTConfig by_name(const std::string& name);
// Toy-scale training defaults: a larger life-module rate than the
// ImageNet-scale 1e-5, which does not move a freshly initialised predictor
// within a few hundred steps, a lower backbone rate for stage 2, where 1e-3
// on an already converged backbone gives loss spikes, and a stage 2 that
// fine-tunes under the inference survivor weights.
TrainConfig desk_train();

}  // namespace presets

std::string to_json(const ViTConfig& config);
std::string to_json(const TrainConfig& config);
std::string to_json(const RunConfig& config);

// Missing keys keep their defaults (the DeiT-S shape, or the preset named by
// an optional "preset" key); unknown keys are rejected. A run config without
// a "model" section uses the toy preset.
ViTConfig vit_config_from_json(std::string_view text);
RunConfig run_config_from_json(std::string_view text);
RunConfig load_run_config(const std::string& path);

}  // namespace vitslim
