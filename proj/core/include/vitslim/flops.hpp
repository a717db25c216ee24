// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vitslim/config.hpp"

namespace vitslim {

// Operation counts follow the convention behind published ViT numbers
// (DeiT-S = 4.6G): one multiply-accumulate counts once. Softmax, norms and
// activations are not counted. raw_flops() doubles the total for readers who
// count the multiply and the add separately.
struct LayerFlops {
  int layer = 0;
  std::int64_t tokens = 0;     // m = n_t + 1
  std::int64_t attention = 0;  // 4 m d^2 projections + 2 m^2 d score/mix
  std::int64_t mlp = 0;        // 8 m d^2
  std::int64_t slim = 0;       // life module, only at t_base
};

struct FlopsReport {
  ViTConfig config;
  std::vector<int> counts;
  std::vector<LayerFlops> per_layer;
  std::int64_t embed = 0;  // N * patch_dim * d
  std::int64_t head = 0;   // d * classes
  std::int64_t total = 0;

  double gflops() const { return static_cast<double>(total) * 1e-9; }
  std::int64_t raw_flops() const { return 2 * total; }
};

// Life module cost for m tokens: two d x d projections plus the products.
std::int64_t life_module_flops(std::int64_t tokens, std::int64_t dim);

FlopsReport count_flops(const ViTConfig& config, std::span<const int> counts);
// Uses the config's own schedule.
FlopsReport count_flops(const ViTConfig& config);

// Closed form for a dense model: T (12 m d^2 + 2 m^2 d) + embed + head.
std::int64_t dense_flops_closed_form(const ViTConfig& config);

// Speedup convention of the published tables: dense / slim - 1.
double flops_reduction(const FlopsReport& dense, const FlopsReport& slim);

struct SlimOverheadReport {
  int slimming_layers = 0;          // T'
  std::int64_t baseline_flops = 0;  // per-layer scorer, once per slimming layer
  std::int64_t one_shot_flops = 0;  // life module, once
  double ratio = 0.0;
};

// Prediction cost of a scorer re-run at each of the T' slimming layers
// against the single life-module call. Both are charged at N + 1 tokens so
// the ratio isolates the number of calls.
SlimOverheadReport compare_slim_overhead(const ViTConfig& config);

std::string to_json(const FlopsReport& report);
std::string to_table(const FlopsReport& report);

}  // namespace vitslim
