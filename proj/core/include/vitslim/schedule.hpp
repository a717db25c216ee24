// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "vitslim/config.hpp"

namespace vitslim {

// Fixed per-layer patch budget shared by every image in a batch.
struct SlimSchedule {
  int num_patches = 0;            // N
  int layers = 0;                 // T
  double keep_rate = 1.0;         // rho
  std::vector<int> t_slim;        // layers after which the budget shrinks
  std::vector<int> counts;        // counts[t-1] = n_t, [CLS] excluded
  double mu = 0.0;                // target mean life
  double sigma = 0.0;             // target life standard deviation

  int count(int layer) const { return counts.at(static_cast<std::size_t>(layer - 1)); }
  // True when some layer runs on fewer than N patches.
  bool slims() const { return !counts.empty() && counts.back() < num_patches; }
  // Layers t (1-based) whose count is smaller than that of layer t-1.
  std::vector<int> shrink_layers() const;
};

// n_t = N up to and including t_slim[0]; after each slimming layer the count
// becomes round_half_up(rho * previous), floored at 1.
std::vector<int> build_counts(int num_patches, int layers, double keep_rate,
                              std::span<const int> t_slim);

struct LifeMoments {
  double mu = 0.0;
  double sigma = 0.0;
};

// Mean and population standard deviation of the life multiset implied by
// the counts: (n_t - n_{t+1}) patches live exactly t layers, n_T live T.
LifeMoments target_moments(std::span<const int> counts, int num_patches, int layers);

SlimSchedule make_schedule(const ViTConfig& config);

}  // namespace vitslim
