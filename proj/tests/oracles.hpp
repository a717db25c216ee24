// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

// Reference computations shared by the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "vitslim/backbone.hpp"
#include "vitslim/random.hpp"
#include "vitslim/slimming.hpp"
#include "vitslim/weights.hpp"

namespace vitslim::oracle {

// Toy geometry (T=6, d=32, N=16) with a random keep rate and slimming set.
inline ViTConfig random_toy_config(Rng& rng) {
  ViTConfig cfg = presets::toy();
  cfg.keep_rate = rng.uniform(0.3, 0.95);
  cfg.t_base = 1 + static_cast<int>(rng.index(3));
  cfg.t_slim.clear();
  for (int t = cfg.t_base + 1; t <= cfg.layers; ++t) {
    if (rng.uniform() < 0.6) cfg.t_slim.push_back(t);
  }
  if (cfg.t_slim.empty()) cfg.t_slim.push_back(cfg.t_base + 1);
  cfg.temperature = rng.uniform(0.5, 5.0);
  return cfg;
}

// Weights with projections large enough that attention is far from uniform
// and patches get distinct lives.
inline ModelWeights sharp_weights(const ViTConfig& cfg, std::uint64_t seed) {
  ModelWeights w = init_weights(cfg, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (auto& l : w.layers) {
    for (auto* m : {&l.wq, &l.wk, &l.wv, &l.wo}) *m = rng.normal_tensor(m->shape(), 0.2);
  }
  w.patch_embed = rng.normal_tensor(w.patch_embed.shape(), 0.3);
  w.head = rng.normal_tensor(w.head.shape(), 0.3);
  return w;
}

// Mean and population std of the life multiset implied by per-layer counts:
// n_t - n_{t+1} patches live to layer t and n_T live to T.
inline std::pair<double, double> histogram_moments(const std::vector<int>& n) {
  std::vector<int> lives;
  const int layers = static_cast<int>(n.size());
  for (int t = 1; t < layers; ++t) lives.insert(lives.end(), n[t - 1] - n[t], t);
  lives.insert(lives.end(), n.back(), layers);
  const double mu =
      std::accumulate(lives.begin(), lives.end(), 0.0) / static_cast<double>(lives.size());
  double var = 0.0;
  for (int l : lives) var += (l - mu) * (l - mu);
  return {mu, std::sqrt(var / static_cast<double>(lives.size()))};
}

struct EquivalenceResult {
  double max_rel = 0.0;  // max |slim - soft_hard| / max(|soft_hard|, 1e-3)
};

// Hard-slimming inference against the keep-everything forward in which every
// layer attends with the 0/1 weights of the selected survivors.
inline EquivalenceResult hard_soft_equivalence(const ModelWeights& w, const ViTConfig& cfg,
                                               const std::vector<TensorF>& images) {
  SlimEngine engine(w, cfg);
  engine.set_threads(1);
  const SlimResult r = engine.run(images);
  EquivalenceResult out;
  for (std::size_t b = 0; b < images.size(); ++b) {
    const WeightMatrix beta =
        survivor_weights(r.survivors[b], static_cast<std::size_t>(cfg.num_patches()));
    const TensorF ref = forward_weighted(engine.weights(), cfg, images[b], beta);
    for (std::size_t c = 0; c < ref.size(); ++c) {
      const double a = r.logits.at(b, c);
      const double e = ref.data()[c];
      out.max_rel = std::max(out.max_rel, std::abs(a - e) / std::max(std::abs(e), 1e-3));
    }
  }
  return out;
}

}  // namespace vitslim::oracle
