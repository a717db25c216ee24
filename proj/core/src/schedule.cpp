// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "vitslim/errors.hpp"

namespace vitslim {

std::vector<int> SlimSchedule::shrink_layers() const {
  std::vector<int> out;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] < counts[i - 1]) out.push_back(static_cast<int>(i) + 1);
  }
  return out;
}

std::vector<int> build_counts(int num_patches, int layers, double keep_rate,
                              std::span<const int> t_slim) {
  if (num_patches < 1 || layers < 1) throw ConfigError("schedule needs N >= 1 and T >= 1");
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) throw ConfigError("keep_rate must lie in (0, 1]");
  if (t_slim.empty() && keep_rate < 1.0) {
    throw ConfigError("keep_rate < 1 requires at least one slimming layer");
  }
  for (std::size_t i = 0; i < t_slim.size(); ++i) {
    if (t_slim[i] < 1 || t_slim[i] > layers) throw ConfigError("slimming layer out of range");
    if (i > 0 && t_slim[i] <= t_slim[i - 1]) throw ConfigError("slimming layers must ascend");
  }
  std::vector<int> counts(static_cast<std::size_t>(layers));
  int current = num_patches;
  std::size_t next = 0;
  for (int t = 1; t <= layers; ++t) {
    counts[static_cast<std::size_t>(t - 1)] = current;
    if (next < t_slim.size() && t_slim[next] == t) {
      // The epsilon keeps exact halves (e.g. 0.5 * 5) from rounding down
      // when rho is not exactly representable.
      const double scaled = keep_rate * current;
      current = std::max(1, static_cast<int>(std::floor(scaled + 0.5 + 1e-9)));
      ++next;
    }
  }
  return counts;
}

LifeMoments target_moments(std::span<const int> counts, int num_patches, int layers) {
  if (static_cast<int>(counts.size()) != layers || layers < 1) {
    throw ContractError("target_moments: need one count per layer");
  }
  const double n = static_cast<double>(num_patches);
  auto lived = [&](int t) -> double {  // patches whose life is exactly t
    const std::size_t i = static_cast<std::size_t>(t - 1);
    return t < layers ? counts[i] - counts[i + 1] : counts[i];
  };
  double mu = 0.0;
  for (int t = 1; t <= layers; ++t) mu += t * lived(t);
  mu /= n;
  double var = 0.0;
  for (int t = 1; t <= layers; ++t) var += (t - mu) * (t - mu) * lived(t);
  var = std::max(0.0, var / n);
  return {mu, std::sqrt(var)};
}

SlimSchedule make_schedule(const ViTConfig& config) {
  config.validate();
  SlimSchedule s;
  s.num_patches = config.num_patches();
  s.layers = config.layers;
  s.keep_rate = config.keep_rate;
  s.t_slim = config.t_slim;
  s.counts = build_counts(s.num_patches, s.layers, s.keep_rate, s.t_slim);
  const LifeMoments m = target_moments(s.counts, s.num_patches, s.layers);
  s.mu = m.mu;
  s.sigma = m.sigma;
  return s;
}

}  // namespace vitslim
