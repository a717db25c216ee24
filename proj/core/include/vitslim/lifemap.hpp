// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitslim/config.hpp"
#include "vitslim/life_regression.hpp"

namespace vitslim {

struct LifeMap {
  std::size_t grid = 0;
  double lo = 0.0;  // clamp range [t_base, T]
  double hi = 0.0;
  std::vector<double> tau;  // clamped, row-major grid x grid
  std::vector<int> stages;  // slimming layers t_i
  // masks[s][i] is true when patch i survives stage s (used in layer t_i + 1).
  std::vector<std::vector<bool>> masks;
};

LifeMap build_lifemap(const LifeVector& lives, const ViTConfig& config);

// 8-bit levels: lo maps to 0, hi to 255. A degenerate range maps to 255.
std::vector<std::uint8_t> heatmap_levels(const LifeMap& map);
std::string lifemap_csv(const LifeMap& map);
// Parses the CSV back into row-major values.
std::vector<double> parse_lifemap_csv(const std::string& text);

struct LifeMapFiles {
  std::string csv;
  std::string heatmap;
  std::vector<std::string> masks;
};

// Writes <prefix>_tau.csv, <prefix>_tau.pgm and <prefix>_stage<k>.pgm.
LifeMapFiles export_lifemap(const LifeVector& lives, const ViTConfig& config,
                            const std::string& prefix);

}  // namespace vitslim
