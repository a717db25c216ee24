// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "vitslim/config.hpp"
#include "vitslim/life_regression.hpp"
#include "vitslim/tensor.hpp"

namespace vitslim {

// 1 while the layer index has not passed the life (t <= tau), else 0.
int step_weight(double tau, double layer);

// Smooth stand-in for step_weight: 1 / (1 + exp(U (t - tau))). Equals 0.5 at
// t = tau, increases with tau and decreases with t. kPaperLiteral evaluates
// 1 / (1 + exp(U (tau - t))) instead, which runs the other way.
double sigmoid_weight(double tau, double layer, double temperature,
                      BetaSign sign = BetaSign::kCorrected);

enum class WeightMode { kHard, kSoft };

// Per-token, per-layer weights. Row 0 is [CLS] (always 1); row 1 + i is
// patch i. Column t - 1 holds layer t.
struct WeightMatrix {
  TensorD beta;
  WeightMode mode = WeightMode::kHard;
  double temperature = 0.0;

  std::size_t layers() const { return beta.cols(); }
  double at(std::size_t token, int layer) const {
    return beta.at(token, static_cast<std::size_t>(layer - 1));
  }
  // Weights of every token at one layer, [CLS] first.
  std::vector<double> column(int layer) const;
};

WeightMatrix build_weight_matrix(const LifeVector& lives, int layers, double temperature,
                                 WeightMode mode, BetaSign sign = BetaSign::kCorrected);

}  // namespace vitslim
