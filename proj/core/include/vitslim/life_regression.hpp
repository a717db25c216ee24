// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "vitslim/schedule.hpp"
#include "vitslim/tensor.hpp"
#include "vitslim/weights.hpp"

namespace vitslim {

// Floor on std(scores) when renormalising; constant scores map to mu.
inline constexpr double kScoreStdFloor = 1e-6;

// Predicted lifespan of every patch of one image. [CLS] is pinned to T.
struct LifeVector {
  std::vector<double> tau;
  double tau_cls = 0.0;

  std::size_t size() const noexcept { return tau.size(); }
  // Values limited to [lo, hi], for display and export only.
  std::vector<double> clamped(double lo, double hi) const;
};

// s_i = x_cls^T W x_i for the N patch rows of x_norm ((N+1) x d, [CLS]
// first). x_norm must already be layer-normalised.
template <typename T>
std::vector<double> bilinear_score(const Tensor<T>& x_norm, const Tensor<T>& weight);

// tau_i = (s_i - mean(s)) / max(std(s), kScoreStdFloor) * sigma + mu with
// the population std. Throws ContractError for fewer than two scores.
std::vector<double> renormalize_to_life(std::span<const double> scores, double mu,
                                        double sigma);

// Normalise the layer-t_base features, score every patch against [CLS] and
// rescale the scores to the schedule's target moments.
template <typename T>
LifeVector predict_lives(const Tensor<T>& x_tbase, const Weights<T>& weights,
                         const SlimSchedule& schedule);

}  // namespace vitslim
