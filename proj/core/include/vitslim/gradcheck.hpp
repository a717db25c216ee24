// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vitslim/autograd.hpp"
#include "vitslim/graph.hpp"

namespace vitslim {

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double analytic_norm = 0.0;
  // ||g_tape - g_fd|| / max(||g_tape||, ||g_fd||), 0 when both vanish.
  double rel_error = 0.0;
  double max_abs_error = 0.0;
  // max_i |g_tape - g_fd| / (|g_tape| + 1e-8)
  double max_elementwise_error = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-4;
  // Below this norm both gradients count as zero and are compared absolutely.
  double zero_norm = 1e-10;
};

// Central differences against tape gradients for every input of a scalar
// function built on a fresh tape.
using TapeFunction = std::function<ag::Var(ag::Tape&, std::span<const ag::Var>)>;
std::vector<GradCheckEntry> check_gradients(const TapeFunction& fn, std::vector<TensorD> inputs,
                                            std::span<const std::string> names,
                                            const GradCheckOptions& options = {});

// End-to-end check of the training loss w.r.t. every parameter of the given
// group, with the weighting `policy` and soft weights as in training.
std::vector<GradCheckEntry> check_model_gradients(const ModelWeights& weights,
                                                  const ViTConfig& config, const TrainBatch& batch,
                                                  ParamGroup group, BetaPolicy policy,
                                                  const GradCheckOptions& options = {});

}  // namespace vitslim
