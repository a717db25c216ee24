// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "vitslim/autograd.hpp"
#include "vitslim/config.hpp"
#include "vitslim/schedule.hpp"
#include "vitslim/weights.hpp"

namespace vitslim {

using ParamVars = ModelParams<ag::Var>;

// Registers every parameter as a tape leaf. Only the groups flagged
// trainable receive gradients; the rest enter as constants.
ParamVars bind_params(ag::Tape& tape, const ModelWeights& weights, bool train_backbone,
                      bool train_life);

struct TrainBatch {
  TensorD patches;                  // (batch*N) x patch_dim
  std::vector<std::size_t> labels;  // batch
  std::size_t size() const noexcept { return labels.size(); }
};

enum class BetaPolicy {
  kNone,        // plain dense forward (backbone pre-training)
  kAllLayers,   // soft weights in every layer 1..T
  kAfterTBase,  // soft weights only in layers t_base+1..T
  kHard,        // inference 0/1 survivor weights in layers t_base+1..T
};

BetaPolicy beta_policy(const ViTConfig& config);

struct GraphOutput {
  ag::Var logits;  // batch x classes
  ag::Var loss;    // mean cross-entropy
  ag::Var lives;   // batch x N, unclamped; invalid under kNone
};

// Training forward. Patches are never discarded: lives are predicted from
// an unweighted pass up to t_base, converted to sigmoid weights, and every
// weighted layer attends with them. kAllLayers re-runs layers 1..t_base with
// their weights attached; kAfterTBase continues from the unweighted prefix.
// kHard also continues from the prefix and masks exactly the patches the
// inference engine drops. The 0/1 weights are piecewise constant in the
// lives and pass no gradient back; it throws ContractError if the life
// predictor is trainable.
GraphOutput build_forward(ag::Tape& tape, const ParamVars& params, const ViTConfig& config,
                          const SlimSchedule& schedule, const TrainBatch& batch,
                          BetaPolicy policy);

}  // namespace vitslim
