// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "vitslim/config.hpp"
#include "vitslim/tensor.hpp"
#include "vitslim/weights.hpp"

namespace vitslim {

struct WeightMatrix;

// image: side x side x channels -> N x (p*p*c), patches in row-major grid
// order and pixels row-major (y, x, channel) inside each patch.
template <typename T>
Tensor<T> patchify(const Tensor<T>& image, int patch);

template <typename T>
Tensor<T> unpatchify(const Tensor<T>& patches, int image_side, int patch, int channels);

// (batch*N) x patch_dim -> (batch*(N+1)) x d: [CLS] first, then patches,
// position embedding added.
template <typename T>
Tensor<T> embed_tokens(const Weights<T>& w, const Tensor<T>& patches, std::size_t batch = 1);

// Self-attention with projections for `batch` stacked sequences of equal
// length. With beta (one weight per row of x) each key's attention weight
// is scaled by its beta and renormalised per query; beta == all ones is
// plain attention and a 0 removes the key entirely.
template <typename T>
Tensor<T> mhsa_forward(const Tensor<T>& x, const LayerParams<Tensor<T>>& w, int heads,
                       std::span<const T> beta = {}, std::size_t batch = 1);

// Pre-norm transformer block: x + MHSA(LN(x)), then + MLP(LN(.)).
template <typename T>
Tensor<T> block_forward(const Tensor<T>& x, const LayerParams<Tensor<T>>& w, int heads,
                        std::span<const T> beta = {}, std::size_t batch = 1);

// Final norm + head applied to each sequence's [CLS] row -> batch x classes.
template <typename T>
Tensor<T> classify(const Tensor<T>& x, const Weights<T>& w, std::size_t batch = 1);

// Token features after `layers_run` blocks (0 = embeddings only).
template <typename T>
Tensor<T> forward_features(const Weights<T>& w, const ViTConfig& config,
                           const Tensor<T>& image, int layers_run);

template <typename T>
Tensor<T> forward_dense(const Weights<T>& w, const ViTConfig& config, const Tensor<T>& image);

// Every layer t attends with column t of `beta`; no token is ever removed.
template <typename T>
Tensor<T> forward_weighted(const Weights<T>& w, const ViTConfig& config,
                           const Tensor<T>& image, const WeightMatrix& beta);

}  // namespace vitslim
