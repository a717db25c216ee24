// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "vitslim/tensor.hpp"

namespace vitslim {

inline constexpr double kLayerNormEps = 1e-5;
// Floor on the (max-shifted) weighted softmax denominator. Unreachable while
// the [CLS] weight is pinned to 1; it keeps fuzzed all-zero weights finite.
inline constexpr double kAttentionDenominatorFloor = 1e-12;

// Rank-2 products. Inputs are read as rows() x cols().
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// a * b^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);
// a^T * b
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// x[r, :] += bias for every row.
template <typename T>
void add_row_bias(Tensor<T>& x, const Tensor<T>& bias);

// Row-wise softmax with max subtraction. Throws NumericError on NaN input.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

// Normalizes over the last axis with population variance, then applies
// gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps = kLayerNormEps);

// Exact (erf) GELU.
template <typename T>
T gelu(T x);
template <typename T>
T gelu_derivative(T x);
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

// Multi-head weighted attention over one sequence:
//   w_ij = beta_j exp(h_ij) / sum_k beta_k exp(h_ik),  h_ij = q_i . k_j / sqrt(dh)
//   out_i = sum_j w_ij v_j
// computed independently per head on column slices of width dim / heads.
// beta may be null (all ones). probs / gates, when non-null, receive
// heads * seq * seq values: the weights w and the unweighted ratios
// exp(h_ij) / sum_k beta_k exp(h_ik) needed by the backward pass.
template <typename T>
struct AttentionArgs {
  const T* q = nullptr;
  const T* k = nullptr;
  const T* v = nullptr;
  std::size_t ld_in = 0;  // row stride of q, k, v
  const T* beta = nullptr;
  T* out = nullptr;
  std::size_t ld_out = 0;
  std::size_t seq = 0;
  std::size_t dim = 0;
  std::size_t heads = 1;
  T* probs = nullptr;
  T* gates = nullptr;
};

template <typename T>
void attention_forward(const AttentionArgs<T>& args);

}  // namespace vitslim
