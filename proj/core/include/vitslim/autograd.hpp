// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "vitslim/tensor.hpp"

namespace vitslim::ag {

// Handle to a node on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const noexcept { return id != kNone; }
};

// Reverse-mode tape. Nodes are appended in execution order, so the vector
// order is already a topological order. Every activation is retained until
// the tape is destroyed; one tape per training step.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const TensorD& grad_out)>;

  Var leaf(TensorD value, bool requires_grad = true);
  Var constant(TensorD value) { return leaf(std::move(value), false); }

  // Appends an op node. backward is dropped if no input requires a gradient.
  Var record(TensorD value, std::initializer_list<Var> inputs,
             Backward backward);

  const TensorD& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const {
    return v.valid() && nodes_.at(v.id).requires_grad;
  }

  // Gradient of the last backward() target w.r.t. v; zeros when v did not
  // influence it.
  TensorD grad(Var v) const;

  // Zero-initialised gradient accumulator for v (allocated on first use).
  TensorD& grad_buffer(Var v);
  bool has_grad_buffer(Var v) const { return !nodes_.at(v.id).grad.empty(); }

  // Adds g into v's gradient; the first contribution is moved in as is.
  void accumulate(Var v, TensorD g);

  // Throws ContractError unless loss holds exactly one element.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    TensorD value;
    TensorD grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---- primitives -----------------------------------------------------------

Var matmul(Tape& tape, Var a, Var b);
Var add(Tape& tape, Var a, Var b);
Var add_bias(Tape& tape, Var x, Var bias);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var x, double factor);
Var sum(Tape& tape, Var x);
Var gelu(Tape& tape, Var x);
Var softmax_rows(Tape& tape, Var x);
Var layer_norm(Tape& tape, Var x, Var gamma, Var beta);

// x (B*S) x d  ->  x W + b
inline Var linear(Tape& tape, Var x, Var weight, Var bias) {
  return add_bias(tape, matmul(tape, x, weight), bias);
}

// Weighted multi-head attention over `batch` stacked sequences of length
// `seq`. q, k, v are (batch*seq) x d; beta, when valid, is a length batch*seq
// vector of per-key weights.
Var attention(Tape& tape, Var q, Var k, Var v, Var beta, std::size_t batch,
              std::size_t seq, std::size_t heads);

// Builds (batch*(N+1)) x d token rows: per image [cls, patches...] + pos.
Var assemble_tokens(Tape& tape, Var patch_tokens, Var cls, Var pos,
                    std::size_t batch);

Var gather_rows(Tape& tape, Var x, std::vector<std::size_t> rows);

// Mean over the batch of -log softmax(logits_b)[label_b].
Var cross_entropy(Tape& tape, Var logits, std::span<const std::size_t> labels);

// s[b, i] = xn_cls(b)^T W xn_i(b), i over the N patch rows of each image.
// xn is (batch*seq) x d; result is batch x (seq-1).
Var bilinear_cls_score(Tape& tape, Var xn, Var weight, std::size_t batch,
                       std::size_t seq);

// Row-wise (s - mean) / max(std, floor) * sigma + mu, population std.
Var renormalize_rows(Tape& tape, Var scores, double mu, double sigma,
                     double std_floor);

// Per-token sigmoid weights at layer t from lives (batch x N). The result
// has length batch*(N+1) with 1 at every [CLS] position.
Var sigmoid_beta(Tape& tape, Var lives, double layer, double temperature,
                 bool paper_literal);

}  // namespace vitslim::ag
