// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vitslim/config.hpp"
#include "vitslim/tensor.hpp"

namespace vitslim {

// Backbone parameters belong to the model M; life-predictor parameters to P.
// Two-stage training updates exactly one group per stage.
enum class ParamGroup { kBackbone, kLifePredictor };

template <typename P>
struct LayerParams {
  P ln1_gamma, ln1_beta;
  P wq, bq, wk, bk, wv, bv;  // d x d projections, x W + b
  P wo, bo;
  P ln2_gamma, ln2_beta;
  P mlp1, mlp1_bias;  // d x 4d
  P mlp2, mlp2_bias;  // 4d x d
};

// All trainable parameters. P is Tensor<double> for training and storage,
// Tensor<float> for inference and ag::Var when bound to a tape.
template <typename P>
struct ModelParams {
  P patch_embed;  // patch_dim x d
  P patch_bias;   // d
  P pos_embed;    // (N+1) x d, added once before layer 1
  P cls_token;    // d
  std::vector<LayerParams<P>> layers;
  P norm_gamma, norm_beta;  // final norm before the head
  P head, head_bias;        // d x classes, classes
  P life_weight;            // d x d bilinear form
  P life_gamma, life_beta;  // normalisation in front of the bilinear score

  // fn(const std::string& name, P& param, ParamGroup group), in a fixed order.
  template <typename Fn>
  void visit(Fn&& fn) {
    visit_impl(*this, fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    visit_impl(*this, fn);
  }

 private:
  template <typename Self, typename Fn>
  static void visit_impl(Self& self, Fn& fn) {
    constexpr auto kB = ParamGroup::kBackbone;
    fn(std::string("patch_embed"), self.patch_embed, kB);
    fn(std::string("patch_bias"), self.patch_bias, kB);
    fn(std::string("pos_embed"), self.pos_embed, kB);
    fn(std::string("cls_token"), self.cls_token, kB);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      auto& l = self.layers[i];
      const std::string p = "layers." + std::to_string(i) + ".";
      fn(p + "ln1_gamma", l.ln1_gamma, kB);
      fn(p + "ln1_beta", l.ln1_beta, kB);
      fn(p + "wq", l.wq, kB);
      fn(p + "bq", l.bq, kB);
      fn(p + "wk", l.wk, kB);
      fn(p + "bk", l.bk, kB);
      fn(p + "wv", l.wv, kB);
      fn(p + "bv", l.bv, kB);
      fn(p + "wo", l.wo, kB);
      fn(p + "bo", l.bo, kB);
      fn(p + "ln2_gamma", l.ln2_gamma, kB);
      fn(p + "ln2_beta", l.ln2_beta, kB);
      fn(p + "mlp1", l.mlp1, kB);
      fn(p + "mlp1_bias", l.mlp1_bias, kB);
      fn(p + "mlp2", l.mlp2, kB);
      fn(p + "mlp2_bias", l.mlp2_bias, kB);
    }
    fn(std::string("norm_gamma"), self.norm_gamma, kB);
    fn(std::string("norm_beta"), self.norm_beta, kB);
    fn(std::string("head"), self.head, kB);
    fn(std::string("head_bias"), self.head_bias, kB);
    constexpr auto kL = ParamGroup::kLifePredictor;
    fn(std::string("life_weight"), self.life_weight, kL);
    fn(std::string("life_gamma"), self.life_gamma, kL);
    fn(std::string("life_beta"), self.life_beta, kL);
  }
};

// Builds a ModelParams<To> with the same layer count, mapping every field
// through fn(const From&, const std::string& name, ParamGroup) -> To.
template <typename To, typename From, typename Fn>
ModelParams<To> map_params(const ModelParams<From>& src, Fn&& fn) {
  ModelParams<To> out;
  out.layers.resize(src.layers.size());
  std::vector<To*> slots;
  out.visit([&](const std::string&, To& p, ParamGroup) { slots.push_back(&p); });
  std::size_t i = 0;
  src.visit([&](const std::string& name, const From& p, ParamGroup g) {
    *slots[i++] = fn(p, name, g);
  });
  return out;
}

using ModelWeights = ModelParams<TensorD>;
template <typename T>
using Weights = ModelParams<Tensor<T>>;

template <typename T>
Weights<T> cast_weights(const ModelWeights& w) {
  return map_params<Tensor<T>>(
      w, [](const TensorD& t, const std::string&, ParamGroup) { return t.template cast<T>(); });
}

// Expected shape of every parameter, in visit order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const ViTConfig& config);

// Truncated-normal(0.02) matrices and embeddings, zero biases, unit norms.
// life_weight starts at identity + N(0, 0.02) noise so the initial score is
// the plain [CLS]/patch similarity.
ModelWeights init_weights(const ViTConfig& config, std::uint64_t seed);

// Throws DimensionError on any shape that disagrees with config.
void validate_weights(const ModelWeights& weights, const ViTConfig& config);

std::size_t parameter_count(const ModelWeights& weights, ParamGroup group);

}  // namespace vitslim
