// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/weights.hpp"

#include <cmath>

#include "vitslim/random.hpp"

namespace vitslim {

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ViTConfig& c) {
  c.validate();
  const std::size_t d = static_cast<std::size_t>(c.embed_dim);
  const std::size_t hidden = static_cast<std::size_t>(c.mlp_dim());
  const std::size_t classes = static_cast<std::size_t>(c.num_classes);
  ModelParams<Shape> shapes;
  shapes.patch_embed = {static_cast<std::size_t>(c.patch_dim()), d};
  shapes.patch_bias = {d};
  shapes.pos_embed = {static_cast<std::size_t>(c.tokens()), d};
  shapes.cls_token = {d};
  shapes.layers.resize(static_cast<std::size_t>(c.layers));
  for (auto& l : shapes.layers) {
    l.ln1_gamma = l.ln1_beta = l.ln2_gamma = l.ln2_beta = {d};
    l.wq = l.wk = l.wv = l.wo = {d, d};
    l.bq = l.bk = l.bv = l.bo = {d};
    l.mlp1 = {d, hidden};
    l.mlp1_bias = {hidden};
    l.mlp2 = {hidden, d};
    l.mlp2_bias = {d};
  }
  shapes.norm_gamma = shapes.norm_beta = {d};
  shapes.head = {d, classes};
  shapes.head_bias = {classes};
  shapes.life_weight = {d, d};
  shapes.life_gamma = shapes.life_beta = {d};
  std::vector<std::pair<std::string, Shape>> out;
  shapes.visit([&](const std::string& name, const Shape& s, ParamGroup) {
    out.emplace_back(name, s);
  });
  return out;
}

namespace {

double trunc_normal(Rng& rng, double stddev) {
  for (;;) {
    const double v = rng.normal();
    if (std::abs(v) <= 2.0) return v * stddev;
  }
}

bool is_unit_norm_gain(const std::string& name) {
  return name.ends_with("gamma");
}

}  // namespace

ModelWeights init_weights(const ViTConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const auto shapes = parameter_shapes(config);
  ModelWeights w;
  w.layers.resize(static_cast<std::size_t>(config.layers));
  std::size_t i = 0;
  w.visit([&](const std::string& name, TensorD& t, ParamGroup) {
    const Shape& shape = shapes[i++].second;
    t = TensorD(shape);
    if (is_unit_norm_gain(name)) {
      t.fill(1.0);
    } else if (name == "life_weight") {
      for (auto& v : t.data()) v = rng.normal(0.0, 0.02);
      for (std::size_t k = 0; k < shape[0]; ++k) t.at(k, k) += 1.0;
    } else if (shape.size() == 2 || name == "cls_token") {
      for (auto& v : t.data()) v = trunc_normal(rng, 0.02);
    }
  });
  return w;
}

void validate_weights(const ModelWeights& weights, const ViTConfig& config) {
  const auto shapes = parameter_shapes(config);
  if (weights.layers.size() != static_cast<std::size_t>(config.layers)) {
    throw DimensionError("weights have " + std::to_string(weights.layers.size()) +
                         " layers, config expects " + std::to_string(config.layers));
  }
  std::size_t i = 0;
  weights.visit([&](const std::string& name, const TensorD& t, ParamGroup) {
    if (t.shape() != shapes[i].second) {
      throw DimensionError("parameter " + name + " has shape " + shape_str(t.shape()) +
                           ", expected " + shape_str(shapes[i].second));
    }
    ++i;
  });
}

std::size_t parameter_count(const ModelWeights& weights, ParamGroup group) {
  std::size_t n = 0;
  weights.visit([&](const std::string&, const TensorD& t, ParamGroup g) {
    if (g == group) n += t.size();
  });
  return n;
}

}  // namespace vitslim
