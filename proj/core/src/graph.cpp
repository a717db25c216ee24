// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/graph.hpp"

#include "vitslim/errors.hpp"
#include "vitslim/life_regression.hpp"
#include "vitslim/slimming.hpp"

namespace vitslim {

ParamVars bind_params(ag::Tape& tape, const ModelWeights& weights, bool train_backbone,
                      bool train_life) {
  return map_params<ag::Var>(weights, [&](const TensorD& t, const std::string&, ParamGroup g) {
    const bool trainable = g == ParamGroup::kBackbone ? train_backbone : train_life;
    return tape.leaf(t, trainable);
  });
}

BetaPolicy beta_policy(const ViTConfig& config) {
  return config.beta_after_tbase_only ? BetaPolicy::kAfterTBase : BetaPolicy::kAllLayers;
}

namespace {

ag::Var block(ag::Tape& tape, ag::Var x, const LayerParams<ag::Var>& l, ag::Var beta,
              std::size_t batch, std::size_t seq, std::size_t heads) {
  ag::Var h = ag::layer_norm(tape, x, l.ln1_gamma, l.ln1_beta);
  ag::Var q = ag::linear(tape, h, l.wq, l.bq);
  ag::Var k = ag::linear(tape, h, l.wk, l.bk);
  ag::Var v = ag::linear(tape, h, l.wv, l.bv);
  ag::Var a = ag::attention(tape, q, k, v, beta, batch, seq, heads);
  x = ag::add(tape, x, ag::linear(tape, a, l.wo, l.bo));
  ag::Var h2 = ag::layer_norm(tape, x, l.ln2_gamma, l.ln2_beta);
  ag::Var m = ag::linear(tape, ag::gelu(tape, ag::linear(tape, h2, l.mlp1, l.mlp1_bias)), l.mlp2,
                         l.mlp2_bias);
  return ag::add(tape, x, m);
}

}  // namespace

GraphOutput build_forward(ag::Tape& tape, const ParamVars& params, const ViTConfig& config,
                          const SlimSchedule& schedule, const TrainBatch& batch,
                          BetaPolicy policy) {
  const std::size_t b = batch.size();
  const std::size_t seq = static_cast<std::size_t>(config.tokens());
  const std::size_t heads = static_cast<std::size_t>(config.heads);
  const int layers = config.layers;

  ag::Var patches = tape.constant(batch.patches);
  ag::Var embedded = ag::linear(tape, patches, params.patch_embed, params.patch_bias);
  ag::Var x0 = ag::assemble_tokens(tape, embedded, params.cls_token, params.pos_embed, b);

  GraphOutput out;
  ag::Var x = x0;
  if (policy == BetaPolicy::kNone) {
    for (int t = 1; t <= layers; ++t) {
      x = block(tape, x, params.layers[static_cast<std::size_t>(t - 1)], {}, b, seq, heads);
    }
  } else {
    ag::Var prefix = x0;
    for (int t = 1; t <= config.t_base; ++t) {
      prefix = block(tape, prefix, params.layers[static_cast<std::size_t>(t - 1)], {}, b, seq,
                     heads);
    }
    ag::Var normed = ag::layer_norm(tape, prefix, params.life_gamma, params.life_beta);
    ag::Var scores = ag::bilinear_cls_score(tape, normed, params.life_weight, b, seq);
    out.lives = ag::renormalize_rows(tape, scores, schedule.mu, schedule.sigma, kScoreStdFloor);
    if (policy == BetaPolicy::kHard) {
      if (tape.requires_grad(params.life_weight) || tape.requires_grad(params.life_gamma) ||
          tape.requires_grad(params.life_beta)) {
        throw ContractError("hard survivor weights need a frozen life predictor");
      }
      const TensorD& lives = tape.value(out.lives);
      const std::size_t n = lives.cols();
      std::vector<TensorD> betas(static_cast<std::size_t>(layers), TensorD({b * (n + 1)}));
      for (std::size_t s = 0; s < b; ++s) {
        LifeVector lv;
        lv.tau.assign(lives.ptr() + s * n, lives.ptr() + (s + 1) * n);
        lv.tau_cls = static_cast<double>(layers);
        const WeightMatrix hard = survivor_weights(select_survivors(lv, schedule), n);
        for (int t = 1; t <= layers; ++t) {
          for (std::size_t i = 0; i <= n; ++i) {
            betas[static_cast<std::size_t>(t - 1)][s * (n + 1) + i] = hard.at(i, t);
          }
        }
      }
      x = prefix;
      for (int t = config.t_base + 1; t <= layers; ++t) {
        ag::Var beta = tape.constant(std::move(betas[static_cast<std::size_t>(t - 1)]));
        x = block(tape, x, params.layers[static_cast<std::size_t>(t - 1)], beta, b, seq, heads);
      }
    } else {
      const bool literal = config.beta_sign == BetaSign::kPaperLiteral;
      int first = 1;
      if (policy == BetaPolicy::kAfterTBase) {
        x = prefix;
        first = config.t_base + 1;
      }
      for (int t = first; t <= layers; ++t) {
        ag::Var beta = ag::sigmoid_beta(tape, out.lives, t, config.temperature, literal);
        x = block(tape, x, params.layers[static_cast<std::size_t>(t - 1)], beta, b, seq, heads);
      }
    }
  }
  std::vector<std::size_t> cls_rows(b);
  for (std::size_t i = 0; i < b; ++i) cls_rows[i] = i * seq;
  ag::Var cls = ag::gather_rows(tape, x, std::move(cls_rows));
  ag::Var normed = ag::layer_norm(tape, cls, params.norm_gamma, params.norm_beta);
  out.logits = ag::linear(tape, normed, params.head, params.head_bias);
  out.loss = ag::cross_entropy(tape, out.logits, batch.labels);
  return out;
}

}  // namespace vitslim
