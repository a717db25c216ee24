// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/backbone.hpp"

#include "vitslim/errors.hpp"
#include "vitslim/kernels.hpp"
#include "vitslim/weight_conversion.hpp"

namespace vitslim {

template <typename T>
Tensor<T> patchify(const Tensor<T>& image, int patch) {
  if (image.rank() != 3 || image.dim(0) != image.dim(1)) {
    throw DimensionError("patchify expects a square side x side x channels image, got " +
                         shape_str(image.shape()));
  }
  const std::size_t side = image.dim(0);
  const std::size_t c = image.dim(2);
  const std::size_t p = static_cast<std::size_t>(patch);
  if (p == 0 || side % p != 0) {
    throw DimensionError("image side " + std::to_string(side) +
                         " is not divisible by patch " + std::to_string(patch));
  }
  const std::size_t grid = side / p;
  Tensor<T> out({grid * grid, p * p * c});
  for (std::size_t gy = 0; gy < grid; ++gy) {
    for (std::size_t gx = 0; gx < grid; ++gx) {
      auto dst = out.row(gy * grid + gx);
      std::size_t k = 0;
      for (std::size_t y = 0; y < p; ++y) {
        for (std::size_t x = 0; x < p; ++x) {
          const T* src = image.ptr() + ((gy * p + y) * side + gx * p + x) * c;
          for (std::size_t ch = 0; ch < c; ++ch) dst[k++] = src[ch];
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> unpatchify(const Tensor<T>& patches, int image_side, int patch, int channels) {
  const std::size_t side = static_cast<std::size_t>(image_side);
  const std::size_t p = static_cast<std::size_t>(patch);
  const std::size_t c = static_cast<std::size_t>(channels);
  if (p == 0 || side % p != 0) throw DimensionError("unpatchify: side not divisible by patch");
  const std::size_t grid = side / p;
  if (patches.rows() != grid * grid || patches.cols() != p * p * c) {
    throw DimensionError("unpatchify: patch matrix " + shape_str(patches.shape()) +
                         " does not match the image geometry");
  }
  Tensor<T> image({side, side, c});
  for (std::size_t gy = 0; gy < grid; ++gy) {
    for (std::size_t gx = 0; gx < grid; ++gx) {
      auto src = patches.row(gy * grid + gx);
      std::size_t k = 0;
      for (std::size_t y = 0; y < p; ++y) {
        for (std::size_t x = 0; x < p; ++x) {
          T* dst = image.ptr() + ((gy * p + y) * side + gx * p + x) * c;
          for (std::size_t ch = 0; ch < c; ++ch) dst[ch] = src[k++];
        }
      }
    }
  }
  return image;
}

template <typename T>
Tensor<T> embed_tokens(const Weights<T>& w, const Tensor<T>& patches, std::size_t batch) {
  Tensor<T> proj = matmul(patches, w.patch_embed);
  add_row_bias(proj, w.patch_bias);
  const std::size_t seq = w.pos_embed.rows();
  const std::size_t d = proj.cols();
  if (batch == 0 || proj.rows() != batch * (seq - 1)) {
    throw DimensionError("embed_tokens: " + std::to_string(proj.rows()) +
                         " patch rows for batch " + std::to_string(batch) +
                         " of sequence length " + std::to_string(seq));
  }
  Tensor<T> tokens({batch * seq, d});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t s = 0; s < seq; ++s) {
      auto dst = tokens.row(b * seq + s);
      auto pos = w.pos_embed.row(s);
      auto src = s == 0 ? w.cls_token.data() : std::span<const T>(proj.row(b * (seq - 1) + s - 1));
      for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] + pos[c];
    }
  }
  return tokens;
}

template <typename T>
Tensor<T> mhsa_forward(const Tensor<T>& x, const LayerParams<Tensor<T>>& w, int heads,
                       std::span<const T> beta, std::size_t batch) {
  const std::size_t rows = x.rows();
  if (batch == 0 || rows % batch != 0) {
    throw DimensionError("mhsa_forward: " + std::to_string(rows) +
                         " rows do not split into " + std::to_string(batch) + " sequences");
  }
  const std::size_t seq = rows / batch;
  if (!beta.empty()) {
    if (beta.size() != rows) {
      throw DimensionError("mhsa_forward: beta has " + std::to_string(beta.size()) +
                           " entries for " + std::to_string(rows) + " tokens");
    }
    for (T b : beta) {
      if (!(b >= T(0) && b <= T(1))) throw ContractError("mhsa_forward: beta outside [0, 1]");
    }
  }
  Tensor<T> q = matmul(x, w.wq);
  add_row_bias(q, w.bq);
  Tensor<T> k = matmul(x, w.wk);
  add_row_bias(k, w.bk);
  Tensor<T> v = matmul(x, w.wv);
  add_row_bias(v, w.bv);
  const std::size_t d = q.cols();
  Tensor<T> mixed({rows, d});
  for (std::size_t b = 0; b < batch; ++b) {
    AttentionArgs<T> args;
    args.q = q.ptr() + b * seq * d;
    args.k = k.ptr() + b * seq * d;
    args.v = v.ptr() + b * seq * d;
    args.ld_in = d;
    args.beta = beta.empty() ? nullptr : beta.data() + b * seq;
    args.out = mixed.ptr() + b * seq * d;
    args.ld_out = d;
    args.seq = seq;
    args.dim = d;
    args.heads = static_cast<std::size_t>(heads);
    attention_forward(args);
  }
  Tensor<T> out = matmul(mixed, w.wo);
  add_row_bias(out, w.bo);
  return out;
}

template <typename T>
Tensor<T> block_forward(const Tensor<T>& x, const LayerParams<Tensor<T>>& w, int heads,
                        std::span<const T> beta, std::size_t batch) {
  Tensor<T> h = layer_norm(x, w.ln1_gamma, w.ln1_beta);
  Tensor<T> y = add(x, mhsa_forward(h, w, heads, beta, batch));
  Tensor<T> h2 = layer_norm(y, w.ln2_gamma, w.ln2_beta);
  Tensor<T> hidden = matmul(h2, w.mlp1);
  add_row_bias(hidden, w.mlp1_bias);
  for (auto& v : hidden.data()) v = gelu(v);
  Tensor<T> mlp = matmul(hidden, w.mlp2);
  add_row_bias(mlp, w.mlp2_bias);
  T* dst = y.ptr();
  const T* src = mlp.ptr();
  for (std::size_t i = 0; i < y.size(); ++i) dst[i] += src[i];
  return y;
}

template <typename T>
Tensor<T> classify(const Tensor<T>& x, const Weights<T>& w, std::size_t batch) {
  if (batch == 0 || x.rows() % batch != 0) throw DimensionError("classify: bad batch split");
  const std::size_t seq = x.rows() / batch;
  const std::size_t d = x.cols();
  Tensor<T> cls({batch, d});
  for (std::size_t b = 0; b < batch; ++b) {
    auto src = x.row(b * seq);
    std::copy(src.begin(), src.end(), cls.row(b).begin());
  }
  Tensor<T> logits = matmul(layer_norm(cls, w.norm_gamma, w.norm_beta), w.head);
  add_row_bias(logits, w.head_bias);
  return logits;
}

template <typename T>
Tensor<T> forward_features(const Weights<T>& w, const ViTConfig& config,
                           const Tensor<T>& image, int layers_run) {
  if (layers_run < 0 || layers_run > static_cast<int>(w.layers.size())) {
    throw ContractError("forward_features: layer count out of range");
  }
  Tensor<T> x = embed_tokens(w, patchify(image, config.patch));
  for (int t = 0; t < layers_run; ++t) {
    x = block_forward(x, w.layers[static_cast<std::size_t>(t)], config.heads);
  }
  return x;
}

template <typename T>
Tensor<T> forward_dense(const Weights<T>& w, const ViTConfig& config, const Tensor<T>& image) {
  const Tensor<T> x = forward_features(w, config, image, static_cast<int>(w.layers.size()));
  Tensor<T> logits = classify(x, w);
  return logits.reshaped({logits.size()});
}

template <typename T>
Tensor<T> forward_weighted(const Weights<T>& w, const ViTConfig& config,
                           const Tensor<T>& image, const WeightMatrix& beta) {
  if (beta.layers() < w.layers.size()) {
    throw DimensionError("forward_weighted: weight matrix has too few layers");
  }
  Tensor<T> x = embed_tokens(w, patchify(image, config.patch));
  if (beta.beta.rows() != x.rows()) {
    throw DimensionError("forward_weighted: weight matrix has " +
                         std::to_string(beta.beta.rows()) + " tokens, sequence has " +
                         std::to_string(x.rows()));
  }
  std::vector<T> column(x.rows());
  for (std::size_t t = 0; t < w.layers.size(); ++t) {
    for (std::size_t i = 0; i < column.size(); ++i) {
      column[i] = static_cast<T>(beta.beta.at(i, t));
    }
    x = block_forward(x, w.layers[t], config.heads, std::span<const T>(column));
  }
  Tensor<T> logits = classify(x, w);
  return logits.reshaped({logits.size()});
}

#define VITSLIM_INSTANTIATE(T)                                                            \
  template Tensor<T> patchify(const Tensor<T>&, int);                                     \
  template Tensor<T> unpatchify(const Tensor<T>&, int, int, int);                         \
  template Tensor<T> embed_tokens(const Weights<T>&, const Tensor<T>&, std::size_t);      \
  template Tensor<T> mhsa_forward(const Tensor<T>&, const LayerParams<Tensor<T>>&, int,   \
                                  std::span<const T>, std::size_t);                       \
  template Tensor<T> block_forward(const Tensor<T>&, const LayerParams<Tensor<T>>&, int,  \
                                   std::span<const T>, std::size_t);                      \
  template Tensor<T> classify(const Tensor<T>&, const Weights<T>&, std::size_t);          \
  template Tensor<T> forward_features(const Weights<T>&, const ViTConfig&,                \
                                      const Tensor<T>&, int);                             \
  template Tensor<T> forward_dense(const Weights<T>&, const ViTConfig&, const Tensor<T>&); \
  template Tensor<T> forward_weighted(const Weights<T>&, const ViTConfig&,                \
                                      const Tensor<T>&, const WeightMatrix&);

VITSLIM_INSTANTIATE(float)
VITSLIM_INSTANTIATE(double)

#undef VITSLIM_INSTANTIATE

}  // namespace vitslim
