// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "eigen_maps.hpp"

namespace vitslim {

namespace {

void require_rank2(const Shape& shape, const char* what) {
  if (shape.size() != 2) {
    throw DimensionError(std::string(what) + " expects a rank-2 tensor, got " +
                         shape_str(shape));
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a.shape(), "matmul");
  require_rank2(b.shape(), "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul inner extents differ: " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  Tensor<T> c({a.rows(), b.cols()});
  detail::map(c).noalias() = detail::map(a) * detail::map(b);
  return c;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a.shape(), "matmul_nt");
  require_rank2(b.shape(), "matmul_nt");
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt inner extents differ: " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                         "^T");
  }
  Tensor<T> c({a.rows(), b.rows()});
  detail::map(c).noalias() = detail::map(a) * detail::map(b).transpose();
  return c;
}

template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a.shape(), "matmul_tn");
  require_rank2(b.shape(), "matmul_tn");
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn inner extents differ: " +
                         shape_str(a.shape()) + "^T x " + shape_str(b.shape()));
  }
  Tensor<T> c({a.cols(), b.cols()});
  detail::map(c).noalias() = detail::map(a).transpose() * detail::map(b);
  return c;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add shape mismatch: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  Tensor<T> c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

template <typename T>
void add_row_bias(Tensor<T>& x, const Tensor<T>& bias) {
  if (bias.size() != x.cols()) {
    throw DimensionError("bias length " + std::to_string(bias.size()) +
                         " does not match " + shape_str(x.shape()));
  }
  detail::map(x).rowwise() += detail::map_row(bias);
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    T peak = -std::numeric_limits<T>::infinity();
    for (T v : in) {
      if (std::isnan(v)) throw NumericError("softmax_rows: NaN input");
      peak = std::max(peak, v);
    }
    T total = 0;
    for (std::size_t c = 0; c < n; ++c) {
      out[c] = std::exp(in[c] - peak);
      total += out[c];
    }
    for (std::size_t c = 0; c < n; ++c) out[c] /= total;
  }
  return y;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps) {
  const std::size_t d = x.cols();
  if (d == 0) throw DimensionError("layer_norm over an empty axis");
  if (gamma.size() != d || beta.size() != d) {
    throw DimensionError("layer_norm affine parameters must have length " +
                         std::to_string(d));
  }
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    double mean = 0.0;
    for (T v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (T v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      out[c] = static_cast<T>((in[c] - mean) * rstd * gamma[c] + beta[c]);
    }
  }
  return y;
}

template <typename T>
T gelu(T x) {
  return static_cast<T>(0.5) * x *
         (static_cast<T>(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
}

template <typename T>
T gelu_derivative(T x) {
  const T cdf = static_cast<T>(0.5) *
                (static_cast<T>(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
  const T pdf = std::exp(static_cast<T>(-0.5) * x * x) *
                static_cast<T>(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + x * pdf;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gelu(x[i]);
  return y;
}

template <typename T>
void attention_forward(const AttentionArgs<T>& a) {
  if (a.heads == 0 || a.dim % a.heads != 0) {
    throw DimensionError("attention: dim " + std::to_string(a.dim) +
                         " not divisible by heads " + std::to_string(a.heads));
  }
  const std::size_t n = a.seq;
  const std::size_t dh = a.dim / a.heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  using Strided = Eigen::Map<const detail::RowMatrix<T>, 0, Eigen::OuterStride<>>;
  using StridedOut = Eigen::Map<detail::RowMatrix<T>, 0, Eigen::OuterStride<>>;
  const Eigen::Index ld = static_cast<Eigen::Index>(a.ld_in);
  const Eigen::Index rows = static_cast<Eigen::Index>(n);
  const Eigen::Index cols = static_cast<Eigen::Index>(dh);

  detail::RowMatrix<T> logits(rows, rows);
  for (std::size_t h = 0; h < a.heads; ++h) {
    Strided q(a.q + h * dh, rows, cols, Eigen::OuterStride<>(ld));
    Strided k(a.k + h * dh, rows, cols, Eigen::OuterStride<>(ld));
    Strided v(a.v + h * dh, rows, cols, Eigen::OuterStride<>(ld));
    logits.noalias() = (q * k.transpose()) * scale;

    for (std::size_t i = 0; i < n; ++i) {
      T* row = logits.data() + i * n;
      // Any shift is exact for the ratio; shifting by the largest weighted
      // logit keeps exp() in range and leaves masked keys out of the max.
      T peak = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (a.beta == nullptr || a.beta[j] > T(0)) peak = std::max(peak, row[j]);
      }
      if (!std::isfinite(peak)) {
        peak = *std::max_element(row, row + n);
      }
      T denom = 0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - peak);
        denom += (a.beta == nullptr ? row[j] : a.beta[j] * row[j]);
      }
      denom = std::max(denom, static_cast<T>(kAttentionDenominatorFloor));
      const T inv = T(1) / denom;
      T* gate = a.gates ? a.gates + (h * n + i) * n : nullptr;
      for (std::size_t j = 0; j < n; ++j) {
        const T g = row[j] * inv;
        if (gate) gate[j] = g;
        row[j] = a.beta == nullptr ? g : a.beta[j] * g;
      }
      if (a.probs) std::copy(row, row + n, a.probs + (h * n + i) * n);
    }
    StridedOut out(a.out + h * dh, rows, cols,
                   Eigen::OuterStride<>(static_cast<Eigen::Index>(a.ld_out)));
    out.noalias() = logits * v;
  }
}

#define VITSLIM_INSTANTIATE(T)                                                 \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> matmul_tn(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                  \
  template void add_row_bias(Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> softmax_rows(const Tensor<T>&);                           \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, double);                     \
  template T gelu(T);                                                          \
  template T gelu_derivative(T);                                               \
  template Tensor<T> gelu(const Tensor<T>&);                                   \
  template void attention_forward(const AttentionArgs<T>&);

VITSLIM_INSTANTIATE(float)
VITSLIM_INSTANTIATE(double)

#undef VITSLIM_INSTANTIATE

}  // namespace vitslim
