// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/life_regression.hpp"

#include <algorithm>
#include <cmath>

#include "vitslim/errors.hpp"
#include "vitslim/kernels.hpp"

namespace vitslim {

std::vector<double> LifeVector::clamped(double lo, double hi) const {
  std::vector<double> out(tau.size());
  std::transform(tau.begin(), tau.end(), out.begin(),
                 [&](double v) { return std::clamp(v, lo, hi); });
  return out;
}

template <typename T>
std::vector<double> bilinear_score(const Tensor<T>& x_norm, const Tensor<T>& weight) {
  const std::size_t d = x_norm.cols();
  if (weight.rows() != d || weight.cols() != d) {
    throw DimensionError("bilinear_score: weight " + shape_str(weight.shape()) +
                         " does not match feature width " + std::to_string(d));
  }
  if (x_norm.rows() < 1) throw DimensionError("bilinear_score: no [CLS] row");
  // u = W^T x_cls, then s_i = u . x_i
  std::vector<double> u(d, 0.0);
  auto cls = x_norm.row(0);
  for (std::size_t r = 0; r < d; ++r) {
    auto wr = weight.row(r);
    for (std::size_t c = 0; c < d; ++c) u[c] += static_cast<double>(cls[r]) * wr[c];
  }
  std::vector<double> scores(x_norm.rows() - 1);
  for (std::size_t i = 1; i < x_norm.rows(); ++i) {
    auto xi = x_norm.row(i);
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += u[c] * xi[c];
    scores[i - 1] = s;
  }
  return scores;
}

std::vector<double> renormalize_to_life(std::span<const double> scores, double mu,
                                        double sigma) {
  const std::size_t n = scores.size();
  if (n < 2) throw ContractError("renormalize_to_life: need at least 2 patches");
  if (!(sigma >= 0.0)) throw ContractError("renormalize_to_life: sigma must be >= 0");
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  var /= static_cast<double>(n);
  const double denom = std::max(std::sqrt(var), kScoreStdFloor);
  std::vector<double> tau(n);
  for (std::size_t i = 0; i < n; ++i) tau[i] = (scores[i] - mean) / denom * sigma + mu;
  return tau;
}

template <typename T>
LifeVector predict_lives(const Tensor<T>& x_tbase, const Weights<T>& weights,
                         const SlimSchedule& schedule) {
  if (static_cast<int>(x_tbase.rows()) != schedule.num_patches + 1) {
    throw DimensionError("predict_lives: expected " + std::to_string(schedule.num_patches + 1) +
                         " tokens, got " + std::to_string(x_tbase.rows()));
  }
  const Tensor<T> normed = layer_norm(x_tbase, weights.life_gamma, weights.life_beta);
  const std::vector<double> scores = bilinear_score(normed, weights.life_weight);
  LifeVector lives;
  lives.tau = renormalize_to_life(scores, schedule.mu, schedule.sigma);
  lives.tau_cls = schedule.layers;
  return lives;
}

template std::vector<double> bilinear_score(const Tensor<float>&, const Tensor<float>&);
template std::vector<double> bilinear_score(const Tensor<double>&, const Tensor<double>&);
template LifeVector predict_lives(const Tensor<float>&, const Weights<float>&, const SlimSchedule&);
template LifeVector predict_lives(const Tensor<double>&, const Weights<double>&, const SlimSchedule&);

}  // namespace vitslim
