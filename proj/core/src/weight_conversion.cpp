// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/weight_conversion.hpp"

#include <cmath>

#include "vitslim/errors.hpp"

namespace vitslim {

int step_weight(double tau, double layer) { return layer <= tau ? 1 : 0; }

double sigmoid_weight(double tau, double layer, double temperature, BetaSign sign) {
  const double gap = sign == BetaSign::kCorrected ? layer - tau : tau - layer;
  return 1.0 / (1.0 + std::exp(temperature * gap));
}

std::vector<double> WeightMatrix::column(int layer) const {
  std::vector<double> out(beta.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, layer);
  return out;
}

WeightMatrix build_weight_matrix(const LifeVector& lives, int layers, double temperature,
                                 WeightMode mode, BetaSign sign) {
  if (layers < 1) throw ContractError("build_weight_matrix: layers must be >= 1");
  if (mode == WeightMode::kSoft && !(temperature > 0.0)) {
    throw ContractError("build_weight_matrix: soft mode needs temperature > 0");
  }
  const std::size_t n = lives.tau.size();
  WeightMatrix m;
  m.mode = mode;
  m.temperature = temperature;
  m.beta = TensorD({n + 1, static_cast<std::size_t>(layers)}, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int t = 1; t <= layers; ++t) {
      const double tau = lives.tau[i];
      m.beta.at(i + 1, static_cast<std::size_t>(t - 1)) =
          mode == WeightMode::kHard ? step_weight(tau, t)
                                    : sigmoid_weight(tau, t, temperature, sign);
    }
  }
  return m;
}

}  // namespace vitslim
