// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vitslim/weight_conversion.hpp"

namespace vitslim {
namespace {

TEST(StepWeight, Boundary) {
  EXPECT_EQ(step_weight(5, 5), 1);
  EXPECT_EQ(step_weight(5, 6), 0);
  for (int t = 1; t <= 12; ++t) EXPECT_EQ(step_weight(12, t), 1);
}

TEST(SigmoidWeight, Midpoint) {
  for (double u : {0.1, 1.5, 50.0}) EXPECT_DOUBLE_EQ(sigmoid_weight(5, 5, u), 0.5);
}

TEST(SigmoidWeight, KnownValue) {
  EXPECT_NEAR(sigmoid_weight(5, 3, 1.5), 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
  EXPECT_NEAR(sigmoid_weight(5, 3, 1.5), 0.95257, 1e-5);
}

TEST(SigmoidWeight, Antisymmetry) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double tau = rng.uniform(0, 12);
    const double d = rng.uniform(-6, 6);
    const double u = rng.uniform(0.1, 10);
    EXPECT_NEAR(sigmoid_weight(tau, tau - d, u) + sigmoid_weight(tau, tau + d, u), 1.0, 1e-12);
  }
}

TEST(SigmoidWeight, PaperLiteralSignRunsBackwards) {
  EXPECT_LT(sigmoid_weight(5, 3, 1.5, BetaSign::kPaperLiteral), 0.5);
  EXPECT_GT(sigmoid_weight(5, 7, 1.5, BetaSign::kPaperLiteral), 0.5);
}

TEST(SigmoidWeight, DerivativeAtMidpoint) {
  const double u = 1.5;
  const double h = 1e-6;
  const double fd = (sigmoid_weight(5 + h, 5, u) - sigmoid_weight(5 - h, 5, u)) / (2 * h);
  EXPECT_NEAR(fd, u / 4.0, 1e-8);
  EXPECT_NEAR(fd, 0.375, 1e-8);
}

TEST(WeightMatrix, HardExample) {
  LifeVector lives{{2, 9}, 3};
  const auto m = build_weight_matrix(lives, 3, 1.5, WeightMode::kHard);
  EXPECT_EQ(m.beta, TensorD::matrix({{1, 1, 1}, {1, 1, 0}, {1, 1, 1}}));
}

TEST(WeightMatrix, ClsRowAllOnes) {
  Rng rng(2);
  LifeVector lives{{}, 6};
  for (int i = 0; i < 10; ++i) lives.tau.push_back(rng.uniform(-3, 9));
  for (auto mode : {WeightMode::kHard, WeightMode::kSoft}) {
    const auto m = build_weight_matrix(lives, 6, 1.5, mode);
    for (int t = 1; t <= 6; ++t) EXPECT_EQ(m.at(0, t), 1.0);
  }
}

TEST(WeightMatrix, SoftEntriesDecreaseAcrossLayers) {
  Rng rng(3);
  LifeVector lives{{}, 12};
  for (int i = 0; i < 20; ++i) lives.tau.push_back(rng.uniform(0, 12));
  const auto m = build_weight_matrix(lives, 12, 1.5, WeightMode::kSoft);
  for (std::size_t i = 1; i <= 20; ++i) {
    for (int t = 1; t <= 12; ++t) {
      EXPECT_GE(m.at(i, t), 0.0);
      EXPECT_LE(m.at(i, t), 1.0);
      if (t > 1) EXPECT_LT(m.at(i, t), m.at(i, t - 1));
    }
  }
}

TEST(WeightMatrix, SteepSoftApproachesHard) {
  Rng rng(4);
  LifeVector lives{{}, 12};
  for (int i = 0; i < 200; ++i) lives.tau.push_back(rng.uniform(0, 13));
  const auto soft = build_weight_matrix(lives, 12, 50.0, WeightMode::kSoft);
  const auto hard = build_weight_matrix(lives, 12, 50.0, WeightMode::kHard);
  for (std::size_t i = 0; i < lives.size(); ++i) {
    for (int t = 1; t <= 12; ++t) {
      if (std::abs(t - lives.tau[i]) < 0.2) continue;
      EXPECT_LT(std::abs(soft.at(i + 1, t) - hard.at(i + 1, t)), 1e-3);
    }
  }
}

TEST(WeightMatrix, ConvergenceIsMonotoneInTemperature) {
  Rng rng(5);
  const double eps = 0.25;
  std::vector<double> taus;
  for (int i = 0; i < 200; ++i) taus.push_back(rng.uniform(0, 12));
  double previous = 2.0;
  for (double u : {1.0, 2.0, 5.0, 10.0, 50.0}) {
    double sup = 0.0;
    for (double tau : taus) {
      for (int k = 0; k <= 240; ++k) {
        const double t = 0.05 * k;
        if (std::abs(t - tau) < eps) continue;
        const double hard = t <= tau ? 1.0 : 0.0;
        sup = std::max(sup, std::abs(sigmoid_weight(tau, t, u) - hard));
      }
    }
    EXPECT_LT(sup, previous) << "U=" << u;
    previous = sup;
  }
}

// Counts strict reversals: a longer life with a smaller weight. Equal weights
// are not counted since the sigmoid saturates to exactly 0 or 1 in double.
int ordering_violations(BetaSign sign, std::uint64_t seed) {
  Rng rng(seed);
  int violations = 0;
  for (int pair = 0; pair < 1000; ++pair) {
    const double ti = rng.uniform(0, 12);
    const double tj = rng.uniform(0, 12);
    const double u = rng.uniform(0.1, 10);
    for (int k = 0; k < 100; ++k) {
      const double t = 12.0 * k / 99.0;
      const double bi = sigmoid_weight(ti, t, u, sign);
      const double bj = sigmoid_weight(tj, t, u, sign);
      if ((ti > tj && bi < bj) || (ti < tj && bi > bj)) ++violations;
    }
  }
  return violations;
}

TEST(Proposition, LifeOrderEqualsWeightOrder) {
  EXPECT_EQ(ordering_violations(BetaSign::kCorrected, 6), 0);
}

TEST(Proposition, PrintedSignViolatesIt) {
  EXPECT_GT(ordering_violations(BetaSign::kPaperLiteral, 6), 0);
}

}  // namespace
}  // namespace vitslim
