// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_util.hpp"
#include "vitslim/backbone.hpp"
#include "vitslim/errors.hpp"
#include "vitslim/kernels.hpp"
#include "vitslim/life_regression.hpp"
#include "vitslim/schedule.hpp"

namespace vitslim {
namespace {

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<std::size_t> argsort(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  return idx;
}

TEST(BilinearScore, IdentityIsInnerProduct) {
  const auto x = TensorD::matrix({{1, 0}, {1, 0}, {0, 1}});
  const auto s = bilinear_score(x, TensorD::matrix({{1, 0}, {0, 1}}));
  EXPECT_EQ(s, (std::vector<double>{1, 0}));
}

TEST(BilinearScore, ZeroWeightGivesZeros) {
  Rng rng(1);
  const auto s = bilinear_score(rng.normal_tensor({4, 3}, 1.0), TensorD({3, 3}));
  for (double v : s) EXPECT_EQ(v, 0.0);
}

TEST(BilinearScore, MatchesFactoredProjections) {
  Rng rng(2);
  const std::size_t d = 8;
  const auto x = rng.normal_tensor({6, d}, 1.0);
  const auto p1 = rng.normal_tensor({d, d}, 1.0);
  const auto p2 = rng.normal_tensor({d, d}, 1.0);
  const auto w = matmul_tn(p1, p2);  // P1^T P2
  const auto s = bilinear_score(x, w);
  // (P1 x_cls) . (P2 x_i)
  const auto a = matmul_nt(x, p1);  // rows are P1 x_r
  const auto b = matmul_nt(x, p2);
  ASSERT_EQ(s.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    double dot = 0.0;
    for (std::size_t c = 0; c < d; ++c) dot += a.at(0, c) * b.at(i + 1, c);
    EXPECT_NEAR(s[i], dot, 1e-12);
  }
}

TEST(Renormalize, KnownValues) {
  const std::vector<double> s = {1, 2, 3};
  const auto tau = renormalize_to_life(s, 6.0, 1.0);
  EXPECT_NEAR(tau[0], 4.77526, 1e-5);
  EXPECT_NEAR(tau[1], 6.0, 1e-12);
  EXPECT_NEAR(tau[2], 7.22474, 1e-5);
}

TEST(Renormalize, ConstantScoresGiveMean) {
  const std::vector<double> s = {3, 3, 3, 3};
  for (double t : renormalize_to_life(s, 8.25, 3.3)) EXPECT_EQ(t, 8.25);
}

TEST(Renormalize, ZeroSigmaGivesMean) {
  const std::vector<double> s = {1, -4, 9};
  for (double t : renormalize_to_life(s, 5.0, 0.0)) EXPECT_EQ(t, 5.0);
}

TEST(Renormalize, Errors) {
  const std::vector<double> one = {1};
  const std::vector<double> two = {1, 2};
  EXPECT_THROW(renormalize_to_life(one, 1.0, 1.0), ContractError);
  EXPECT_THROW(renormalize_to_life(two, 1.0, -1.0), ContractError);
}

TEST(Renormalize, MomentsAndRankPreserved) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(2 + rng.index(50));
    for (auto& v : s) v = rng.normal(0.0, rng.uniform(0.01, 10.0));
    const double mu = rng.uniform(1, 12);
    const double sigma = rng.uniform(0.1, 4);
    const auto tau = renormalize_to_life(s, mu, sigma);
    EXPECT_NEAR(mean(tau), mu, 1e-6);
    EXPECT_NEAR(pop_std(tau), sigma, 1e-6);
    EXPECT_EQ(argsort(tau), argsort(s));
  }
}

class PredictLives : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = presets::toy();
    config_.keep_rate = 0.7;
    weights_ = init_weights(config_, 21);
    schedule_ = make_schedule(config_);
  }
  ViTConfig config_;
  ModelWeights weights_;
  SlimSchedule schedule_;
};

TEST_F(PredictLives, IdenticalPatchesGiveMean) {
  TensorD x({17, 32});
  Rng rng(4);
  const auto patch = rng.normal_tensor({32}, 1.0);
  const auto cls = rng.normal_tensor({32}, 1.0);
  for (std::size_t r = 0; r < 17; ++r)
    for (std::size_t c = 0; c < 32; ++c) x.at(r, c) = r == 0 ? cls.data()[c] : patch.data()[c];
  const auto lives = predict_lives(x, weights_, schedule_);
  // Rounding noise in the equal scores is divided by the std floor.
  for (double t : lives.tau) EXPECT_NEAR(t, schedule_.mu, 1e-7);
  EXPECT_EQ(lives.tau_cls, config_.layers);
}

TEST_F(PredictLives, MomentsMatchSchedule) {
  Rng rng(5);
  const auto lives = predict_lives(rng.normal_tensor({17, 32}, 1.0), weights_, schedule_);
  ASSERT_EQ(lives.size(), 16u);
  EXPECT_NEAR(mean(lives.tau), schedule_.mu, 1e-6);
  EXPECT_NEAR(pop_std(lives.tau), schedule_.sigma, 1e-6);
  EXPECT_EQ(lives.tau_cls, static_cast<double>(config_.layers));
}

TEST_F(PredictLives, RaisingAScoreNeverLowersItsRank) {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    auto x = rng.normal_tensor({17, 32}, 1.0);
    const auto base = predict_lives(x, weights_, schedule_);
    const std::size_t i = rng.index(16);
    // Moving patch i toward W^T x_cls (after normalisation) raises its score.
    const auto xn = layer_norm(x, weights_.life_gamma, weights_.life_beta);
    TensorD cls({1, 32});
    for (std::size_t c = 0; c < 32; ++c) cls.at(0, c) = xn.at(0, c);
    const auto dir = matmul(cls, weights_.life_weight);
    const auto before = bilinear_score(xn, weights_.life_weight);
    auto moved = x;
    for (std::size_t c = 0; c < 32; ++c) moved.at(i + 1, c) += 0.5 * dir.at(0, c);
    const auto xn2 = layer_norm(moved, weights_.life_gamma, weights_.life_beta);
    const auto after = bilinear_score(xn2, weights_.life_weight);
    if (after[i] <= before[i]) continue;  // normalisation can undo the step
    const auto lives = predict_lives(moved, weights_, schedule_);
    auto rank = [](const std::vector<double>& v, std::size_t k) {
      return std::count_if(v.begin(), v.end(), [&](double t) { return t < v[k]; });
    };
    EXPECT_GE(rank(lives.tau, i), rank(base.tau, i));
  }
}

TEST_F(PredictLives, ClampedForReporting) {
  Rng rng(7);
  const auto lives = predict_lives(rng.normal_tensor({17, 32}, 3.0), weights_, schedule_);
  for (double t : lives.clamped(config_.t_base, config_.layers)) {
    EXPECT_GE(t, config_.t_base);
    EXPECT_LE(t, config_.layers);
  }
}

TEST(PredictLivesGolden, DeitShapedToy) {
  // DeiT-S layout (12 layers, 196 patches, t_slim 4/7/10) at a small width.
  ViTConfig cfg = presets::deit_small();
  cfg.embed_dim = 24;
  cfg.heads = 3;
  cfg.num_classes = 10;
  cfg.keep_rate = 0.7;
  const auto w = init_weights(cfg, 31);
  Rng rng(8);
  const auto img = rng.uniform_tensor({224, 224, 3}, 0, 1);
  const auto x = forward_features(w, cfg, img, cfg.t_base);
  const auto lives = predict_lives(x, w, make_schedule(cfg));
  testing::expect_golden("deit_shaped_lives", lives.tau, 1e-8);
}

}  // namespace
}  // namespace vitslim
