// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vitslim/errors.hpp"
#include "vitslim/schedule.hpp"
#include "vitslim/slimming.hpp"
#include "vitslim/throughput.hpp"
#include "vitslim/weight_conversion.hpp"

namespace vitslim {
namespace {

SlimSchedule single_layer_schedule(int count, int num_patches) {
  SlimSchedule s;
  s.num_patches = num_patches;
  s.layers = 1;
  s.counts = {count};
  return s;
}

std::set<std::size_t> as_set(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

TEST(SelectSurvivors, TopTwo) {
  const LifeVector lives{{8.2, 5.1, 11.0, 5.1}, 1};
  const auto s = select_survivors(lives, single_layer_schedule(2, 4));
  EXPECT_EQ(as_set(s.at(1)), (std::set<std::size_t>{2, 0}));
}

TEST(SelectSurvivors, TieGoesToSmallerIndex) {
  const LifeVector lives{{8.2, 5.1, 11.0, 5.1}, 1};
  const auto s = select_survivors(lives, single_layer_schedule(3, 4));
  EXPECT_EQ(as_set(s.at(1)), (std::set<std::size_t>{2, 0, 1}));
  EXPECT_EQ(s.ranking, (std::vector<std::size_t>{2, 0, 1, 3}));
}

TEST(SelectSurvivors, FullKeepRate) {
  ViTConfig cfg = presets::toy();
  cfg.keep_rate = 1.0;
  Rng rng(1);
  LifeVector lives{{}, 6};
  for (int i = 0; i < 16; ++i) lives.tau.push_back(rng.uniform(0, 6));
  const auto s = select_survivors(lives, make_schedule(cfg));
  std::vector<std::size_t> all(16);
  std::iota(all.begin(), all.end(), 0);
  for (int t = 1; t <= 6; ++t) EXPECT_EQ(s.at(t), all);
}

TEST(SelectSurvivors, BudgetAboveNThrows) {
  const LifeVector lives{{1, 2}, 1};
  EXPECT_THROW(select_survivors(lives, single_layer_schedule(3, 2)), ContractError);
}

TEST(SelectSurvivors, NestedSizedAndClsKept) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const ViTConfig cfg = oracle::random_toy_config(rng);
    const auto schedule = make_schedule(cfg);
    LifeVector lives{{}, 6};
    for (int i = 0; i < 16; ++i) lives.tau.push_back(rng.uniform(-2, 9));
    const auto s = select_survivors(lives, schedule);
    for (int t = 1; t <= cfg.layers; ++t) {
      EXPECT_EQ(s.tokens(t).size(), static_cast<std::size_t>(schedule.count(t)) + 1);
      EXPECT_EQ(s.tokens(t).front(), 0u);
      if (t < cfg.layers) {
        const auto cur = as_set(s.at(t));
        for (std::size_t i : s.at(t + 1)) EXPECT_TRUE(cur.count(i)) << "layer " << t;
      }
    }
  }
}

TEST(SelectSurvivors, SelectionByLifeEqualsSelectionByWeight) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const ViTConfig cfg = oracle::random_toy_config(rng);
    const auto schedule = make_schedule(cfg);
    LifeVector lives{{}, 6};
    for (int i = 0; i < 16; ++i) lives.tau.push_back(rng.uniform(0, 8));
    const double u = rng.uniform(0.1, 4);  // no saturation ties at this range
    const auto s = select_survivors(lives, schedule);
    const auto soft = build_weight_matrix(lives, cfg.layers, u, WeightMode::kSoft);
    for (int t = 1; t <= cfg.layers; ++t) {
      std::vector<std::size_t> idx(16);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(),
                       [&](auto a, auto b) { return soft.at(a + 1, t) > soft.at(b + 1, t); });
      idx.resize(static_cast<std::size_t>(schedule.count(t)));
      EXPECT_EQ(as_set(idx), as_set(s.at(t))) << "layer " << t;
    }
  }
}

// With lives equal to the life multiset the schedule implies, the step
// weights of every patch reproduce the top-n_t sets exactly.
TEST(SelectSurvivors, StepWeightsOfScheduleLivesMatchSurvivors) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const ViTConfig cfg = oracle::random_toy_config(rng);
    const auto schedule = make_schedule(cfg);
    std::vector<double> multiset;
    for (int t = 1; t < cfg.layers; ++t) {
      multiset.insert(multiset.end(), schedule.count(t) - schedule.count(t + 1), t);
    }
    multiset.insert(multiset.end(), schedule.count(cfg.layers), cfg.layers);
    std::sort(multiset.begin(), multiset.end(), std::greater<>());
    std::vector<std::size_t> order(16);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 15; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
    LifeVector lives{std::vector<double>(16), static_cast<double>(cfg.layers)};
    for (std::size_t k = 0; k < 16; ++k) lives.tau[order[k]] = multiset[k] + 0.25 * rng.uniform();

    const auto hard = build_weight_matrix(lives, cfg.layers, 1.0, WeightMode::kHard);
    const auto chosen = survivor_weights(select_survivors(lives, schedule), 16);
    EXPECT_EQ(hard.beta, chosen.beta);
  }
}

class Engine : public ::testing::Test {
 protected:
  std::vector<TensorF> images(const ViTConfig& cfg, std::size_t count, std::uint64_t seed) {
    return random_images(cfg, count, seed);
  }
};

TEST_F(Engine, FullKeepRateMatchesDenseBackbone) {
  ViTConfig cfg = presets::toy();
  cfg.keep_rate = 1.0;
  const auto w = oracle::sharp_weights(cfg, 5);
  SlimEngine engine(w, cfg);
  const auto imgs = images(cfg, 4, 6);
  const TensorF logits = engine.infer(imgs);
  for (std::size_t b = 0; b < imgs.size(); ++b) {
    const TensorF dense = forward_dense(engine.weights(), cfg, imgs[b]);
    for (std::size_t c = 0; c < dense.size(); ++c) EXPECT_EQ(logits.at(b, c), dense.data()[c]);
  }
  EXPECT_EQ(engine.counters().life_module_calls, 0u);
  EXPECT_EQ(engine.counters().gathers, 0u);
}

TEST_F(Engine, HardSlimmingEqualsBinaryWeightedForward) {
  Rng rng(7);
  for (int seed = 0; seed < 10; ++seed) {
    const ViTConfig cfg = oracle::random_toy_config(rng);
    const auto w = oracle::sharp_weights(cfg, 100 + seed);
    const auto r = oracle::hard_soft_equivalence(w, cfg, images(cfg, 3, 200 + seed));
    EXPECT_LE(r.max_rel, 1e-5) << "seed " << seed;
  }
}

TEST_F(Engine, BatchCopiesGiveIdenticalRows) {
  const ViTConfig cfg = presets::toy();
  const auto w = oracle::sharp_weights(cfg, 8);
  SlimEngine engine(w, cfg);
  const auto one = images(cfg, 1, 9);
  const std::vector<TensorF> copies(5, one[0]);
  const TensorF logits = engine.infer(copies);
  for (std::size_t b = 1; b < copies.size(); ++b) {
    for (std::size_t c = 0; c < logits.cols(); ++c) EXPECT_EQ(logits.at(b, c), logits.at(0, c));
  }
}

TEST_F(Engine, ResultsIndependentOfBatchCompositionAndThreads) {
  const ViTConfig cfg = presets::toy();
  const auto w = oracle::sharp_weights(cfg, 10);
  const auto imgs = images(cfg, 6, 11);
  SlimEngine engine(w, cfg);
  const TensorF all = engine.infer(imgs);
  engine.set_threads(3);
  const TensorF threaded = engine.infer(imgs);
  EXPECT_EQ(all, threaded);
  engine.set_threads(1);
  for (std::size_t b = 0; b < imgs.size(); ++b) {
    const TensorF single = engine.infer(std::span<const TensorF>(&imgs[b], 1));
    for (std::size_t c = 0; c < all.cols(); ++c) {
      EXPECT_NEAR(single.at(0, c), all.at(b, c), 1e-5 * std::max(1.0f, std::abs(all.at(b, c))));
    }
  }
}

TEST_F(Engine, OneLifePredictionPerImageAtTBase) {
  const ViTConfig cfg = presets::toy();
  const auto w = oracle::sharp_weights(cfg, 12);
  SlimEngine engine(w, cfg);
  engine.infer(images(cfg, 7, 13));
  const auto& c = engine.counters();
  EXPECT_EQ(c.images, 7u);
  EXPECT_EQ(c.life_module_calls, 7u);
  for (int layer : c.life_module_layers) EXPECT_EQ(layer, cfg.t_base);
  // Counts 16 -> 11 -> 8 -> 6 shrink at three layers.
  EXPECT_EQ(c.gathers, 7u * 3u);
}

TEST_F(Engine, MismatchedImagesRejected) {
  const ViTConfig cfg = presets::toy();
  SlimEngine engine(init_weights(cfg, 1), cfg);
  std::vector<TensorF> imgs = {TensorF({16, 16, 1}), TensorF({8, 8, 1})};
  EXPECT_THROW(engine.infer(imgs), DimensionError);
  std::vector<TensorF> wrong = {TensorF({8, 8, 1})};
  EXPECT_THROW(engine.infer(wrong), DimensionError);
}

SlimCounters counters_for(const ViTConfig& cfg, std::size_t images) {
  SlimCounters c;
  c.images = images;
  if (make_schedule(cfg).slims()) c.life_module_calls = images;
  return c;
}

TEST(CountSlimOps, DefaultScheduleThreeToOne) {
  ViTConfig cfg = presets::deit_small();
  cfg.keep_rate = 0.7;
  const auto ops = count_slim_ops(counters_for(cfg, 4), make_schedule(cfg));
  EXPECT_EQ(ops.life_module_calls, 1.0);
  EXPECT_EQ(ops.per_layer_scorer_calls_baseline, 3.0);
  EXPECT_EQ(ops.ratio, 3.0);
}

TEST(CountSlimOps, NoSlimmingNoCalls) {
  ViTConfig cfg = presets::deit_small();
  cfg.keep_rate = 1.0;
  cfg.t_slim.clear();
  const auto ops = count_slim_ops(counters_for(cfg, 4), make_schedule(cfg));
  EXPECT_EQ(ops.life_module_calls, 0.0);
  EXPECT_EQ(ops.per_layer_scorer_calls_baseline, 0.0);
}

TEST(CountSlimOps, SixSlimmingLayers) {
  ViTConfig cfg = presets::deit_small();
  cfg.keep_rate = 0.8;
  cfg.t_slim = {4, 5, 6, 7, 8, 9};
  const auto ops = count_slim_ops(counters_for(cfg, 2), make_schedule(cfg));
  EXPECT_EQ(ops.per_layer_scorer_calls_baseline, 6.0);
  EXPECT_EQ(ops.life_module_calls, 1.0);
}

}  // namespace
}  // namespace vitslim
