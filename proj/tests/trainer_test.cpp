// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "test_util.hpp"
#include "vitslim/backbone.hpp"
#include "vitslim/errors.hpp"
#include "vitslim/gradcheck.hpp"
#include "vitslim/graph.hpp"
#include "vitslim/schedule.hpp"
#include "vitslim/slimming.hpp"
#include "vitslim/trainer.hpp"

namespace vitslim {
namespace {

TEST(SynthDataset, MotifInsideLabelQuadrant) {
  const auto data = make_synth_dataset(1, 400, 4, 4);
  for (const auto& s : data) {
    ASSERT_FALSE(s.salient_patches.empty());
    ASSERT_LE(s.salient_patches.size(), 3u);
    const auto region = label_region(4, 4, s.label);
    const std::set<std::size_t> allowed(region.begin(), region.end());
    for (std::size_t p : s.salient_patches) {
      EXPECT_LT(p, 16u);
      EXPECT_TRUE(allowed.count(p)) << "label " << s.label << " patch " << p;
    }
  }
  EXPECT_EQ(label_region(4, 4, 0), (std::vector<std::size_t>{0, 1, 4, 5}));
  EXPECT_EQ(label_region(4, 4, 3), (std::vector<std::size_t>{10, 11, 14, 15}));
}

TEST(SynthDataset, DeterministicInSeed) {
  const auto a = make_synth_dataset(9, 50, 4, 4);
  const auto b = make_synth_dataset(9, 50, 4, 4);
  const auto c = make_synth_dataset(10, 50, 4, 4);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(a[i].salient_patches, b[i].salient_patches);
    differs = differs || !(a[i].image == c[i].image);
  }
  EXPECT_TRUE(differs);
}

TEST(SynthDataset, SalientPatchesAreBrighter) {
  const auto data = make_synth_dataset(2, 100, 4, 4);
  for (const auto& s : data) {
    const auto patches = patchify(s.image, 4);
    std::set<std::size_t> salient(s.salient_patches.begin(), s.salient_patches.end());
    double lo_salient = 1e9, hi_other = 0.0;
    for (std::size_t p = 0; p < 16; ++p) {
      double m = 0.0;
      for (std::size_t c = 0; c < patches.cols(); ++c) m += patches.at(p, c);
      m /= static_cast<double>(patches.cols());
      if (salient.count(p)) lo_salient = std::min(lo_salient, m);
      else hi_other = std::max(hi_other, m);
    }
    EXPECT_GT(lo_salient, hi_other);
  }
}

// 1-nearest-centroid probe on the salient-patch indicator vector.
TEST(SynthDataset, LabelRecoverableFromSalientPatches) {
  const auto train = make_synth_dataset(3, 2000, 4, 4);
  const auto test = make_synth_dataset(4, 1000, 4, 4);
  std::vector<std::vector<double>> centroid(4, std::vector<double>(16, 0.0));
  std::vector<double> count(4, 0.0);
  for (const auto& s : train) {
    for (std::size_t p : s.salient_patches) centroid[s.label][p] += 1.0;
    count[s.label] += 1.0;
  }
  for (int k = 0; k < 4; ++k)
    for (auto& v : centroid[k]) v /= count[k];
  std::size_t correct = 0;
  for (const auto& s : test) {
    std::vector<double> x(16, 0.0);
    for (std::size_t p : s.salient_patches) x[p] = 1.0;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 4; ++k) {
      double d = 0.0;
      for (std::size_t p = 0; p < 16; ++p) d += (x[p] - centroid[k][p]) * (x[p] - centroid[k][p]);
      if (d < best_d) best_d = d, best = k;
    }
    correct += best == s.label;
  }
  EXPECT_GE(static_cast<double>(correct) / test.size(), 0.99);
}

TEST(Loss, KnownValues) {
  const std::vector<double> even = {0, 0};
  EXPECT_NEAR(cross_entropy(even, 0), std::log(2.0), 1e-15);
  const std::vector<double> sure = {10, -10};
  EXPECT_NEAR(cross_entropy(sure, 0), 2.06e-9, 0.01e-9);
}

TEST(Loss, GradientIsSoftmaxMinusOneHot) {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> logits(5);
    for (auto& v : logits) v = rng.uniform(-5, 5);
    const std::size_t label = rng.index(5);
    const auto g = cross_entropy_grad(logits, label);
    double z = 0.0;
    for (double v : logits) z += std::exp(v);
    for (std::size_t k = 0; k < 5; ++k) {
      EXPECT_NEAR(g[k], std::exp(logits[k]) / z - (k == label ? 1.0 : 0.0), 1e-10);
    }
  }
}

TEST(AdamWTest, DecayOnlyOnMatrices) {
  const auto cfg = presets::micro();
  auto w = init_weights(cfg, 1);
  const auto before = w;
  TrainConfig tc = presets::desk_train();
  tc.weight_decay = 0.5;
  AdamW opt(w, tc);
  const ModelWeights zero = map_params<TensorD>(
      w, [](const TensorD& t, const std::string&, ParamGroup) { return TensorD(t.shape()); });
  opt.step(w, zero, true, false);
  EXPECT_EQ(opt.steps(), 1u);
  // Zero gradients: matrices shrink by lr * decay, vectors stay put, the
  // disabled group is untouched.
  for (std::size_t j = 0; j < w.head.size(); ++j) {
    EXPECT_NEAR(w.head[j], before.head[j] * (1.0 - tc.lr_backbone * 0.5), 1e-15);
  }
  EXPECT_EQ(w.norm_gamma, before.norm_gamma);
  EXPECT_EQ(w.life_weight, before.life_weight);
}

class TinyTraining : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = presets::micro();
    data_ = make_synth_dataset(7, 24, config_.grid(), config_.num_classes, config_.patch,
                               config_.channels);
    train_ = presets::desk_train();
    train_.batch = 8;
    train_.epochs_pretrain = 1;
    train_.epochs_stage1 = 2;
    train_.epochs_stage2 = 2;
    train_.convergence_rel_tol = -1.0;  // run every epoch
    weights_ = init_weights(config_, 3);
  }

  static bool same_group(const ModelWeights& a, const ModelWeights& b, ParamGroup group) {
    bool same = true;
    std::vector<const TensorD*> bs;
    b.visit([&](const std::string&, const TensorD& t, ParamGroup) { bs.push_back(&t); });
    std::size_t i = 0;
    a.visit([&](const std::string&, const TensorD& t, ParamGroup g) {
      const TensorD& other = *bs[i++];
      if (g == group) same = same && t == other;
    });
    return same;
  }

  // Names of parameters whose values changed.
  static std::set<std::string> changed(const ModelWeights& a, const ModelWeights& b) {
    std::set<std::string> out;
    std::vector<const TensorD*> bs;
    b.visit([&](const std::string&, const TensorD& t, ParamGroup) { bs.push_back(&t); });
    std::size_t i = 0;
    a.visit([&](const std::string& name, const TensorD& t, ParamGroup) {
      if (!(t == *bs[i++])) out.insert(name);
    });
    return out;
  }

  ViTConfig config_;
  std::vector<SynthSample> data_;
  TrainConfig train_;
  ModelWeights weights_;
};

TEST_F(TinyTraining, StageOneFreezesBackbone) {
  auto w = weights_;
  train_.epochs_stage2 = 0;
  train_two_stage(w, config_, data_, train_);
  EXPECT_TRUE(same_group(w, weights_, ParamGroup::kBackbone));
  EXPECT_FALSE(same_group(w, weights_, ParamGroup::kLifePredictor));
}

TEST_F(TinyTraining, StageTwoFreezesPredictor) {
  auto w = weights_;
  train_.epochs_stage1 = 0;
  train_two_stage(w, config_, data_, train_);
  EXPECT_TRUE(same_group(w, weights_, ParamGroup::kLifePredictor));
  EXPECT_FALSE(same_group(w, weights_, ParamGroup::kBackbone));
}

TEST_F(TinyTraining, StagesPartitionTheParameters) {
  auto after1 = weights_;
  auto only1 = train_;
  only1.epochs_stage2 = 0;
  train_two_stage(after1, config_, data_, only1);
  auto after2 = after1;
  auto only2 = train_;
  only2.epochs_stage1 = 0;
  train_two_stage(after2, config_, data_, only2);
  const auto s1 = changed(weights_, after1);
  const auto s2 = changed(after1, after2);
  std::set<std::string> all;
  weights_.visit([&](const std::string& n, const TensorD&, ParamGroup) { all.insert(n); });
  std::set<std::string> sym;
  std::set_symmetric_difference(s1.begin(), s1.end(), s2.begin(), s2.end(),
                                std::inserter(sym, sym.end()));
  // Key biases have a zero gradient up to rounding (softmax ignores a
  // per-query constant), so they may or may not move in stage 2.
  for (std::size_t l = 0; l < weights_.layers.size(); ++l) {
    const std::string bk = "layers." + std::to_string(l) + ".bk";
    all.erase(bk);
    sym.erase(bk);
  }
  EXPECT_EQ(sym, all);
}

TEST_F(TinyTraining, SingleStageUpdatesBothGroups) {
  auto w = weights_;
  const auto report = train_single_stage(w, config_, data_, train_);
  ASSERT_EQ(report.stages.size(), 1u);
  EXPECT_EQ(report.stages[0].epoch_losses.size(), 4u);
  EXPECT_FALSE(same_group(w, weights_, ParamGroup::kBackbone));
  EXPECT_FALSE(same_group(w, weights_, ParamGroup::kLifePredictor));
}

TEST_F(TinyTraining, DeterministicLossCurvesAndWeights) {
  auto run = [&] {
    auto w = weights_;
    std::vector<double> losses;
    const StepSink sink = [&](const StepRecord& r) { losses.push_back(r.loss); };
    pretrain_dense(w, config_, data_, train_, sink);
    train_two_stage(w, config_, data_, train_, sink);
    train_single_stage(w, config_, data_, train_, sink);
    return std::make_pair(losses, w);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_TRUE(same_group(a.second, b.second, ParamGroup::kBackbone));
  EXPECT_TRUE(same_group(a.second, b.second, ParamGroup::kLifePredictor));
}

TEST_F(TinyTraining, StepRecordsCarryStageAndRate) {
  std::vector<StepRecord> records;
  auto w = weights_;
  train_two_stage(w, config_, data_, train_, [&](const StepRecord& r) { records.push_back(r); });
  ASSERT_EQ(records.size(), 2u * 3u + 2u * 3u);
  EXPECT_EQ(records.front().stage, "stage1");
  EXPECT_EQ(records.front().lr, train_.lr_life);
  EXPECT_EQ(records.back().stage, "stage2");
  EXPECT_EQ(records[6].stage, "stage2");
  EXPECT_EQ(records[6].lr, train_.lr_finetune > 0 ? train_.lr_finetune : train_.lr_backbone);
}

TEST_F(TinyTraining, FinetuneRateDefaultsToBackboneRate) {
  auto cfg = train_;
  cfg.lr_finetune = 0.0;
  cfg.epochs_stage1 = 0;
  std::vector<StepRecord> records;
  auto w = weights_;
  train_two_stage(w, config_, data_, cfg, [&](const StepRecord& r) { records.push_back(r); });
  ASSERT_FALSE(records.empty());
  EXPECT_EQ(records.front().lr, cfg.lr_backbone);
}

TEST_F(TinyTraining, HardStageTwoOnlyAppliesToStageTwo) {
  auto soft = train_;
  soft.stage2_hard = false;
  auto hard = train_;
  hard.stage2_hard = true;
  soft.epochs_stage2 = hard.epochs_stage2 = 0;
  auto a = weights_;
  auto b = weights_;
  train_two_stage(a, config_, data_, soft);
  train_two_stage(b, config_, data_, hard);
  EXPECT_TRUE(same_group(a, b, ParamGroup::kBackbone));
  EXPECT_TRUE(same_group(a, b, ParamGroup::kLifePredictor));
  soft.epochs_stage2 = hard.epochs_stage2 = 1;
  train_two_stage(a, config_, data_, soft);
  train_two_stage(b, config_, data_, hard);
  EXPECT_FALSE(same_group(a, b, ParamGroup::kBackbone));
}

TEST_F(TinyTraining, NonFiniteLossAborts) {
  auto w = weights_;
  w.head[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(pretrain_dense(w, config_, data_, train_), NumericError);
}

TEST_F(TinyTraining, ConvergenceStopsEarly) {
  auto w = weights_;
  train_.convergence_rel_tol = 10.0;  // every epoch counts as stalled
  train_.epochs_pretrain = 10;
  const auto s = pretrain_dense(w, config_, data_, train_);
  EXPECT_EQ(s.epoch_losses.size(), 1u + static_cast<std::size_t>(train_.convergence_patience));
}

TensorD hard_graph_logits(const ModelWeights& w, const ViTConfig& cfg,
                          const std::vector<SynthSample>& data) {
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const TrainBatch batch = make_batch(cfg, data, idx);
  ag::Tape tape;
  const ParamVars vars = bind_params(tape, w, true, false);
  const GraphOutput out = build_forward(tape, vars, cfg, make_schedule(cfg), batch, BetaPolicy::kHard);
  return tape.value(out.logits);
}

TEST(HardPolicy, MatchesInferenceEngine) {
  const ViTConfig cfg = presets::toy();
  const auto data = make_synth_dataset(4, 6, cfg.grid(), cfg.num_classes, cfg.patch, cfg.channels);
  for (std::uint64_t seed : {2u, 9u}) {
    const ModelWeights w = init_weights(cfg, seed);
    const TensorD graph = hard_graph_logits(w, cfg, data);
    std::vector<TensorF> images;
    for (const auto& s : data) images.push_back(s.image.cast<float>());
    SlimEngine engine(w, cfg);
    const TensorF engine_logits = engine.infer(images);
    EXPECT_LE(testing::max_abs_diff(graph, engine_logits.cast<double>()), 1e-4) << seed;
  }
}

TEST(HardPolicy, DiffersFromSoftWeights) {
  const ViTConfig cfg = presets::toy();
  const auto data = make_synth_dataset(4, 4, cfg.grid(), cfg.num_classes, cfg.patch, cfg.channels);
  const ModelWeights w = init_weights(cfg, 2);
  std::vector<std::size_t> idx{0, 1, 2, 3};
  const TrainBatch batch = make_batch(cfg, data, idx);
  ag::Tape tape;
  const ParamVars vars = bind_params(tape, w, true, false);
  const GraphOutput soft =
      build_forward(tape, vars, cfg, make_schedule(cfg), batch, BetaPolicy::kAfterTBase);
  EXPECT_GT(testing::max_abs_diff(tape.value(soft.logits), hard_graph_logits(w, cfg, data)), 1e-6);
}

TEST(HardPolicy, RejectsTrainablePredictor) {
  const ViTConfig cfg = presets::micro();
  const auto data = make_synth_dataset(4, 2, cfg.grid(), cfg.num_classes, cfg.patch, cfg.channels);
  const TrainBatch batch = make_batch(cfg, data, std::vector<std::size_t>{0, 1});
  ag::Tape tape;
  const ParamVars vars = bind_params(tape, init_weights(cfg, 1), false, true);
  EXPECT_THROW(build_forward(tape, vars, cfg, make_schedule(cfg), batch, BetaPolicy::kHard),
               ContractError);
}

TEST(HardPolicy, BackboneGradientsMatchFiniteDifferences) {
  const ViTConfig cfg = presets::micro();
  const auto data = make_synth_dataset(5, 2, cfg.grid(), cfg.num_classes, cfg.patch, cfg.channels);
  const TrainBatch batch = make_batch(cfg, data, std::vector<std::size_t>{0, 1});
  for (const auto& e : check_model_gradients(init_weights(cfg, 5), cfg, batch,
                                             ParamGroup::kBackbone, BetaPolicy::kHard)) {
    EXPECT_TRUE(e.passed) << e.name << " rel " << e.rel_error;
  }
}

}  // namespace
}  // namespace vitslim
