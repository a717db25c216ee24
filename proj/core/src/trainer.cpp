// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vitslim/backbone.hpp"
#include "vitslim/errors.hpp"
#include "vitslim/random.hpp"
#include "vitslim/schedule.hpp"
#include "vitslim/slimming.hpp"

namespace vitslim {

std::vector<std::size_t> label_region(int grid, int classes, std::size_t label) {
  const std::size_t g = static_cast<std::size_t>(grid);
  std::vector<std::size_t> cells;
  if (classes <= 4 && grid % 2 == 0) {
    const std::size_t half = g / 2;
    const std::size_t qy = label / 2;
    const std::size_t qx = label % 2;
    for (std::size_t y = qy * half; y < (qy + 1) * half; ++y) {
      for (std::size_t x = qx * half; x < (qx + 1) * half; ++x) cells.push_back(y * g + x);
    }
  } else {
    for (std::size_t c = label; c < g * g; c += static_cast<std::size_t>(classes)) {
      cells.push_back(c);
    }
  }
  return cells;
}

std::vector<SynthSample> make_synth_dataset(std::uint64_t seed, std::size_t count, int grid,
                                            int classes, int patch, int channels) {
  if (grid < 1 || patch < 1 || channels < 1) throw ConfigError("dataset geometry must be positive");
  if (classes < 1 || classes > grid * grid) throw ConfigError("dataset needs 1 <= classes <= grid^2");
  Rng rng(seed);
  const std::size_t g = static_cast<std::size_t>(grid);
  const std::size_t p = static_cast<std::size_t>(patch);
  const std::size_t c = static_cast<std::size_t>(channels);
  const std::size_t side = g * p;
  std::vector<SynthSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    SynthSample s;
    s.label = rng.index(static_cast<std::size_t>(classes));
    s.image = TensorD({side, side, c});
    for (auto& v : s.image.data()) v = rng.uniform(0.0, 0.15);

    const auto region = label_region(grid, classes, s.label);
    const std::size_t cells = 1 + rng.index(3);
    std::vector<std::size_t> chosen{region[rng.index(region.size())]};
    while (chosen.size() < cells) {
      std::vector<std::size_t> frontier;
      for (std::size_t cell : region) {
        if (std::find(chosen.begin(), chosen.end(), cell) != chosen.end()) continue;
        const bool adjacent = std::any_of(chosen.begin(), chosen.end(), [&](std::size_t o) {
          const std::size_t dy = cell / g > o / g ? cell / g - o / g : o / g - cell / g;
          const std::size_t dx = cell % g > o % g ? cell % g - o % g : o % g - cell % g;
          return dy + dx == 1;
        });
        if (adjacent) frontier.push_back(cell);
      }
      if (frontier.empty()) break;
      chosen.push_back(frontier[rng.index(frontier.size())]);
    }
    std::sort(chosen.begin(), chosen.end());

    const double amplitude = rng.uniform(0.7, 1.0);
    for (std::size_t cell : chosen) {
      const std::size_t y0 = (cell / g) * p;
      const std::size_t x0 = (cell % g) * p;
      for (std::size_t y = 0; y < p; ++y) {
        for (std::size_t x = 0; x < p; ++x) {
          // Bright ring with a dimmer centre.
          const bool border = y == 0 || x == 0 || y + 1 == p || x + 1 == p;
          const double v = border ? amplitude : 0.4 * amplitude;
          for (std::size_t ch = 0; ch < c; ++ch) {
            s.image[((y0 + y) * side + x0 + x) * c + ch] = v + rng.uniform(0.0, 0.05);
          }
        }
      }
    }
    s.salient_patches = std::move(chosen);
    out.push_back(std::move(s));
  }
  return out;
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw ContractError("cross_entropy: label out of range");
  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - peak);
  return -(logits[label] - peak - std::log(z));
}

std::vector<double> cross_entropy_grad(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw ContractError("cross_entropy: label out of range");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> g(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) z += (g[i] = std::exp(logits[i] - peak));
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] / z - (i == label ? 1.0 : 0.0);
  return g;
}

AdamW::AdamW(const ModelWeights& like, const TrainConfig& config) : config_(config) {
  auto zeros = [](const TensorD& t, const std::string&, ParamGroup) { return TensorD(t.shape()); };
  m_ = map_params<TensorD>(like, zeros);
  v_ = map_params<TensorD>(like, zeros);
}

void AdamW::step(ModelWeights& weights, const ModelWeights& grads, bool backbone, bool life) {
  ++steps_;
  const double b1 = config_.adam_beta1;
  const double b2 = config_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  std::vector<const TensorD*> g_list;
  std::vector<TensorD*> m_list;
  std::vector<TensorD*> v_list;
  grads.visit([&](const std::string&, const TensorD& t, ParamGroup) { g_list.push_back(&t); });
  m_.visit([&](const std::string&, TensorD& t, ParamGroup) { m_list.push_back(&t); });
  v_.visit([&](const std::string&, TensorD& t, ParamGroup) { v_list.push_back(&t); });
  std::size_t i = 0;
  weights.visit([&](const std::string&, TensorD& p, ParamGroup group) {
    const std::size_t k = i++;
    const bool enabled = group == ParamGroup::kBackbone ? backbone : life;
    if (!enabled) return;
    const double lr = group == ParamGroup::kBackbone ? config_.lr_backbone : config_.lr_life;
    const double decay = p.rank() >= 2 ? config_.weight_decay : 0.0;
    const TensorD& g = *g_list[k];
    TensorD& m = *m_list[k];
    TensorD& v = *v_list[k];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.adam_eps);
      p[j] -= lr * (update + decay * p[j]);
    }
  });
}

TrainBatch make_batch(const ViTConfig& config, std::span<const SynthSample> data,
                      std::span<const std::size_t> indices) {
  const std::size_t n = static_cast<std::size_t>(config.num_patches());
  const std::size_t pdim = static_cast<std::size_t>(config.patch_dim());
  TrainBatch batch;
  batch.patches = TensorD({indices.size() * n, pdim});
  batch.labels.reserve(indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const SynthSample& s = data[indices[b]];
    const TensorD p = patchify(s.image, config.patch);
    if (p.rows() != n || p.cols() != pdim) {
      throw DimensionError("training image does not match the configured geometry");
    }
    std::copy(p.data().begin(), p.data().end(), batch.patches.ptr() + b * n * pdim);
    batch.labels.push_back(s.label);
  }
  return batch;
}

namespace {

struct StageSpec {
  std::string name;
  int epochs = 0;
  bool backbone = false;
  bool life = false;
  BetaPolicy policy = BetaPolicy::kNone;
  std::uint64_t stream = 0;  // decorrelates shuffles between stages
};

StageSummary run_stage(ModelWeights& weights, const ViTConfig& config,
                       const std::vector<SynthSample>& data, TrainConfig train,
                       const StageSpec& spec, const StepSink& sink) {
  train.validate();
  if (spec.name == "stage2" && train.lr_finetune > 0.0) train.lr_backbone = train.lr_finetune;
  if (data.empty()) throw ContractError("training needs a non-empty dataset");
  const SlimSchedule schedule = make_schedule(config);
  AdamW optimizer(weights, train);
  StageSummary summary{spec.name, {}};
  std::vector<std::size_t> order(data.size());
  std::size_t step = 0;
  int stalled = 0;
  const double lr = spec.backbone ? train.lr_backbone : train.lr_life;

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(train.seed * 1000003ULL + spec.stream * 7919ULL + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += train.batch) {
      const std::size_t hi = std::min(order.size(), lo + train.batch);
      const TrainBatch batch =
          make_batch(config, data, std::span<const std::size_t>(order).subspan(lo, hi - lo));
      ag::Tape tape;
      const ParamVars vars = bind_params(tape, weights, spec.backbone, spec.life);
      const GraphOutput out = build_forward(tape, vars, config, schedule, batch, spec.policy);
      const double loss = tape.value(out.loss)[0];
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << spec.name << " step " << step << " epoch " << epoch
            << ": non-finite loss " << loss;
        throw NumericError(msg.str());
      }
      tape.backward(out.loss);
      ModelWeights grads = map_params<TensorD>(
          vars, [&](const ag::Var& v, const std::string&, ParamGroup) { return tape.grad(v); });
      optimizer.step(weights, grads, spec.backbone, spec.life);
      if (sink) sink(StepRecord{step, spec.name, loss, lr});
      total += loss;
      ++batches;
      ++step;
    }
    const double mean = total / static_cast<double>(batches);
    if (!summary.epoch_losses.empty()) {
      const double prev = summary.epoch_losses.back();
      const double gain = (prev - mean) / std::max(std::abs(prev), 1e-12);
      stalled = gain < train.convergence_rel_tol ? stalled + 1 : 0;
    }
    summary.epoch_losses.push_back(mean);
    if (stalled >= train.convergence_patience) break;
  }
  return summary;
}

}  // namespace

StageSummary pretrain_dense(ModelWeights& weights, const ViTConfig& config,
                            const std::vector<SynthSample>& data, const TrainConfig& train,
                            const StepSink& sink) {
  return run_stage(weights, config, data, train,
                   {"pretrain", train.epochs_pretrain, true, false, BetaPolicy::kNone, 1}, sink);
}

TrainReport train_two_stage(ModelWeights& weights, const ViTConfig& config,
                            const std::vector<SynthSample>& data, const TrainConfig& train,
                            const StepSink& sink) {
  const BetaPolicy policy = beta_policy(config);
  const BetaPolicy finetune = train.stage2_hard ? BetaPolicy::kHard : policy;
  TrainReport report;
  report.stages.push_back(run_stage(weights, config, data, train,
                                    {"stage1", train.epochs_stage1, false, true, policy, 2}, sink));
  report.stages.push_back(run_stage(weights, config, data, train,
                                    {"stage2", train.epochs_stage2, true, false, finetune, 3}, sink));
  return report;
}

TrainReport train_single_stage(ModelWeights& weights, const ViTConfig& config,
                               const std::vector<SynthSample>& data, const TrainConfig& train,
                               const StepSink& sink) {
  TrainReport report;
  report.stages.push_back(run_stage(
      weights, config, data, train,
      {"single", train.epochs_stage1 + train.epochs_stage2, true, true, beta_policy(config), 4},
      sink));
  return report;
}

namespace {

template <typename Fn>
void for_each_batch(const ModelWeights& weights, const ViTConfig& config,
                    const std::vector<SynthSample>& data, std::size_t batch, Fn&& fn) {
  SlimEngine engine(weights, config);
  engine.set_threads(1);
  for (std::size_t lo = 0; lo < data.size(); lo += batch) {
    const std::size_t hi = std::min(data.size(), lo + batch);
    std::vector<TensorF> images;
    images.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) images.push_back(data[i].image.cast<float>());
    fn(lo, engine.run(images));
  }
}

}  // namespace

double evaluate_accuracy(const ModelWeights& weights, const ViTConfig& config,
                         const std::vector<SynthSample>& data, std::size_t batch) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for_each_batch(weights, config, data, batch, [&](std::size_t lo, const SlimResult& r) {
    for (std::size_t b = 0; b < r.logits.rows(); ++b) {
      auto row = r.logits.row(b);
      const auto best = static_cast<std::size_t>(
          std::max_element(row.begin(), row.end()) - row.begin());
      if (best == data[lo + b].label) ++correct;
    }
  });
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

LifeSeparation life_separation(const ModelWeights& weights, const ViTConfig& config,
                               const std::vector<SynthSample>& data, std::size_t batch) {
  if (!make_schedule(config).slims()) {
    throw ContractError("life_separation needs a slimming schedule (keep_rate < 1)");
  }
  double salient_life = 0.0, other_life = 0.0, salient_rank = 0.0, other_rank = 0.0;
  std::size_t salient_n = 0, other_n = 0;
  for_each_batch(weights, config, data, batch, [&](std::size_t lo, const SlimResult& r) {
    for (std::size_t b = 0; b < r.lives.size(); ++b) {
      const auto& salient = data[lo + b].salient_patches;
      const auto& ranking = r.survivors[b].ranking;
      std::vector<std::size_t> rank_of(ranking.size());
      for (std::size_t k = 0; k < ranking.size(); ++k) rank_of[ranking[k]] = ranking.size() - 1 - k;
      for (std::size_t i = 0; i < r.lives[b].tau.size(); ++i) {
        const bool is_salient = std::binary_search(salient.begin(), salient.end(), i);
        const double tau = r.lives[b].tau[i];
        if (is_salient) {
          salient_life += tau;
          salient_rank += static_cast<double>(rank_of[i]);
          ++salient_n;
        } else {
          other_life += tau;
          other_rank += static_cast<double>(rank_of[i]);
          ++other_n;
        }
      }
    }
  });
  LifeSeparation out;
  if (salient_n) {
    out.salient_mean_life = salient_life / static_cast<double>(salient_n);
    out.salient_mean_rank = salient_rank / static_cast<double>(salient_n);
  }
  if (other_n) {
    out.other_mean_life = other_life / static_cast<double>(other_n);
    out.other_mean_rank = other_rank / static_cast<double>(other_n);
  }
  return out;
}

}  // namespace vitslim
