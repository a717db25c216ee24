// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/slimming.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <string>
#include <thread>

#include "vitslim/backbone.hpp"
#include "vitslim/errors.hpp"

namespace vitslim {

std::vector<std::size_t> SurvivorSets::tokens(int layer) const {
  const auto& patches = at(layer);
  std::vector<std::size_t> out;
  out.reserve(patches.size() + 1);
  out.push_back(0);
  for (std::size_t i : patches) out.push_back(i + 1);
  return out;
}

SurvivorSets select_survivors(const LifeVector& lives, const SlimSchedule& schedule) {
  const std::size_t n = lives.tau.size();
  if (static_cast<int>(n) != schedule.num_patches) {
    throw ContractError("select_survivors: " + std::to_string(n) + " lives for a schedule over " +
                        std::to_string(schedule.num_patches) + " patches");
  }
  SurvivorSets out;
  out.ranking.resize(n);
  std::iota(out.ranking.begin(), out.ranking.end(), std::size_t{0});
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t a, std::size_t b) {
    return lives.tau[a] > lives.tau[b];
  });
  out.keep.reserve(schedule.counts.size());
  for (int count : schedule.counts) {
    if (count < 0 || static_cast<std::size_t>(count) > n) {
      throw ContractError("select_survivors: budget " + std::to_string(count) +
                          " exceeds " + std::to_string(n) + " patches");
    }
    std::vector<std::size_t> kept(out.ranking.begin(), out.ranking.begin() + count);
    std::sort(kept.begin(), kept.end());
    out.keep.push_back(std::move(kept));
  }
  return out;
}

WeightMatrix survivor_weights(const SurvivorSets& survivors, std::size_t num_patches) {
  WeightMatrix m;
  m.mode = WeightMode::kHard;
  const std::size_t layers = survivors.keep.size();
  m.beta = TensorD({num_patches + 1, layers}, 0.0);
  for (std::size_t t = 0; t < layers; ++t) {
    m.beta.at(0, t) = 1.0;
    for (std::size_t i : survivors.keep[t]) m.beta.at(i + 1, t) = 1.0;
  }
  return m;
}

SlimOpCounts count_slim_ops(const SlimCounters& counters, const SlimSchedule& schedule) {
  SlimOpCounts out;
  if (counters.images == 0) return out;
  const double images = static_cast<double>(counters.images);
  out.life_module_calls = static_cast<double>(counters.life_module_calls) / images;
  out.per_layer_scorer_calls_baseline =
      schedule.slims() ? static_cast<double>(schedule.t_slim.size()) : 0.0;
  out.ratio = out.life_module_calls > 0.0
                  ? out.per_layer_scorer_calls_baseline / out.life_module_calls
                  : 0.0;
  return out;
}

std::size_t threads_from_env() {
  const char* env = std::getenv("VITSLIM_THREADS");
  if (env == nullptr) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<std::size_t>(v);
}

SlimEngine::SlimEngine(const ModelWeights& weights, const ViTConfig& config)
    : config_(config), schedule_(make_schedule(config)), threads_(threads_from_env()) {
  validate_weights(weights, config_);
  weights_ = cast_weights<float>(weights);
}

TensorF SlimEngine::infer(std::span<const TensorF> images) { return run(images).logits; }

SlimResult SlimEngine::run(std::span<const TensorF> images) {
  const std::size_t batch = images.size();
  if (batch == 0) return {TensorF({0, static_cast<std::size_t>(config_.num_classes)}), {}, {}};
  for (const auto& img : images) {
    if (img.shape() != images[0].shape()) {
      throw DimensionError("infer: all images in a batch must share a shape");
    }
  }
  const std::size_t workers = std::min(threads_, batch);
  if (workers <= 1) return run_chunk(images, counters_);

  std::vector<SlimResult> parts(workers);
  std::vector<SlimCounters> part_counters(workers);
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    const std::size_t per = (batch + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = std::min(batch, w * per);
      const std::size_t hi = std::min(batch, lo + per);
      pool.emplace_back([&, w, lo, hi] {
        try {
          if (lo < hi) parts[w] = run_chunk(images.subspan(lo, hi - lo), part_counters[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  SlimResult merged;
  const std::size_t classes = static_cast<std::size_t>(config_.num_classes);
  merged.logits = TensorF({batch, classes});
  std::size_t row = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    auto& p = parts[w];
    for (std::size_t r = 0; r < p.logits.rows(); ++r, ++row) {
      std::copy(p.logits.row(r).begin(), p.logits.row(r).end(), merged.logits.row(row).begin());
    }
    std::move(p.lives.begin(), p.lives.end(), std::back_inserter(merged.lives));
    std::move(p.survivors.begin(), p.survivors.end(), std::back_inserter(merged.survivors));
    const auto& c = part_counters[w];
    counters_.images += c.images;
    counters_.life_module_calls += c.life_module_calls;
    counters_.gathers += c.gathers;
    counters_.life_module_layers.insert(counters_.life_module_layers.end(),
                                        c.life_module_layers.begin(), c.life_module_layers.end());
  }
  return merged;
}

SlimResult SlimEngine::run_chunk(std::span<const TensorF> images, SlimCounters& counters) const {
  const std::size_t batch = images.size();
  const std::size_t classes = static_cast<std::size_t>(config_.num_classes);
  const bool slimming = schedule_.slims();
  SlimResult result;
  result.logits = TensorF({batch, classes});
  result.lives.resize(slimming ? batch : 0);
  result.survivors.resize(slimming ? batch : 0);
  // Images go through one at a time so every GEMM sees the same row layout
  // whatever the batch holds; logits then do not depend on batch position.
  for (std::size_t b = 0; b < batch; ++b) {
    const TensorF logits = run_one(images[b], slimming ? &result.lives[b] : nullptr,
                                   slimming ? &result.survivors[b] : nullptr, counters);
    std::copy(logits.data().begin(), logits.data().end(), result.logits.row(b).begin());
  }
  counters.images += batch;
  return result;
}

TensorF SlimEngine::run_one(const TensorF& image, LifeVector* lives, SurvivorSets* survivors,
                            SlimCounters& counters) const {
  const std::size_t n = static_cast<std::size_t>(config_.num_patches());
  const std::size_t pdim = static_cast<std::size_t>(config_.patch_dim());
  const TensorF patches = patchify(image, config_.patch);
  if (patches.rows() != n || patches.cols() != pdim) {
    throw DimensionError("infer: image " + shape_str(image.shape()) +
                         " does not match the configured geometry");
  }
  TensorF x = embed_tokens(weights_, patches);
  const std::size_t d = x.cols();

  // Original patch index of each non-[CLS] row currently resident.
  std::vector<std::size_t> current(n);
  std::iota(current.begin(), current.end(), std::size_t{0});
  std::size_t seq = n + 1;

  for (int t = 1; t <= config_.layers; ++t) {
    const std::size_t budget = static_cast<std::size_t>(schedule_.count(t));
    if (survivors != nullptr && t > config_.t_base && budget + 1 < seq) {
      const auto& keep = survivors->at(t);
      TensorF compact({budget + 1, d});
      std::copy(x.ptr(), x.ptr() + d, compact.ptr());  // [CLS]
      std::size_t pos = 0;
      for (std::size_t k = 0; k < keep.size(); ++k) {
        while (current[pos] != keep[k]) ++pos;  // keep is a sorted subset of current
        std::copy(x.ptr() + (pos + 1) * d, x.ptr() + (pos + 2) * d, compact.ptr() + (k + 1) * d);
      }
      current = keep;
      ++counters.gathers;
      x = std::move(compact);
      seq = budget + 1;
    }
    x = block_forward(x, weights_.layers[static_cast<std::size_t>(t - 1)], config_.heads);
    if (lives != nullptr && t == config_.t_base) {
      *lives = predict_lives(x, weights_, schedule_);
      *survivors = select_survivors(*lives, schedule_);
      ++counters.life_module_calls;
      counters.life_module_layers.push_back(t);
    }
  }
  return classify(x, weights_);
}

}  // namespace vitslim
