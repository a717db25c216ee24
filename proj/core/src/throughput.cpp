// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/throughput.hpp"

#include <algorithm>
#include <chrono>
#include <json.hpp>

#include "vitslim/errors.hpp"
#include "vitslim/random.hpp"

namespace vitslim {

BenchReport measure_throughput(SlimEngine& engine, std::span<const TensorF> batch,
                               std::size_t warmup, std::size_t timed) {
  if (warmup < kMinWarmupIters) throw ContractError("measure_throughput: need >= 3 warmup iterations");
  if (timed < kMinTimedIters) throw ContractError("measure_throughput: need >= 10 timed iterations");
  if (batch.empty()) throw ContractError("measure_throughput: empty batch");
  for (std::size_t i = 0; i < warmup; ++i) engine.infer(batch);

  using Clock = std::chrono::steady_clock;
  BenchReport r;
  r.batch = batch.size();
  r.warmup_iters = warmup;
  r.timed_iters = timed;
  std::vector<double> rates;
  for (std::size_t i = 0; i < timed; ++i) {
    const auto start = Clock::now();
    const TensorF logits = engine.infer(batch);
    const auto stop = Clock::now();
    const double seconds = std::chrono::duration<double>(stop - start).count();
    if (!(seconds > 0.0)) throw MeasurementError("measure_throughput: zero-duration iteration");
    if (logits.rows() != batch.size()) throw MeasurementError("measure_throughput: short output");
    r.iteration_seconds.push_back(seconds);
    rates.push_back(static_cast<double>(batch.size()) / seconds);
  }
  std::sort(rates.begin(), rates.end());
  const std::size_t mid = rates.size() / 2;
  r.images_per_second =
      rates.size() % 2 == 1 ? rates[mid] : 0.5 * (rates[mid - 1] + rates[mid]);
  return r;
}

std::vector<TensorF> random_images(const ViTConfig& config, std::size_t count,
                                   std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t side = static_cast<std::size_t>(config.image_side);
  const std::size_t c = static_cast<std::size_t>(config.channels);
  std::vector<TensorF> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    TensorF img({side, side, c});
    for (auto& v : img.data()) v = static_cast<float>(rng.uniform());
    out.push_back(std::move(img));
  }
  return out;
}

std::string to_json(const BenchReport& report) {
  nlohmann::json j{{"images_per_second", report.images_per_second},
                   {"batch", report.batch},
                   {"warmup_iters", report.warmup_iters},
                   {"timed_iters", report.timed_iters},
                   {"iteration_seconds", report.iteration_seconds}};
  if (report.baseline_rate) {
    j["baseline_rate"] = *report.baseline_rate;
    j["speedup"] = *report.speedup();
  }
  return j.dump(2);
}

}  // namespace vitslim
