// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vitslim/slimming.hpp"
#include "vitslim/tensor.hpp"

namespace vitslim {

struct BenchReport {
  double images_per_second = 0.0;  // median over timed iterations
  std::size_t batch = 0;
  std::size_t warmup_iters = 0;
  std::size_t timed_iters = 0;
  std::vector<double> iteration_seconds;
  std::optional<double> baseline_rate;

  std::optional<double> speedup() const {
    if (!baseline_rate || *baseline_rate <= 0.0) return std::nullopt;
    return images_per_second / *baseline_rate;
  }
};

inline constexpr std::size_t kMinWarmupIters = 3;
inline constexpr std::size_t kMinTimedIters = 10;

// Runs `warmup` discarded batches then `timed` measured ones and reports the
// median rate. The caller must not run other work in the process meanwhile.
// Throws ContractError for warmup < 3 or timed < 10 and MeasurementError if
// an iteration measures zero time.
BenchReport measure_throughput(SlimEngine& engine, std::span<const TensorF> batch,
                               std::size_t warmup = kMinWarmupIters,
                               std::size_t timed = kMinTimedIters);

// Random images matching the engine's input geometry.
std::vector<TensorF> random_images(const ViTConfig& config, std::size_t count,
                                   std::uint64_t seed);

std::string to_json(const BenchReport& report);

}  // namespace vitslim
