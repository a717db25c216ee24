// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/flops.hpp"

#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "vitslim/errors.hpp"
#include "vitslim/schedule.hpp"

namespace vitslim {

std::int64_t life_module_flops(std::int64_t tokens, std::int64_t dim) {
  return 2 * tokens * dim * dim + tokens * dim;
}

FlopsReport count_flops(const ViTConfig& config, std::span<const int> counts) {
  config.validate();
  if (static_cast<int>(counts.size()) != config.layers) {
    throw ContractError("count_flops: need one count per layer");
  }
  const std::int64_t d = config.embed_dim;
  const std::int64_t n = config.num_patches();
  FlopsReport r;
  r.config = config;
  r.counts.assign(counts.begin(), counts.end());
  const bool slims = counts.back() < n;
  r.embed = n * config.patch_dim() * d;
  r.head = d * config.num_classes;
  r.total = r.embed + r.head;
  for (int t = 1; t <= config.layers; ++t) {
    const int count = counts[static_cast<std::size_t>(t - 1)];
    if (count < 1 || count > n) throw ContractError("count_flops: count out of range");
    LayerFlops l;
    l.layer = t;
    l.tokens = count + 1;
    l.attention = 4 * l.tokens * d * d + 2 * l.tokens * l.tokens * d;
    l.mlp = 8 * l.tokens * d * d;
    if (slims && t == config.t_base) l.slim = life_module_flops(l.tokens, d);
    r.total += l.attention + l.mlp + l.slim;
    r.per_layer.push_back(l);
  }
  return r;
}

FlopsReport count_flops(const ViTConfig& config) {
  const SlimSchedule s = make_schedule(config);
  return count_flops(config, s.counts);
}

std::int64_t dense_flops_closed_form(const ViTConfig& config) {
  const std::int64_t d = config.embed_dim;
  const std::int64_t m = config.tokens();
  return config.layers * (12 * m * d * d + 2 * m * m * d) +
         static_cast<std::int64_t>(config.num_patches()) * config.patch_dim() * d +
         d * config.num_classes;
}

double flops_reduction(const FlopsReport& dense, const FlopsReport& slim) {
  return static_cast<double>(dense.total) / static_cast<double>(slim.total) - 1.0;
}

SlimOverheadReport compare_slim_overhead(const ViTConfig& config) {
  config.validate();
  SlimOverheadReport r;
  r.slimming_layers = static_cast<int>(config.t_slim.size());
  const std::int64_t per_call = life_module_flops(config.tokens(), config.embed_dim);
  r.baseline_flops = per_call * r.slimming_layers;
  r.one_shot_flops = r.slimming_layers > 0 ? per_call : 0;
  r.ratio = r.one_shot_flops > 0
                ? static_cast<double>(r.baseline_flops) / static_cast<double>(r.one_shot_flops)
                : 0.0;
  return r;
}

std::string to_json(const FlopsReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : report.per_layer) {
    layers.push_back({{"layer", l.layer},
                      {"tokens", l.tokens},
                      {"attention_flops", l.attention},
                      {"mlp_flops", l.mlp},
                      {"slim_flops", l.slim}});
  }
  nlohmann::json j{{"keep_rate", report.config.keep_rate},
                   {"t_slim", report.config.t_slim},
                   {"counts", report.counts},
                   {"embed_flops", report.embed},
                   {"head_flops", report.head},
                   {"per_layer", layers},
                   {"total_flops", report.total},
                   {"gflops", report.gflops()}};
  return j.dump(2);
}

std::string to_table(const FlopsReport& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%5s %6s %14s %14s %12s\n", "layer", "tokens", "attention",
                "mlp", "slim");
  os << line;
  for (const auto& l : report.per_layer) {
    std::snprintf(line, sizeof line, "%5d %6lld %14lld %14lld %12lld\n", l.layer,
                  static_cast<long long>(l.tokens), static_cast<long long>(l.attention),
                  static_cast<long long>(l.mlp), static_cast<long long>(l.slim));
    os << line;
  }
  std::snprintf(line, sizeof line, "embed %lld  head %lld  total %lld (%.3f G)\n",
                static_cast<long long>(report.embed), static_cast<long long>(report.head),
                static_cast<long long>(report.total), report.gflops());
  os << line;
  return os.str();
}

}  // namespace vitslim
