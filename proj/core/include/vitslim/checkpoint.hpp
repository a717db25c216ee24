// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vitslim/config.hpp"
#include "vitslim/weights.hpp"

namespace vitslim {

// Layout:
//   bytes 0..7   magic "VSLIM\0\0" followed by the format version byte
//   bytes 8..15  u64 little-endian length L of the metadata block
//   16..16+L     metadata JSON: {"config": ..., "tensors": [{name, shape,
//                offset, dtype}]}
//   payload      starts at the next 64-byte boundary; every tensor is
//                little-endian f64 at a 64-byte aligned offset relative to it
inline constexpr std::array<char, 8> kCheckpointMagic = {'V', 'S', 'L', 'I', 'M', '\0', '\0', '\1'};
inline constexpr std::size_t kCheckpointAlign = 64;

struct Checkpoint {
  ViTConfig config;
  ModelWeights weights;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelWeights& weights, const ViTConfig& config);
// Throws LoadError on bad magic or version, a malformed directory, entries
// outside the payload or a truncated payload. Nothing is returned on failure.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const ModelWeights& weights, const ViTConfig& config);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vitslim
