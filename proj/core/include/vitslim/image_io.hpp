// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitslim/config.hpp"
#include "vitslim/tensor.hpp"

namespace vitslim {

// Binary netpbm: P5 (grey) and P6 (RGB), maxval 255 only. Images are
// height x width x channels with values in [0, 1].
TensorF decode_netpbm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_netpbm(const TensorF& image);

TensorF read_image(const std::string& path);
// Also checks the image matches the model's side and channel count.
TensorF read_image(const std::string& path, const ViTConfig& config);
// Writes P5 for one channel and P6 for three; values are clamped to [0, 1]
// and rounded to the nearest level.
void write_image(const std::string& path, const TensorF& image);

}  // namespace vitslim
