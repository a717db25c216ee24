// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "vitslim/errors.hpp"

namespace vitslim {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t number(const char* what) {
    skip_space_and_comments();
    std::size_t v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (++digits > 9) throw ParseError(std::string("netpbm: ") + what + " too large");
    }
    if (digits == 0) throw ParseError(std::string("netpbm: malformed header, expected ") + what);
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ParseError("netpbm: malformed header, missing separator before raster");
    }
    return pos_ + 1;
  }

  std::size_t pos_ = 2;

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
};

}  // namespace

TensorF decode_netpbm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("netpbm: expected binary P5 or P6 magic");
  }
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader h(bytes);
  const std::size_t width = h.number("width");
  const std::size_t height = h.number("height");
  const std::size_t maxval = h.number("maxval");
  if (width == 0 || height == 0) throw ParseError("netpbm: zero image dimension");
  if (maxval != 255) {
    throw ParseError("netpbm: maxval " + std::to_string(maxval) + " unsupported, only 255 is accepted");
  }
  const std::size_t start = h.raster_start();
  const std::size_t n = width * height * channels;
  if (bytes.size() - start < n) throw ParseError("netpbm: raster shorter than header dimensions");
  TensorF img({height, width, channels});
  auto out = img.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(bytes[start + i]) / 255.0f;
  return img;
}

std::vector<std::uint8_t> encode_netpbm(const TensorF& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw DimensionError("netpbm: image must be H x W x 1 or H x W x 3, got " +
                         shape_str(image.shape()));
  }
  const std::string header = std::string(image.dim(2) == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.size());
  for (float v : image.data()) {
    const float c = std::clamp(std::isnan(v) ? 0.0f : v, 0.0f, 1.0f);
    out.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0f)));
  }
  return out;
}

TensorF read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_netpbm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

TensorF read_image(const std::string& path, const ViTConfig& config) {
  TensorF img = read_image(path);
  const auto side = static_cast<std::size_t>(config.image_side);
  if (img.dim(0) != side || img.dim(1) != side ||
      img.dim(2) != static_cast<std::size_t>(config.channels)) {
    throw ParseError(path + ": image is " + shape_str(img.shape()) + ", model expects [" +
                     std::to_string(side) + "x" + std::to_string(side) + "x" +
                     std::to_string(config.channels) + "]");
  }
  return img;
}

void write_image(const std::string& path, const TensorF& image) {
  const auto bytes = encode_netpbm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace vitslim
