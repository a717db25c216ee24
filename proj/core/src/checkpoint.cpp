// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <map>

#include "vitslim/errors.hpp"

namespace vitslim {

namespace {

using nlohmann::json;

std::size_t align_up(std::size_t n) {
  return (n + kCheckpointAlign - 1) / kCheckpointAlign * kCheckpointAlign;
}

void put_u64(std::uint8_t* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_u64(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelWeights& weights, const ViTConfig& config) {
  validate_weights(weights, config);
  json dir = json::array();
  std::size_t offset = 0;
  weights.visit([&](const std::string& name, const TensorD& t, ParamGroup) {
    dir.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"dtype", "f64"}});
    offset = align_up(offset + t.size() * sizeof(double));
  });
  const json meta{{"config", json::parse(to_json(config))}, {"tensors", dir}};
  const std::string meta_text = meta.dump();
  const std::size_t payload_start = align_up(16 + meta_text.size());

  std::vector<std::uint8_t> out(payload_start + offset, 0);
  std::memcpy(out.data(), kCheckpointMagic.data(), kCheckpointMagic.size());
  put_u64(out.data() + 8, meta_text.size());
  std::memcpy(out.data() + 16, meta_text.data(), meta_text.size());
  std::size_t k = 0;
  weights.visit([&](const std::string&, const TensorD& t, ParamGroup) {
    std::uint8_t* dst = out.data() + payload_start + dir[k++].at("offset").get<std::size_t>();
    for (double v : t.data()) {
      put_u64(dst, std::bit_cast<std::uint64_t>(v));
      dst += 8;
    }
  });
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) throw LoadError("checkpoint: file shorter than header");
  if (!std::equal(kCheckpointMagic.begin(), kCheckpointMagic.begin() + 7, bytes.begin())) {
    throw LoadError("checkpoint: bad magic");
  }
  if (bytes[7] != static_cast<std::uint8_t>(kCheckpointMagic[7])) {
    throw LoadError("checkpoint: unsupported format version " + std::to_string(bytes[7]));
  }
  const std::uint64_t meta_len = get_u64(bytes.data() + 8);
  if (meta_len > bytes.size() - 16) throw LoadError("checkpoint: metadata runs past end of file");

  json meta;
  try {
    meta = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(meta_len));
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint: corrupt metadata: ") + e.what());
  }
  Checkpoint cp;
  try {
    cp.config = vit_config_from_json(meta.at("config").dump());
    cp.config.validate();
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint: corrupt metadata: ") + e.what());
  } catch (const Error& e) {
    throw LoadError(std::string("checkpoint: bad config: ") + e.what());
  }

  struct Entry {
    Shape shape;
    std::size_t offset;
  };
  std::map<std::string, Entry> entries;
  try {
    for (const auto& e : meta.at("tensors")) {
      if (e.at("dtype").get<std::string>() != "f64") {
        throw LoadError("checkpoint: unsupported dtype for '" + e.at("name").get<std::string>() + "'");
      }
      const auto name = e.at("name").get<std::string>();
      if (!entries.emplace(name, Entry{e.at("shape").get<Shape>(), e.at("offset").get<std::size_t>()})
               .second) {
        throw LoadError("checkpoint: duplicate tensor '" + name + "'");
      }
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint: corrupt tensor directory: ") + e.what());
  }

  const std::size_t payload_start = align_up(16 + meta_len);
  const std::size_t payload_size = bytes.size() > payload_start ? bytes.size() - payload_start : 0;
  cp.weights = init_weights(cp.config, 0);
  cp.weights.visit([&](const std::string& name, TensorD& t, ParamGroup) {
    const auto it = entries.find(name);
    if (it == entries.end()) throw LoadError("checkpoint: missing tensor '" + name + "'");
    const Entry& e = it->second;
    if (e.shape != t.shape()) {
      throw LoadError("checkpoint: tensor '" + name + "' has shape " + shape_str(e.shape) +
                      ", expected " + shape_str(t.shape()));
    }
    if (e.offset % kCheckpointAlign != 0) {
      throw LoadError("checkpoint: tensor '" + name + "' is not 64-byte aligned");
    }
    if (e.offset >= payload_size && t.size() > 0) {
      throw LoadError("checkpoint: tensor '" + name + "' offset " + std::to_string(e.offset) +
                      " is past end of file");
    }
    const std::size_t nbytes = t.size() * sizeof(double);
    if (nbytes > payload_size - e.offset) {
      throw LoadError("checkpoint: truncated payload in tensor '" + name + "'");
    }
    const std::uint8_t* src = bytes.data() + payload_start + e.offset;
    for (auto& v : t.data()) {
      v = std::bit_cast<double>(get_u64(src));
      src += 8;
    }
    entries.erase(it);
  });
  if (!entries.empty()) {
    throw LoadError("checkpoint: unexpected tensor '" + entries.begin()->first + "'");
  }
  return cp;
}

void save_checkpoint(const std::string& path, const ModelWeights& weights, const ViTConfig& config) {
  const auto bytes = encode_checkpoint(weights, config);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const LoadError& e) {
    throw LoadError(path + ": " + e.what());
  }
}

}  // namespace vitslim
