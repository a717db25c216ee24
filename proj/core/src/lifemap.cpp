// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/lifemap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vitslim/errors.hpp"
#include "vitslim/image_io.hpp"
#include "vitslim/schedule.hpp"
#include "vitslim/slimming.hpp"

namespace vitslim {

LifeMap build_lifemap(const LifeVector& lives, const ViTConfig& config) {
  const SlimSchedule schedule = make_schedule(config);
  const auto n = static_cast<std::size_t>(schedule.num_patches);
  if (lives.size() != n) {
    throw ContractError("lifemap: " + std::to_string(lives.size()) + " lives for " +
                        std::to_string(schedule.num_patches) + " patches");
  }
  LifeMap m;
  m.grid = static_cast<std::size_t>(config.grid());
  m.lo = config.t_base;
  m.hi = config.layers;
  m.tau = lives.clamped(m.lo, m.hi);
  const SurvivorSets survivors = select_survivors(lives, schedule);
  for (int t : config.t_slim) {
    const int used = std::min(t + 1, config.layers);
    std::vector<bool> mask(n, false);
    for (std::size_t i : survivors.at(used)) mask[i] = true;
    m.stages.push_back(t);
    m.masks.push_back(std::move(mask));
  }
  return m;
}

std::vector<std::uint8_t> heatmap_levels(const LifeMap& map) {
  std::vector<std::uint8_t> out;
  out.reserve(map.tau.size());
  const double range = map.hi - map.lo;
  for (double v : map.tau) {
    const double u = range > 0.0 ? (v - map.lo) / range : 1.0;
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0)));
  }
  return out;
}

std::string lifemap_csv(const LifeMap& map) {
  std::ostringstream os;
  char buf[32];
  for (std::size_t r = 0; r < map.grid; ++r) {
    for (std::size_t c = 0; c < map.grid; ++c) {
      std::snprintf(buf, sizeof buf, "%.9f", map.tau[r * map.grid + c]);
      os << (c == 0 ? "" : ",") << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::vector<double> parse_lifemap_csv(const std::string& text) {
  std::vector<double> out;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw ParseError("trailing characters");
      } catch (const std::exception&) {
        throw ParseError("lifemap csv: bad cell '" + cell + "'");
      }
    }
  }
  return out;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw IoError("cannot open '" + path + "' for writing");
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw IoError("write failed for '" + path + "'");
}

void write_levels(const std::string& path, std::size_t grid, const std::vector<std::uint8_t>& levels) {
  TensorF img({grid, grid, 1});
  auto d = img.data();
  for (std::size_t i = 0; i < levels.size(); ++i) d[i] = static_cast<float>(levels[i]) / 255.0f;
  write_image(path, img);
}

}  // namespace

LifeMapFiles export_lifemap(const LifeVector& lives, const ViTConfig& config,
                            const std::string& prefix) {
  const LifeMap map = build_lifemap(lives, config);
  LifeMapFiles files;
  files.csv = prefix + "_tau.csv";
  write_text(files.csv, lifemap_csv(map));
  files.heatmap = prefix + "_tau.pgm";
  write_levels(files.heatmap, map.grid, heatmap_levels(map));
  for (std::size_t s = 0; s < map.masks.size(); ++s) {
    std::vector<std::uint8_t> levels;
    for (bool kept : map.masks[s]) levels.push_back(kept ? 255 : 0);
    files.masks.push_back(prefix + "_stage" + std::to_string(s + 1) + ".pgm");
    write_levels(files.masks.back(), map.grid, levels);
  }
  return files;
}

}  // namespace vitslim
