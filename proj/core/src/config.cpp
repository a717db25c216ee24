// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "vitslim/errors.hpp"

namespace vitslim {

using nlohmann::json;

void ViTConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (layers < 1) fail("layers must be >= 1");
  if (embed_dim < 1 || heads < 1) fail("embed_dim and heads must be >= 1");
  if (embed_dim % heads != 0) fail("embed_dim must be divisible by heads");
  if (patch < 1 || image_side < 1 || channels < 1) fail("patch, image_side and channels must be >= 1");
  if (image_side % patch != 0) fail("image_side must be divisible by patch");
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) fail("keep_rate must lie in (0, 1]");
  if (!(temperature > 0.0)) fail("temperature must be > 0");
  if (t_base < 1 || t_base > layers) fail("t_base must lie in [1, layers]");
  if (t_slim.empty() && keep_rate < 1.0) fail("keep_rate < 1 requires at least one slimming layer");
  for (std::size_t i = 0; i < t_slim.size(); ++i) {
    if (t_slim[i] <= t_base) fail("slimming layers must be > t_base");
    if (t_slim[i] > layers) fail("slimming layers must be <= layers");
    if (i > 0 && t_slim[i] <= t_slim[i - 1]) fail("slimming layers must be strictly ascending");
  }
}

void TrainConfig::validate() const {
  if (!(lr_life > 0.0) || !(lr_backbone > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(lr_finetune >= 0.0)) throw ConfigError("lr_finetune must be >= 0");
  if (batch == 0) throw ConfigError("batch must be >= 1");
  if (epochs_pretrain < 0 || epochs_stage1 < 0 || epochs_stage2 < 0) {
    throw ConfigError("epoch counts must be >= 0");
  }
}

namespace presets {

ViTConfig deit_small() { return ViTConfig{}; }

ViTConfig vit_base() {
  ViTConfig c;
  c.embed_dim = 768;
  c.heads = 12;
  return c;
}

ViTConfig toy() {
  ViTConfig c;
  c.layers = 6;
  c.embed_dim = 32;
  c.heads = 4;
  c.patch = 4;
  c.image_side = 16;
  c.channels = 1;
  c.num_classes = 4;
  c.t_base = 2;
  c.t_slim = {3, 4, 5};
  c.keep_rate = 0.7;
  return c;
}

ViTConfig micro() {
  ViTConfig c;
  c.layers = 3;
  c.embed_dim = 8;
  c.heads = 2;
  c.patch = 2;
  c.image_side = 4;
  c.channels = 1;
  c.num_classes = 3;
  c.t_base = 1;
  c.t_slim = {2, 3};
  c.keep_rate = 0.7;
  return c;
}

ViTConfig by_name(const std::string& name) {
  if (name == "deit_small") return deit_small();
  if (name == "vit_base") return vit_base();
  if (name == "toy") return toy();
  if (name == "micro") return micro();
  throw ConfigError("unknown preset '" + name + "'");
}

TrainConfig desk_train() {
  TrainConfig t;
  t.lr_life = 3e-4;
  t.lr_backbone = 1e-3;
  t.lr_finetune = 3e-4;
  t.stage2_hard = true;
  t.batch = 32;
  return t;
}

}  // namespace presets

namespace {

json vit_json(const ViTConfig& c) {
  return json{{"layers", c.layers},
              {"embed_dim", c.embed_dim},
              {"heads", c.heads},
              {"patch", c.patch},
              {"image_side", c.image_side},
              {"channels", c.channels},
              {"num_classes", c.num_classes},
              {"t_base", c.t_base},
              {"temperature", c.temperature},
              {"t_slim", c.t_slim},
              {"keep_rate", c.keep_rate},
              {"paper_literal_beta", c.beta_sign == BetaSign::kPaperLiteral},
              {"beta_after_tbase_only", c.beta_after_tbase_only}};
}

json train_json(const TrainConfig& t) {
  return json{{"lr_life", t.lr_life},
              {"lr_backbone", t.lr_backbone},
              {"lr_finetune", t.lr_finetune},
              {"stage2_hard", t.stage2_hard},
              {"batch", t.batch},
              {"epochs_pretrain", t.epochs_pretrain},
              {"epochs_stage1", t.epochs_stage1},
              {"epochs_stage2", t.epochs_stage2},
              {"seed", t.seed},
              {"adam_beta1", t.adam_beta1},
              {"adam_beta2", t.adam_beta2},
              {"adam_eps", t.adam_eps},
              {"weight_decay", t.weight_decay},
              {"convergence_rel_tol", t.convergence_rel_tol},
              {"convergence_patience", t.convergence_patience}};
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const json& j, const json& reference, const char* section) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!reference.contains(it.key())) {
      throw ConfigError(std::string("unknown key '") + it.key() + "' in " + section);
    }
  }
}

ViTConfig vit_from(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ViTConfig c;
  if (auto it = j.find("preset"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("'preset' must be a string");
    c = presets::by_name(it->get<std::string>());
  }
  json known = vit_json(c);
  known["preset"] = "";
  reject_unknown(j, known, "model config");
  read(j, "layers", c.layers);
  read(j, "embed_dim", c.embed_dim);
  read(j, "heads", c.heads);
  read(j, "patch", c.patch);
  read(j, "image_side", c.image_side);
  read(j, "channels", c.channels);
  read(j, "num_classes", c.num_classes);
  read(j, "t_base", c.t_base);
  read(j, "temperature", c.temperature);
  read(j, "t_slim", c.t_slim);
  read(j, "keep_rate", c.keep_rate);
  bool literal = false;
  read(j, "paper_literal_beta", literal);
  c.beta_sign = literal ? BetaSign::kPaperLiteral : BetaSign::kCorrected;
  read(j, "beta_after_tbase_only", c.beta_after_tbase_only);
  return c;
}

TrainConfig train_from(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig t = presets::desk_train();
  reject_unknown(j, train_json(t), "train config");
  read(j, "lr_life", t.lr_life);
  read(j, "lr_backbone", t.lr_backbone);
  read(j, "lr_finetune", t.lr_finetune);
  read(j, "stage2_hard", t.stage2_hard);
  read(j, "batch", t.batch);
  read(j, "epochs_pretrain", t.epochs_pretrain);
  read(j, "epochs_stage1", t.epochs_stage1);
  read(j, "epochs_stage2", t.epochs_stage2);
  read(j, "seed", t.seed);
  read(j, "adam_beta1", t.adam_beta1);
  read(j, "adam_beta2", t.adam_beta2);
  read(j, "adam_eps", t.adam_eps);
  read(j, "weight_decay", t.weight_decay);
  read(j, "convergence_rel_tol", t.convergence_rel_tol);
  read(j, "convergence_patience", t.convergence_patience);
  return t;
}

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config JSON: ") + e.what());
  }
}

}  // namespace

std::string to_json(const ViTConfig& config) { return vit_json(config).dump(2); }
std::string to_json(const TrainConfig& config) { return train_json(config).dump(2); }
std::string to_json(const RunConfig& config) {
  return json{{"model", vit_json(config.model)}, {"train", train_json(config.train)}}.dump(2);
}

ViTConfig vit_config_from_json(std::string_view text) { return vit_from(parse(text)); }

RunConfig run_config_from_json(std::string_view text) {
  const json j = parse(text);
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "model" && it.key() != "train") {
      throw ConfigError("unknown top-level key '" + it.key() + "'");
    }
  }
  RunConfig rc;
  rc.model = j.contains("model") ? vit_from(j.at("model")) : presets::toy();
  rc.train = j.contains("train") ? train_from(j.at("train")) : presets::desk_train();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str());
}

}  // namespace vitslim
