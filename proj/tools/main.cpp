// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

// vitslim command-line tool. Every failure prints one line
// "error: <kind>: <message>" to stderr and exits nonzero.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "vitslim/checkpoint.hpp"
#include "vitslim/config.hpp"
#include "vitslim/errors.hpp"
#include "vitslim/flops.hpp"
#include "vitslim/gradcheck.hpp"
#include "vitslim/image_io.hpp"
#include "vitslim/lifemap.hpp"
#include "vitslim/schedule.hpp"
#include "vitslim/slimming.hpp"
#include "vitslim/throughput.hpp"
#include "vitslim/trainer.hpp"

namespace {

using nlohmann::json;
using namespace vitslim;

struct Overrides {
  std::string config_path;
  std::string preset;
  std::optional<double> rho;
  std::optional<double> temperature;
  std::optional<std::vector<int>> t_slim;
  std::optional<int> t_base;
  std::optional<std::uint64_t> seed;
  bool paper_literal_beta = false;
  bool beta_after_tbase_only = false;
};

void add_override_flags(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_path, "JSON run config");
  app.add_option("--preset", o.preset, "model preset: deit_small, vit_base, toy, micro");
  app.add_option("--rho", o.rho, "keep rate in (0, 1]");
  app.add_option("--temperature-u", o.temperature, "sigmoid temperature U");
  app.add_option("--t-slim", o.t_slim, "slimming layers, e.g. --t-slim 4 7 10");
  app.add_option("--t-base", o.t_base, "layer feeding the life predictor");
  app.add_option("--seed", o.seed, "random seed");
  app.add_flag("--paper-literal-beta", o.paper_literal_beta,
               "use 1/(1+exp(U(tau-t))) instead of 1/(1+exp(U(t-tau)))");
  app.add_flag("--beta-after-tbase-only", o.beta_after_tbase_only,
               "attach soft weights only after t_base during training");
}

void apply(const Overrides& o, ViTConfig& m) {
  if (o.rho) m.keep_rate = *o.rho;
  if (o.temperature) m.temperature = *o.temperature;
  if (o.t_slim) m.t_slim = *o.t_slim;
  if (o.t_base) m.t_base = *o.t_base;
  if (o.paper_literal_beta) m.beta_sign = BetaSign::kPaperLiteral;
  if (o.beta_after_tbase_only) m.beta_after_tbase_only = true;
  m.validate();
}

RunConfig resolve(const Overrides& o) {
  RunConfig rc;
  if (!o.config_path.empty()) {
    rc = load_run_config(o.config_path);
  } else {
    rc.model = presets::toy();
    rc.train = presets::desk_train();
  }
  if (!o.preset.empty()) rc.model = presets::by_name(o.preset);
  if (o.seed) rc.train.seed = *o.seed;
  apply(o, rc.model);
  rc.train.validate();
  return rc;
}

// Loads a checkpoint when given, else initialises weights from the seed.
Checkpoint model_for(const Overrides& o, const std::string& checkpoint, RunConfig& rc) {
  Checkpoint cp;
  if (!checkpoint.empty()) {
    cp = load_checkpoint(checkpoint);
    apply(o, cp.config);
    rc.model = cp.config;
  } else {
    cp.config = rc.model;
    cp.weights = init_weights(rc.model, rc.train.seed);
  }
  return cp;
}

std::size_t argmax(std::span<const float> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

// ---- schedule ----

void run_schedule(const Overrides& o) {
  const RunConfig rc = resolve(o);
  const SlimSchedule s = make_schedule(rc.model);
  json j{{"num_patches", s.num_patches}, {"layers", s.layers}, {"keep_rate", s.keep_rate},
         {"t_base", rc.model.t_base},    {"t_slim", s.t_slim},  {"counts", s.counts},
         {"mu", s.mu},                   {"sigma", s.sigma}};
  std::cout << j.dump(2) << '\n';
}

// ---- train ----

struct TrainArgs {
  std::string out;
  std::string log;
  std::string init;
  std::size_t train_count = 8000;
  std::size_t test_count = 2000;
  bool single_stage = false;
};

void run_train(const Overrides& o, const TrainArgs& a) {
  RunConfig rc = resolve(o);
  const ViTConfig& m = rc.model;
  const auto train = make_synth_dataset(rc.train.seed, a.train_count, m.grid(), m.num_classes,
                                        m.patch, m.channels);
  const auto test = make_synth_dataset(rc.train.seed + 1'000'003, a.test_count, m.grid(),
                                       m.num_classes, m.patch, m.channels);

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log, std::ios::trunc);
    if (!log) throw IoError("cannot open '" + a.log + "' for writing");
  }
  const StepSink sink = [&](const StepRecord& r) {
    if (!log.is_open()) return;
    log << json{{"step", r.step}, {"stage", r.stage}, {"loss", r.loss}, {"lr", r.lr}}.dump() << '\n';
  };

  ModelWeights w;
  if (!a.init.empty()) {
    Checkpoint cp = load_checkpoint(a.init);
    if (cp.config.layers != m.layers || cp.config.embed_dim != m.embed_dim ||
        cp.config.num_patches() != m.num_patches() || cp.config.num_classes != m.num_classes) {
      throw ConfigError("initial checkpoint shape does not match the model config");
    }
    w = std::move(cp.weights);
  } else {
    w = init_weights(m, rc.train.seed);
    pretrain_dense(w, m, train, rc.train, sink);
  }
  ViTConfig dense = m;
  dense.keep_rate = 1.0;
  const double dense_acc = evaluate_accuracy(w, dense, test);
  const double before_acc = evaluate_accuracy(w, m, test);

  const TrainReport report = a.single_stage ? train_single_stage(w, m, train, rc.train, sink)
                                            : train_two_stage(w, m, train, rc.train, sink);
  const double slim_acc = evaluate_accuracy(w, m, test);
  const double slim_dense_acc = evaluate_accuracy(w, dense, test);
  const LifeSeparation sep = life_separation(w, m, test);
  if (!a.out.empty()) save_checkpoint(a.out, w, m);

  json stages = json::array();
  for (const auto& s : report.stages) stages.push_back({{"stage", s.stage}, {"epoch_losses", s.epoch_losses}});
  json j{{"mode", a.single_stage ? "single" : "two_stage"},
         {"dense_accuracy", dense_acc},
         {"slim_accuracy_initial_predictor", before_acc},
         {"slim_accuracy", slim_acc},
         {"finetuned_dense_accuracy", slim_dense_acc},
         {"salient_mean_life", sep.salient_mean_life},
         {"other_mean_life", sep.other_mean_life},
         {"salient_mean_rank", sep.salient_mean_rank},
         {"other_mean_rank", sep.other_mean_rank},
         {"stages", stages}};
  std::cout << j.dump(2) << '\n';
}

// ---- infer ----

struct InferArgs {
  std::string checkpoint;
  std::vector<std::string> images;
  std::size_t synthetic = 0;
  std::size_t threads = 0;
};

void run_infer(const Overrides& o, const InferArgs& a) {
  RunConfig rc = resolve(o);
  const Checkpoint cp = model_for(o, a.checkpoint, rc);
  std::vector<TensorF> batch;
  std::vector<std::string> names;
  std::vector<long> truth;
  for (const auto& path : a.images) {
    batch.push_back(read_image(path, cp.config));
    names.push_back(path);
    truth.push_back(-1);
  }
  if (a.synthetic > 0) {
    const auto data = make_synth_dataset(rc.train.seed + 7, a.synthetic, cp.config.grid(),
                                         cp.config.num_classes, cp.config.patch,
                                         cp.config.channels);
    for (std::size_t i = 0; i < data.size(); ++i) {
      batch.push_back(data[i].image.cast<float>());
      names.push_back("synthetic:" + std::to_string(i));
      truth.push_back(static_cast<long>(data[i].label));
    }
  }
  if (batch.empty()) throw ContractError("infer: give image paths or --synthetic N");

  SlimEngine engine(cp.weights, cp.config);
  engine.set_threads(a.threads > 0 ? a.threads : threads_from_env());
  const TensorF logits = engine.infer(batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = logits.row(i);
    json j{{"input", names[i]}, {"label", argmax(row)},
           {"logits", std::vector<float>(row.begin(), row.end())}};
    if (truth[i] >= 0) j["truth"] = truth[i];
    std::cout << j.dump() << '\n';
  }
}

// ---- bench ----

struct BenchArgs {
  std::string checkpoint;
  std::size_t batch = 8;
  std::size_t warmup = kMinWarmupIters;
  std::size_t iters = kMinTimedIters;
  std::size_t threads = 1;
  bool flops_only = false;
  bool table = false;
};

void run_bench(const Overrides& o, const BenchArgs& a) {
  RunConfig rc = resolve(o);
  const Checkpoint cp = model_for(o, a.checkpoint, rc);
  ViTConfig dense = cp.config;
  dense.keep_rate = 1.0;
  const FlopsReport fr = count_flops(cp.config);
  const FlopsReport fd = count_flops(dense);
  const SlimOverheadReport ov = compare_slim_overhead(cp.config);
  if (a.table) std::cout << to_table(fr);

  json j{{"flops", json::parse(to_json(fr))},
         {"dense_gflops", fd.gflops()},
         {"flops_reduction", flops_reduction(fd, fr)},
         {"slim_overhead",
          {{"slimming_layers", ov.slimming_layers},
           {"baseline_flops", ov.baseline_flops},
           {"one_shot_flops", ov.one_shot_flops},
           {"ratio", ov.ratio}}}};
  if (!a.flops_only) {
    const auto images = random_images(cp.config, a.batch, rc.train.seed);
    SlimEngine base(cp.weights, dense);
    SlimEngine slim(cp.weights, cp.config);
    base.set_threads(a.threads);
    slim.set_threads(a.threads);
    const BenchReport rb = measure_throughput(base, images, a.warmup, a.iters);
    BenchReport rs = measure_throughput(slim, images, a.warmup, a.iters);
    rs.baseline_rate = rb.images_per_second;
    j["throughput"] = json::parse(to_json(rs));
  }
  std::cout << j.dump(2) << '\n';
}

// ---- lifemap ----

struct LifemapArgs {
  std::string checkpoint;
  std::string image;
  std::string prefix = "lifemap";
  std::size_t synthetic_index = 0;
};

void run_lifemap(const Overrides& o, const LifemapArgs& a) {
  RunConfig rc = resolve(o);
  const Checkpoint cp = model_for(o, a.checkpoint, rc);
  TensorF img;
  if (!a.image.empty()) {
    img = read_image(a.image, cp.config);
  } else {
    const auto data = make_synth_dataset(rc.train.seed + 7, a.synthetic_index + 1, cp.config.grid(),
                                         cp.config.num_classes, cp.config.patch,
                                         cp.config.channels);
    img = data.back().image.cast<float>();
  }
  if (cp.config.t_slim.empty()) throw ConfigError("lifemap: the schedule has no slimming layers");
  SlimEngine engine(cp.weights, cp.config);
  const SlimResult r = engine.run(std::span<const TensorF>(&img, 1));
  const LifeMapFiles files = export_lifemap(r.lives.front(), cp.config, a.prefix);
  json j{{"csv", files.csv}, {"heatmap", files.heatmap}, {"masks", files.masks}};
  std::cout << j.dump(2) << '\n';
}

// ---- gradcheck ----

struct GradcheckArgs {
  std::size_t batch = 2;
  double tolerance = 1e-4;
};

int run_gradcheck(const Overrides& o, const GradcheckArgs& a) {
  RunConfig rc;
  if (o.config_path.empty() && o.preset.empty()) {
    rc.model = presets::micro();
    rc.train = presets::desk_train();
    if (o.seed) rc.train.seed = *o.seed;
    apply(o, rc.model);
  } else {
    rc = resolve(o);
  }
  const ViTConfig& m = rc.model;
  const ModelWeights w = init_weights(m, rc.train.seed);
  const auto data = make_synth_dataset(rc.train.seed, a.batch, m.grid(), m.num_classes, m.patch,
                                       m.channels);
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const TrainBatch batch = make_batch(m, data, idx);
  GradCheckOptions opts;
  opts.tolerance = a.tolerance;

  bool ok = true;
  std::printf("%-24s %8s %12s %12s %6s\n", "parameter", "entries", "rel_error", "max_abs", "pass");
  for (ParamGroup g : {ParamGroup::kLifePredictor, ParamGroup::kBackbone}) {
    for (const auto& e : check_model_gradients(w, m, batch, g, beta_policy(m), opts)) {
      ok = ok && e.passed;
      std::printf("%-24s %8zu %12.3e %12.3e %6s\n", e.name.c_str(), e.checked, e.rel_error,
                  e.max_abs_error, e.passed ? "yes" : "NO");
    }
  }
  if (!ok) throw NumericError("gradient check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vitslim: one-shot life prediction for vision transformer patch slimming"};
  app.require_subcommand(1);

  Overrides o;
  auto* schedule = app.add_subcommand("schedule", "print per-layer patch counts and life moments");
  add_override_flags(*schedule, o);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "dense pre-training then two-stage fine-tuning");
  add_override_flags(*train, o);
  train->add_option("--out", ta.out, "checkpoint to write");
  train->add_option("--log", ta.log, "JSONL step log");
  train->add_option("--init", ta.init, "start from this checkpoint instead of pre-training");
  train->add_option("--train-count", ta.train_count, "synthetic training images");
  train->add_option("--test-count", ta.test_count, "synthetic test images");
  train->add_flag("--single-stage", ta.single_stage, "train predictor and backbone jointly");

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "batch inference, one JSON line per image");
  add_override_flags(*infer, o);
  infer->add_option("--checkpoint", ia.checkpoint, "model checkpoint");
  infer->add_option("--synthetic", ia.synthetic, "append N synthetic images");
  infer->add_option("--threads", ia.threads, "worker threads (default VITSLIM_THREADS or 1)");
  infer->add_option("images", ia.images, "PGM/PPM images");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "FLOPs and throughput reports");
  add_override_flags(*bench, o);
  bench->add_option("--checkpoint", ba.checkpoint, "model checkpoint");
  bench->add_option("--batch", ba.batch, "images per batch");
  bench->add_option("--warmup", ba.warmup, "discarded iterations (>= 3)");
  bench->add_option("--iters", ba.iters, "timed iterations (>= 10)");
  bench->add_option("--threads", ba.threads, "worker threads");
  bench->add_flag("--flops-only", ba.flops_only, "skip the throughput measurement");
  bench->add_flag("--table", ba.table, "also print the per-layer FLOPs table");

  LifemapArgs la;
  auto* lifemap = app.add_subcommand("lifemap", "export life heatmap, CSV and keep masks");
  add_override_flags(*lifemap, o);
  lifemap->add_option("--checkpoint", la.checkpoint, "model checkpoint");
  lifemap->add_option("--image", la.image, "PGM/PPM image (default: a synthetic sample)");
  lifemap->add_option("--synthetic-index", la.synthetic_index, "which synthetic sample");
  lifemap->add_option("--prefix", la.prefix, "output path prefix");

  GradcheckArgs ga;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_override_flags(*gradcheck, o);
  gradcheck->add_option("--batch", ga.batch, "images in the checked batch");
  gradcheck->add_option("--tolerance", ga.tolerance, "relative error bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  }

  try {
    if (*schedule) run_schedule(o);
    if (*train) run_train(o, ta);
    if (*infer) run_infer(o, ia);
    if (*bench) run_bench(o, ba);
    if (*lifemap) run_lifemap(o, la);
    if (*gradcheck) return run_gradcheck(o, ga);
  } catch (const vitslim::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
