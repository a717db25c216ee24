// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitslim/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "vitslim/errors.hpp"
#include "vitslim/schedule.hpp"

namespace vitslim {

namespace {

GradCheckEntry compare(const std::string& name, const TensorD& analytic,
                       const std::vector<double>& numeric, const GradCheckOptions& options) {
  GradCheckEntry e;
  e.name = name;
  e.checked = numeric.size();
  double diff2 = 0.0;
  double a2 = 0.0;
  double n2 = 0.0;
  const auto a = analytic.data();
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double d = a[i] - numeric[i];
    diff2 += d * d;
    a2 += a[i] * a[i];
    n2 += numeric[i] * numeric[i];
    e.max_abs_error = std::max(e.max_abs_error, std::abs(d));
    e.max_elementwise_error =
        std::max(e.max_elementwise_error, std::abs(d) / (std::abs(a[i]) + 1e-8));
  }
  e.analytic_norm = std::sqrt(a2);
  const double scale = std::sqrt(std::max(a2, n2));
  if (scale < options.zero_norm) {
    e.rel_error = 0.0;
    e.passed = std::sqrt(diff2) < options.zero_norm;
  } else {
    e.rel_error = std::sqrt(diff2) / scale;
    e.passed = e.rel_error <= options.tolerance;
  }
  return e;
}

}  // namespace

std::vector<GradCheckEntry> check_gradients(const TapeFunction& fn, std::vector<TensorD> inputs,
                                            std::span<const std::string> names,
                                            const GradCheckOptions& options) {
  if (names.size() != inputs.size()) throw ContractError("check_gradients: one name per input");
  auto evaluate = [&](bool with_grad, std::vector<TensorD>* grads) {
    ag::Tape tape;
    std::vector<ag::Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.leaf(x, with_grad));
    const ag::Var out = fn(tape, vars);
    if (tape.value(out).size() != 1) throw ContractError("check_gradients: function must be scalar");
    if (grads != nullptr) {
      tape.backward(out);
      for (const auto& v : vars) grads->push_back(tape.grad(v));
    }
    return tape.value(out).data()[0];
  };

  std::vector<TensorD> analytic;
  evaluate(true, &analytic);
  std::vector<GradCheckEntry> out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> numeric;
    auto data = inputs[k].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + options.step;
      const double up = evaluate(false, nullptr);
      data[i] = orig - options.step;
      const double down = evaluate(false, nullptr);
      data[i] = orig;
      numeric.push_back((up - down) / (2.0 * options.step));
    }
    out.push_back(compare(names[k], analytic[k], numeric, options));
  }
  return out;
}

std::vector<GradCheckEntry> check_model_gradients(const ModelWeights& weights,
                                                  const ViTConfig& config, const TrainBatch& batch,
                                                  ParamGroup group, BetaPolicy policy,
                                                  const GradCheckOptions& options) {
  validate_weights(weights, config);
  const SlimSchedule schedule = make_schedule(config);
  const bool backbone = group == ParamGroup::kBackbone;
  ModelWeights w = weights;

  auto loss_of = [&](bool with_grad) {
    ag::Tape tape;
    const ParamVars vars = bind_params(tape, w, with_grad && backbone, with_grad && !backbone);
    const GraphOutput g = build_forward(tape, vars, config, schedule, batch, policy);
    return std::make_pair(std::move(tape), std::make_pair(vars, g.loss));
  };

  auto [tape, bound] = loss_of(true);
  tape.backward(bound.second);
  std::vector<TensorD> analytic;
  bound.first.visit([&](const std::string&, const ag::Var& v, ParamGroup g) {
    if (g == group) analytic.push_back(tape.grad(v));
  });

  std::vector<GradCheckEntry> out;
  std::size_t k = 0;
  w.visit([&](const std::string& name, TensorD& p, ParamGroup g) {
    if (g != group) return;
    std::vector<double> numeric;
    auto data = p.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + options.step;
      auto up = loss_of(false);
      const double lu = up.first.value(up.second.second).data()[0];
      data[i] = orig - options.step;
      auto down = loss_of(false);
      const double ld = down.first.value(down.second.second).data()[0];
      data[i] = orig;
      numeric.push_back((lu - ld) / (2.0 * options.step));
    }
    out.push_back(compare(name, analytic[k++], numeric, options));
  });
  return out;
}

}  // namespace vitslim
