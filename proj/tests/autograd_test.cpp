// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vitslim/autograd.hpp"
#include "vitslim/errors.hpp"
#include "vitslim/gradcheck.hpp"

namespace vitslim {
namespace {

TEST(Backward, SumGivesOnes) {
  ag::Tape tape;
  const auto x = tape.leaf(TensorD::vector({1, -2, 3}));
  tape.backward(ag::sum(tape, x));
  EXPECT_EQ(tape.grad(x), TensorD::vector({1, 1, 1}));
}

TEST(Backward, SquareGivesTwoX) {
  ag::Tape tape;
  const auto x = tape.leaf(TensorD::vector({2}));
  tape.backward(ag::sum(tape, ag::mul(tape, x, x)));
  EXPECT_DOUBLE_EQ(tape.grad(x).data()[0], 4.0);
}

TEST(Backward, NonScalarLossThrows) {
  ag::Tape tape;
  const auto x = tape.leaf(TensorD::vector({1, 2}));
  EXPECT_THROW(tape.backward(ag::scale(tape, x, 2.0)), ContractError);
}

TEST(Backward, UnusedLeafGetsZeros) {
  ag::Tape tape;
  const auto x = tape.leaf(TensorD::vector({1, 2}));
  const auto unused = tape.leaf(TensorD::vector({5, 6, 7}));
  tape.backward(ag::sum(tape, x));
  EXPECT_EQ(tape.grad(unused), TensorD({3}, 0.0));
}

TEST(Backward, ConstantsRecordNoGradient) {
  ag::Tape tape;
  const auto c = tape.constant(TensorD::vector({1, 2}));
  const auto y = ag::scale(tape, c, 3.0);
  EXPECT_FALSE(tape.requires_grad(y));
}

struct Case {
  std::vector<TensorD> inputs;
  ag::Var out;
};

// Contracts every output with fixed random weights so no gradient is
// structurally zero (e.g. softmax rows sum to one).
ag::Var project(ag::Tape& tape, ag::Var y, std::uint64_t seed) {
  Rng rng(seed);
  const TensorD& v = tape.value(y);
  const auto r = tape.constant(rng.uniform_tensor(v.shape(), -1.0, 1.0));
  return ag::sum(tape, ag::mul(tape, y, r));
}

void expect_fd(const TapeFunction& fn, std::vector<TensorD> inputs, double tol = 1e-5) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < inputs.size(); ++i) names.push_back("input" + std::to_string(i));
  GradCheckOptions opts;
  opts.step = 1e-5;
  for (const auto& e : check_gradients(fn, std::move(inputs), names, opts)) {
    EXPECT_LE(e.max_elementwise_error, tol) << e.name;
  }
}

class PrimitiveGradients : public ::testing::Test {
 protected:
  TensorD rand(std::size_t r, std::size_t c) { return rng_.uniform_tensor({r, c}, -2.0, 2.0); }
  TensorD rand(std::size_t n) { return rng_.uniform_tensor({n}, -2.0, 2.0); }
  Rng rng_{11};
};

TEST_F(PrimitiveGradients, Matmul) {
  expect_fd([](ag::Tape& t, auto v) { return project(t, ag::matmul(t, v[0], v[1]), 1); },
            {rand(3, 4), rand(4, 2)});
}

TEST_F(PrimitiveGradients, AddBiasAndMul) {
  expect_fd(
      [](ag::Tape& t, auto v) {
        return project(t, ag::mul(t, ag::add_bias(t, v[0], v[1]), v[2]), 2);
      },
      {rand(3, 4), rand(4), rand(3, 4)});
}

TEST_F(PrimitiveGradients, Gelu) {
  expect_fd([](ag::Tape& t, auto v) { return project(t, ag::gelu(t, v[0]), 3); }, {rand(4, 5)});
}

TEST_F(PrimitiveGradients, Softmax) {
  expect_fd([](ag::Tape& t, auto v) { return project(t, ag::softmax_rows(t, v[0]), 4); },
            {rand(3, 6)});
}

TEST_F(PrimitiveGradients, LayerNorm) {
  expect_fd(
      [](ag::Tape& t, auto v) { return project(t, ag::layer_norm(t, v[0], v[1], v[2]), 5); },
      {rand(4, 6), rand(6), rand(6)});
}

TEST_F(PrimitiveGradients, WeightedAttention) {
  TensorD beta = rng_.uniform_tensor({2 * 5}, 0.1, 1.0);
  expect_fd(
      [](ag::Tape& t, auto v) {
        return project(t, ag::attention(t, v[0], v[1], v[2], v[3], 2, 5, 2), 6);
      },
      {rand(10, 4), rand(10, 4), rand(10, 4), beta});
}

TEST_F(PrimitiveGradients, AssembleAndGather) {
  expect_fd(
      [](ag::Tape& t, auto v) {
        const auto x = ag::assemble_tokens(t, v[0], v[1], v[2], 2);
        return project(t, ag::gather_rows(t, x, {0, 2, 3, 5, 5}), 7);
      },
      {rand(6, 3), rand(3), rand(4, 3)});
}

TEST_F(PrimitiveGradients, CrossEntropy) {
  const std::vector<std::size_t> labels = {2, 0, 1};
  expect_fd([&](ag::Tape& t, auto v) { return ag::cross_entropy(t, v[0], labels); },
            {rand(3, 4)});
}

TEST_F(PrimitiveGradients, BilinearScore) {
  expect_fd(
      [](ag::Tape& t, auto v) { return project(t, ag::bilinear_cls_score(t, v[0], v[1], 2, 4), 8); },
      {rand(8, 3), rand(3, 3)});
}

TEST_F(PrimitiveGradients, Renormalize) {
  expect_fd(
      [](ag::Tape& t, auto v) { return project(t, ag::renormalize_rows(t, v[0], 6.0, 1.5, 1e-6), 9); },
      {rand(3, 5)});
}

TEST_F(PrimitiveGradients, SigmoidWeights) {
  TensorD lives = rng_.uniform_tensor({2, 4}, 0.0, 6.0);
  expect_fd(
      [](ag::Tape& t, auto v) {
        return project(t, ag::sigmoid_beta(t, v[0], 3.0, 1.5, false), 10);
      },
      {lives});
  expect_fd(
      [](ag::Tape& t, auto v) {
        return project(t, ag::sigmoid_beta(t, v[0], 3.0, 1.5, true), 10);
      },
      {lives});
}

TEST_F(PrimitiveGradients, TwoLayerMlp) {
  const std::vector<std::size_t> labels = {1, 0, 2, 1};
  GradCheckOptions opts;
  opts.step = 1e-5;
  const std::vector<std::string> names = {"x", "w1", "b1", "w2", "b2"};
  const auto results = check_gradients(
      [&](ag::Tape& t, auto v) {
        const auto h = ag::gelu(t, ag::linear(t, v[0], v[1], v[2]));
        return ag::cross_entropy(t, ag::linear(t, h, v[3], v[4]), labels);
      },
      {rand(4, 5), rand(5, 6), rand(6), rand(6, 3), rand(3)}, names, opts);
  for (const auto& e : results) EXPECT_LE(e.rel_error, 1e-6) << e.name;
}

}  // namespace
}  // namespace vitslim
