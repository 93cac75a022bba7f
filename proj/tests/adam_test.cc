// Copyright 2026 The Splitfed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "splitfed/adam.h"

#include <cmath>
#include <limits>
#include <vector>

#include "gtest/gtest.h"
#include "splitfed/errors.h"
#include "test_util.h"

namespace splitfed {
namespace {

using testing::RandomTensor;

TEST(AdamTest, ZeroGradientLeavesParametersButCountsStep) {
  std::vector<Tensor> params{RandomTensor({3}, 1, true)};
  const std::vector<double> before(params[0].data().begin(), params[0].data().end());
  AdamState state(params);
  std::vector<std::vector<double>> grads{{0.0, 0.0, 0.0}};
  AdamStep(params, grads, state, 1e-3);
  EXPECT_EQ(state.step_count(), 1u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(params[0].data()[i], before[i]);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  std::vector<Tensor> params{Tensor({4}, {0, 0, 0, 0}, true)};
  AdamState state(params);
  const double lr = 1e-2;
  std::vector<std::vector<double>> grads{{0.5, -3.0, 1e-2, 40.0}};
  AdamStep(params, grads, state, lr);
  // m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
  for (std::size_t i = 0; i < 4; ++i) {
    const double g = grads[0][i];
    EXPECT_NEAR(params[0].data()[i], -lr * g / (std::abs(g) + 1e-8), 1e-12);
    EXPECT_NEAR(std::abs(params[0].data()[i]), lr, 1e-6);
  }
}

TEST(AdamTest, TwoStepScalarTrace) {
  std::vector<Tensor> params{Tensor({1}, {1.0}, true)};
  AdamState state(params);
  const double lr = 0.1, g1 = 0.4, g2 = -0.2;
  std::vector<std::vector<double>> grads{{g1}};
  AdamStep(params, grads, state, lr);
  grads[0][0] = g2;
  AdamStep(params, grads, state, lr);

  double w = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? g1 : g2;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    w -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
  EXPECT_NEAR(params[0].data()[0], w, 1e-15);
  EXPECT_EQ(state.step_count(), 2u);
}

TEST(AdamTest, NonFiniteGradientAbortsWithoutWriting) {
  std::vector<Tensor> params{Tensor({2}, {1.0, 2.0}, true)};
  AdamState state(params);
  std::vector<std::vector<double>> grads{
      {0.1, std::numeric_limits<double>::quiet_NaN()}};
  EXPECT_THROW(AdamStep(params, grads, state, 1e-3), NumericError);
  EXPECT_EQ(params[0].data()[0], 1.0);
  EXPECT_EQ(state.step_count(), 0u);
}

TEST(AdamTest, IdenticalRunsAreBitIdentical) {
  auto run = [] {
    std::vector<Tensor> params{RandomTensor({5}, 9, true)};
    AdamState state(params);
    Rng rng(77);
    for (int step = 0; step < 20; ++step) {
      std::vector<std::vector<double>> grads{std::vector<double>(5)};
      for (double& g : grads[0]) g = Uniform(rng, -1, 1);
      AdamStep(params, grads, state, 1e-3);
    }
    return std::vector<double>(params[0].data().begin(), params[0].data().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(AdamTest, ReadsAccumulatedGradients) {
  std::vector<Tensor> params{Tensor::Scalar(3.0, true)};
  AdamState state(params);
  Backward(Sum(Square(params[0])));
  AdamStep(params, state, 0.5);
  EXPECT_NEAR(params[0].data()[0], 2.5, 1e-7);
}

}  // namespace
}  // namespace splitfed
