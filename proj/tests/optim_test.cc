// Copyright 2026 The refgame Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "refgame/optim.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace refgame::nn {
namespace {

AgentParams OneTensor(std::vector<double> values) {
  AgentParams p;
  Tensor t(1, static_cast<int>(values.size()));
  t.data = std::move(values);
  p.tensors.emplace_back("theta", std::move(t));
  return p;
}

TEST(RmsProp, FirstStepClosedForm) {
  AgentParams p = OneTensor({1.0, -2.0, 0.5});
  p[0].grad.data = {0.2, -3.0, 0.0};
  RmsProp opt(p, {.lr = 0.01, .decay = 0.99, .eps = 1e-8});
  opt.Step(p);
  const double g[] = {0.2, -3.0, 0.0};
  const double start[] = {1.0, -2.0, 0.5};
  for (int i = 0; i < 3; ++i) {
    const double v = 0.01 * g[i] * g[i];
    EXPECT_NEAR(opt.state()[0].data[i], v, 1e-15);
    EXPECT_NEAR(p[0].value.data[i], start[i] - 0.01 * g[i] / std::sqrt(v + 1e-8),
                1e-12);
  }
}

TEST(RmsProp, SecondStepUsesDecayedAverage) {
  AgentParams p = OneTensor({0.0});
  RmsProp opt(p, {.lr = 0.1, .decay = 0.9, .eps = 1e-8});
  p[0].grad.data = {1.0};
  opt.Step(p);
  p[0].grad.data = {2.0};
  opt.Step(p);
  const double v1 = 0.1 * 1.0, v2 = 0.9 * v1 + 0.1 * 4.0;
  const double expected = -0.1 / std::sqrt(v1 + 1e-8) - 0.1 * 2.0 / std::sqrt(v2 + 1e-8);
  EXPECT_NEAR(p[0].value.data[0], expected, 1e-12);
}

TEST(RmsProp, ZeroGradientLeavesParametersUnchanged) {
  AgentParams p = OneTensor({0.3, 0.4});
  RmsProp opt(p, {});
  opt.Step(p);
  EXPECT_EQ(p[0].value.data, (std::vector<double>{0.3, 0.4}));
}

TEST(RmsProp, NonFiniteUpdateThrowsWithoutTouchingParameters) {
  AgentParams p = OneTensor({0.3, 0.4});
  p[0].grad.data = {1.0, std::numeric_limits<double>::quiet_NaN()};
  RmsProp opt(p, {});
  EXPECT_THROW(opt.Step(p), NumericError);
  EXPECT_EQ(p[0].value.data, (std::vector<double>{0.3, 0.4}));
}

TEST(RmsProp, LearningRateCanChange) {
  AgentParams p = OneTensor({0.0});
  RmsProp opt(p, {.lr = 1e-3});
  opt.set_lr(5e-4);
  EXPECT_DOUBLE_EQ(opt.lr(), 5e-4);
}

}  // namespace
}  // namespace refgame::nn
