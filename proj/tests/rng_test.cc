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


#include "refgame/rng.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <vector>

namespace refgame {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.Next();
    EXPECT_EQ(x, b.Next());
    differs |= x != c.Next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(1);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(Rng, BelowIsUnbiased) {
  Rng r(2);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) ++hist[r.Below(7)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(3);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  r.Shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Rng, CategoricalFollowsWeights) {
  Rng r(4);
  const std::vector<double> w = {0.1, 0.0, 0.6, 0.3};
  std::vector<int> hist(4, 0);
  for (int i = 0; i < 40000; ++i) ++hist[r.Categorical(w)];
  EXPECT_EQ(hist[1], 0);
  EXPECT_NEAR(hist[0] / 40000.0, 0.1, 0.01);
  EXPECT_NEAR(hist[2] / 40000.0, 0.6, 0.01);
}

TEST(Rng, ForksAreDeterministicAndDistinct) {
  Rng a(9), b(9);
  Rng fa = a.Fork(1), fb = b.Fork(1), f2 = a.Fork(2);
  EXPECT_EQ(fa.Next(), fb.Next());
  EXPECT_NE(Rng(9).Fork(1).Next(), Rng(9).Fork(2).Next());
  (void)f2;
}

}  // namespace
}  // namespace refgame
