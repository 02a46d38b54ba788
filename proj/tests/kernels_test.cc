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


#include "refgame/kernels.h"

#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>

#include <vector>

#include "refgame/rng.h"

namespace refgame::kernels {
namespace {

std::vector<double> Random(std::size_t n, Rng& rng, double zero_frac = 0.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.Uniform() < zero_frac ? 0.0 : rng.Uniform(-1, 1);
  return v;
}

struct Dims {
  int m, k, n;
};

class KernelAgreement : public ::testing::TestWithParam<Dims> {};

void ExpectClose(const std::vector<double>& x, const std::vector<double>& y) {
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(x[i], y[i], 1e-12 * (1.0 + std::abs(y[i]))) << "at " << i;
  }
}

// Large shapes cross the parallel threshold. The fast kernels sum in a
// different order from the reference, so agreement is to rounding.
TEST_P(KernelAgreement, MatchesReference) {
  const auto [m, k, n] = GetParam();
  Rng rng(m * 1000 + k * 10 + n);
  const auto a = Random(static_cast<std::size_t>(m) * k, rng, 0.3);
  const auto b = Random(static_cast<std::size_t>(k) * n, rng);
  const auto bt = Random(static_cast<std::size_t>(n) * k, rng);
  const auto am = Random(static_cast<std::size_t>(m) * n, rng);
  const auto seed_c = Random(static_cast<std::size_t>(m) * n, rng);

  auto c1 = seed_c, c2 = seed_c;
  Gemm(a.data(), b.data(), c1.data(), m, k, n);
  reference::Gemm(a.data(), b.data(), c2.data(), m, k, n);
  ExpectClose(c1, c2);

  c1 = seed_c, c2 = seed_c;
  GemmTransB(a.data(), bt.data(), c1.data(), m, k, n);
  reference::GemmTransB(a.data(), bt.data(), c2.data(), m, k, n);
  ExpectClose(c1, c2);

  std::vector<double> t1(static_cast<std::size_t>(k) * n, 0.5), t2 = t1;
  GemmTransA(a.data(), am.data(), t1.data(), m, k, n);
  reference::GemmTransA(a.data(), am.data(), t2.data(), m, k, n);
  ExpectClose(t1, t2);

  std::vector<double> r1(m, 1.0), r2 = r1;
  RowDot(a.data(), a.data(), r1.data(), m, k);
  reference::RowDot(a.data(), a.data(), r2.data(), m, k);
  ExpectClose(r1, r2);
}

INSTANTIATE_TEST_SUITE_P(Shapes, KernelAgreement,
                         ::testing::Values(Dims{1, 1, 1}, Dims{3, 5, 2},
                                           Dims{64, 64, 64}, Dims{320, 64, 30},
                                           Dims{257, 131, 97},
                                           Dims{600, 300, 200}));

TEST(Kernels, ReferenceGemmKnownValues) {
  const double a[] = {1, 2, 3, 4, 5, 6};       // 2x3
  const double b[] = {7, 8, 9, 10, 11, 12};    // 3x2
  double c[] = {1, 1, 1, 1};
  reference::Gemm(a, b, c, 2, 3, 2);
  EXPECT_DOUBLE_EQ(c[0], 1 + 58);
  EXPECT_DOUBLE_EQ(c[1], 1 + 64);
  EXPECT_DOUBLE_EQ(c[2], 1 + 139);
  EXPECT_DOUBLE_EQ(c[3], 1 + 154);
}

TEST(Kernels, IndependentOfThreadCount) {
  Rng rng(4);
  const int m = 512, k = 256, n = 128;
  const auto a = Random(static_cast<std::size_t>(m) * k, rng);
  const auto b = Random(static_cast<std::size_t>(k) * n, rng);
  std::vector<double> one(static_cast<std::size_t>(m) * n), many = one;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  Gemm(a.data(), b.data(), one.data(), m, k, n);
  omp_set_num_threads(4);
  Gemm(a.data(), b.data(), many.data(), m, k, n);
  omp_set_num_threads(saved);
  EXPECT_EQ(one, many);
}

}  // namespace
}  // namespace refgame::kernels
