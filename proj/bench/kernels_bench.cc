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

// Serial reference kernels against the OpenMP kernels, at the shapes the
// agents use (batch x 64 activations, 64 x 64 weights) and larger ones.

#include <benchmark/benchmark.h>

#include <vector>

#include "refgame/kernels.h"
#include "refgame/rng.h"

namespace {

using Kernel = void (*)(const double*, const double*, double*, int, int, int);

std::vector<double> Random(std::size_t n, std::uint64_t seed) {
  refgame::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.Uniform(-1.0, 1.0);
  return v;
}

template <Kernel K>
void BM_Gemm(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const int n = static_cast<int>(state.range(2));
  const auto a = Random(static_cast<std::size_t>(m) * k, 1);
  const auto b = Random(static_cast<std::size_t>(k) * n, 2);
  std::vector<double> c(static_cast<std::size_t>(m) * n);
  for (auto _ : state) {
    K(a.data(), b.data(), c.data(), m, k, n);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(m) * k * n);
}

template <Kernel K>
void BM_GemmTransB(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const int n = static_cast<int>(state.range(2));
  const auto a = Random(static_cast<std::size_t>(m) * k, 1);
  const auto b = Random(static_cast<std::size_t>(n) * k, 2);
  std::vector<double> c(static_cast<std::size_t>(m) * n);
  for (auto _ : state) {
    K(a.data(), b.data(), c.data(), m, k, n);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(m) * k * n);
}

template <Kernel K>
void BM_GemmTransA(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const int n = static_cast<int>(state.range(2));
  const auto a = Random(static_cast<std::size_t>(m) * k, 1);
  const auto b = Random(static_cast<std::size_t>(m) * n, 2);
  std::vector<double> c(static_cast<std::size_t>(k) * n);
  for (auto _ : state) {
    K(a.data(), b.data(), c.data(), m, k, n);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(m) * k * n);
}

void Shapes(benchmark::internal::Benchmark* b) {
  b->Args({64, 64, 64})->Args({320, 64, 64})->Args({64, 597, 64})
      ->Args({512, 256, 256});
}

namespace kr = refgame::kernels;

BENCHMARK(BM_Gemm<kr::reference::Gemm>)->Name("Gemm/reference")->Apply(Shapes);
BENCHMARK(BM_Gemm<kr::Gemm>)->Name("Gemm/openmp")->Apply(Shapes);
BENCHMARK(BM_GemmTransB<kr::reference::GemmTransB>)
    ->Name("GemmTransB/reference")
    ->Apply(Shapes);
BENCHMARK(BM_GemmTransB<kr::GemmTransB>)->Name("GemmTransB/openmp")->Apply(Shapes);
BENCHMARK(BM_GemmTransA<kr::reference::GemmTransA>)
    ->Name("GemmTransA/reference")
    ->Apply(Shapes);
BENCHMARK(BM_GemmTransA<kr::GemmTransA>)->Name("GemmTransA/openmp")->Apply(Shapes);

}  // namespace

BENCHMARK_MAIN();
