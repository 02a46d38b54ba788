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

#include <algorithm>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace refgame::kernels {
namespace {

bool WorthParallel(long work) {
#ifdef _OPENMP
  return work >= kParallelThreshold && !omp_in_parallel() &&
         omp_get_max_threads() > 1;
#else
  (void)work;
  return false;
#endif
}

inline std::size_t Idx(int r, int c, int ld) {
  return static_cast<std::size_t>(r) * ld + c;
}

// Eight doubles; lowered to narrower registers where AVX-512 is absent.
// Memory goes through VecMem, whose may_alias and aligned(8) make loads
// from any double* legal. Registers use plain Vec so they are not spilled.
typedef double Vec __attribute__((vector_size(64)));
typedef double VecMem __attribute__((vector_size(64), aligned(8), may_alias));
constexpr int kLanes = 8;
constexpr int kTileRows = 6;

inline Vec Load(const double* p) { return *reinterpret_cast<const VecMem*>(p); }
inline void Store(double* p, Vec v) { *reinterpret_cast<VecMem*>(p) = v; }

// C[R x NV*kLanes] stays in registers for the whole k loop. Each element
// still sums p in increasing order, like the reference.
template <int R, int NV>
inline void Tile(const double* a, int lda, const double* b, int ldb, double* c,
                 int ldc, int k) {
  Vec acc[R][NV];
  for (int r = 0; r < R; ++r) {
    for (int v = 0; v < NV; ++v) acc[r][v] = Load(c + Idx(r, v * kLanes, ldc));
  }
  for (int p = 0; p < k; ++p) {
    Vec bv[NV];
    for (int v = 0; v < NV; ++v) bv[v] = Load(b + Idx(p, v * kLanes, ldb));
#pragma GCC unroll 8
    for (int r = 0; r < R; ++r) {
      const double x = a[Idx(r, p, lda)];
#pragma GCC unroll 2
      for (int v = 0; v < NV; ++v) acc[r][v] += x * bv[v];
    }
  }
  for (int r = 0; r < R; ++r) {
    for (int v = 0; v < NV; ++v) Store(c + Idx(r, v * kLanes, ldc), acc[r][v]);
  }
}

// R consecutive rows of C += A * B.
template <int R>
void RowBlock(const double* a, const double* b, double* c, int k, int n) {
  int j = 0;
  for (; j + 2 * kLanes <= n; j += 2 * kLanes) {
    Tile<R, 2>(a, k, b + j, n, c + j, n, k);
  }
  if (j + kLanes <= n) {
    Tile<R, 1>(a, k, b + j, n, c + j, n, k);
    j += kLanes;
  }
  if (j == n) return;
  for (int r = 0; r < R; ++r) {
    double* cr = c + Idx(r, 0, n);
    for (int p = 0; p < k; ++p) {
      const double x = a[Idx(r, p, k)];
      const double* bp = b + Idx(p, 0, n);
      for (int jj = j; jj < n; ++jj) cr[jj] += x * bp[jj];
    }
  }
}

void GemmRows(const double* a, const double* b, double* c, int i, int rows,
              int k, int n) {
  a += Idx(i, 0, k);
  c += Idx(i, 0, n);
  switch (rows) {
    case 6: return RowBlock<6>(a, b, c, k, n);
    case 5: return RowBlock<5>(a, b, c, k, n);
    case 4: return RowBlock<4>(a, b, c, k, n);
    case 3: return RowBlock<3>(a, b, c, k, n);
    case 2: return RowBlock<2>(a, b, c, k, n);
    case 1: return RowBlock<1>(a, b, c, k, n);
    default: break;
  }
}

// Row-major [rows x cols] -> [cols x rows], into a per-thread buffer.
const double* Transposed(const double* x, int rows, int cols) {
  thread_local std::vector<double> buf;
  buf.resize(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) buf[Idx(c, r, rows)] = x[Idx(r, c, cols)];
  }
  return buf.data();
}

}  // namespace

void Gemm(const double* a, const double* b, double* c, int m, int k, int n) {
  const int blocks = (m + kTileRows - 1) / kTileRows;
  const bool par = WorthParallel(static_cast<long>(m) * k * n);
#pragma omp parallel for schedule(static) if (par)
  for (int blk = 0; blk < blocks; ++blk) {
    const int i = blk * kTileRows;
    GemmRows(a, b, c, i, std::min(kTileRows, m - i), k, n);
  }
}

void GemmTransB(const double* a, const double* b, double* c, int m, int k,
                int n) {
  Gemm(a, Transposed(b, n, k), c, m, k, n);
}

void GemmTransA(const double* a, const double* b, double* c, int m, int k,
                int n) {
  Gemm(Transposed(a, m, k), b, c, k, m, n);
}

void RowDot(const double* a, const double* b, double* out, int rows,
            int cols) {
  const bool par = WorthParallel(static_cast<long>(rows) * cols);
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < rows; ++r) {
    const double* ar = a + Idx(r, 0, cols);
    const double* br = b + Idx(r, 0, cols);
    double s = 0.0;
    for (int j = 0; j < cols; ++j) s += ar[j] * br[j];
    out[r] += s;
  }
}

namespace reference {

void Gemm(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += a[Idx(i, p, k)] * b[Idx(p, j, n)];
      c[Idx(i, j, n)] += s;
    }
  }
}

void GemmTransB(const double* a, const double* b, double* c, int m, int k,
                int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += a[Idx(i, p, k)] * b[Idx(j, p, k)];
      c[Idx(i, j, n)] += s;
    }
  }
}

void GemmTransA(const double* a, const double* b, double* c, int m, int k,
                int n) {
  for (int p = 0; p < k; ++p) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += a[Idx(i, p, k)] * b[Idx(i, j, n)];
      c[Idx(p, j, n)] += s;
    }
  }
}

void RowDot(const double* a, const double* b, double* out, int rows,
            int cols) {
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int j = 0; j < cols; ++j) s += a[Idx(r, j, cols)] * b[Idx(r, j, cols)];
    out[r] += s;
  }
}

}  // namespace reference
}  // namespace refgame::kernels
