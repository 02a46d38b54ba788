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

#ifndef REFGAME_KERNELS_H_
#define REFGAME_KERNELS_H_

// Dense matrix kernels behind the autodiff core. All matrices are row-major.
// Every kernel accumulates into C (C += ...); callers zero C first when they
// want plain assignment.
//
// Two implementations share one contract:
//   refgame::kernels::reference  -- plain serial loops, kept as the oracle
//   refgame::kernels             -- register-tiled, OpenMP row-parallel
// Each output element is produced by one thread with the same reduction
// order regardless of thread count, so results do not depend on
// OMP_NUM_THREADS.

namespace refgame::kernels {

// C[m x n] += A[m x k] * B[k x n]
void Gemm(const double* a, const double* b, double* c, int m, int k, int n);
// C[m x n] += A[m x k] * B[n x k]^T
void GemmTransB(const double* a, const double* b, double* c, int m, int k,
                int n);
// C[k x n] += A[m x k]^T * B[m x n]
void GemmTransA(const double* a, const double* b, double* c, int m, int k,
                int n);

// out[r] += dot(a[r, :], b[r, :]) for r in [0, rows)
void RowDot(const double* a, const double* b, double* out, int rows, int cols);

// Work (multiply-adds) below which the OpenMP kernels stay serial.
inline constexpr long kParallelThreshold = 1L << 17;

namespace reference {

void Gemm(const double* a, const double* b, double* c, int m, int k, int n);
void GemmTransB(const double* a, const double* b, double* c, int m, int k,
                int n);
void GemmTransA(const double* a, const double* b, double* c, int m, int k,
                int n);
void RowDot(const double* a, const double* b, double* out, int rows, int cols);

}  // namespace reference
}  // namespace refgame::kernels

#endif  // REFGAME_KERNELS_H_
