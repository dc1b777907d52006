// Copyright 2026 The assoc3d Authors
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

// Row-major matrix kernels shared by the dense and sparse convolutions.
// All of them accumulate into C and split work by rows of C, so the
// summation order of every element is fixed regardless of thread count.

#pragma once

#include <cstddef>

#include "assoc3d/parallel.hpp"

namespace assoc3d::kernels {

/// C[M,N] += A[M,K] * B[K,N]
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  parallel_for(
      m,
      [=](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
          double* crow = c + i * n;
          const double* arow = a + i * k;
          for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
          }
        }
      },
      4);
}

/// C[M,N] += A[M,K] * B[N,K]^T
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  parallel_for(
      m,
      [=](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
          const double* arow = a + i * k;
          for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] += acc;
          }
        }
      },
      4);
}

/// C[M,N] += A[K,M]^T * B[K,N]
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  parallel_for(
      m,
      [=](std::size_t i0, std::size_t i1) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = b + p * n;
          for (std::size_t i = i0; i < i1; ++i) {
            const double av = a[p * m + i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
          }
        }
      },
      4);
}

}  // namespace assoc3d::kernels
