/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/
#pragma once

// Fixed-order matrix kernels.
//
// Every output element is produced by one fused multiply-add chain that walks
// the contraction index in strictly ascending order.  The result for a given
// element therefore depends only on its own operand row/column, never on tile
// shape, matrix size, or how examples were batched together.  That property is
// what makes feature extraction bit-reproducible: re-running one example alone
// yields the same bytes it produced inside a batch.
//
// std::fma is spelled out so the chain is contracted identically in the tiled
// kernels, the edge paths, and the reference implementation tests compare
// against.

#include <cmath>
#include <cstddef>

namespace nrf {

namespace detail {

inline constexpr int kGemmRows = 4;   // register tile height
inline constexpr int kGemmCols = 32;  // register tile width (floats)

/// Full 4 x 32 register tile, accumulation type AccT (float or double).
template <typename AccT>
inline void gemm_tile_full(const float* a, const float* b, float* c, std::size_t K,
                           std::size_t ldb, std::size_t ldc) {
  AccT acc0[kGemmCols] = {};
  AccT acc1[kGemmCols] = {};
  AccT acc2[kGemmCols] = {};
  AccT acc3[kGemmCols] = {};
  for (std::size_t k = 0; k < K; ++k) {
    const AccT a0 = static_cast<AccT>(a[k]);
    const AccT a1 = static_cast<AccT>(a[K + k]);
    const AccT a2 = static_cast<AccT>(a[2 * K + k]);
    const AccT a3 = static_cast<AccT>(a[3 * K + k]);
    const float* brow = b + k * ldb;
    for (int j = 0; j < kGemmCols; ++j) {
      const AccT bv = static_cast<AccT>(brow[j]);
      acc0[j] = std::fma(a0, bv, acc0[j]);
      acc1[j] = std::fma(a1, bv, acc1[j]);
      acc2[j] = std::fma(a2, bv, acc2[j]);
      acc3[j] = std::fma(a3, bv, acc3[j]);
    }
  }
  for (int j = 0; j < kGemmCols; ++j) c[j] = static_cast<float>(acc0[j]);
  for (int j = 0; j < kGemmCols; ++j) c[ldc + j] = static_cast<float>(acc1[j]);
  for (int j = 0; j < kGemmCols; ++j) c[2 * ldc + j] = static_cast<float>(acc2[j]);
  for (int j = 0; j < kGemmCols; ++j) c[3 * ldc + j] = static_cast<float>(acc3[j]);
}

/// Ragged edge tile; identical per-element operation sequence.
template <typename AccT>
inline void gemm_tile_edge(const float* a, const float* b, float* c, std::size_t K,
                           std::size_t ldb, std::size_t ldc, int rows, int cols) {
  AccT acc[kGemmRows][kGemmCols] = {};
  for (std::size_t k = 0; k < K; ++k) {
    const float* brow = b + k * ldb;
    for (int r = 0; r < rows; ++r) {
      const AccT av = static_cast<AccT>(a[static_cast<std::size_t>(r) * K + k]);
      for (int j = 0; j < cols; ++j) {
        acc[r][j] = std::fma(av, static_cast<AccT>(brow[j]), acc[r][j]);
      }
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < cols; ++j) {
      c[static_cast<std::size_t>(r) * ldc + j] = static_cast<float>(acc[r][j]);
    }
  }
}

}  // namespace detail

/// C (M x N) = A (M x K) . B (K x N), all row-major and densely packed.
/// AccT selects the accumulator width; float is the default path and double
/// is available for numerically sensitive extractions.
template <typename AccT = float>
inline void gemm(const float* a, const float* b, float* c, std::size_t M, std::size_t K,
                 std::size_t N) {
  for (std::size_t i0 = 0; i0 < M; i0 += detail::kGemmRows) {
    const int rows = static_cast<int>(
        M - i0 < detail::kGemmRows ? M - i0 : static_cast<std::size_t>(detail::kGemmRows));
    for (std::size_t j0 = 0; j0 < N; j0 += detail::kGemmCols) {
      const int cols = static_cast<int>(
          N - j0 < detail::kGemmCols ? N - j0 : static_cast<std::size_t>(detail::kGemmCols));
      const float* a_tile = a + i0 * K;
      const float* b_tile = b + j0;
      float* c_tile = c + i0 * N + j0;
      if (rows == detail::kGemmRows && cols == detail::kGemmCols) {
        detail::gemm_tile_full<AccT>(a_tile, b_tile, c_tile, K, N, N);
      } else {
        detail::gemm_tile_edge<AccT>(a_tile, b_tile, c_tile, K, N, N, rows, cols);
      }
    }
  }
}

/// Reference implementation with the same per-element contract, used by tests
/// to pin the kernels bit-for-bit.
template <typename AccT = float>
inline void gemm_reference(const float* a, const float* b, float* c, std::size_t M,
                           std::size_t K, std::size_t N) {
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      AccT acc = AccT(0);
      for (std::size_t k = 0; k < K; ++k) {
        acc = std::fma(static_cast<AccT>(a[i * K + k]), static_cast<AccT>(b[k * N + j]), acc);
      }
      c[i * N + j] = static_cast<float>(acc);
    }
  }
}

/// Double-precision dot product of two float vectors, ascending index, fused.
inline double dot_f64(const float* a, const float* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc = std::fma(static_cast<double>(a[i]), static_cast<double>(b[i]), acc);
  }
  return acc;
}

/// Single-precision dot product, ascending index, fused.
inline float dot_f32(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    acc = std::fma(a[i], b[i], acc);
  }
  return acc;
}

/// y += alpha * x over doubles with float source, ascending index.
inline void axpy_f64(double* y, double alpha, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::fma(alpha, static_cast<double>(x[i]), y[i]);
  }
}

/// Dot product of two double vectors, ascending index, fused.
inline double dot_d(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc = std::fma(a[i], b[i], acc);
  }
  return acc;
}

}  // namespace nrf
