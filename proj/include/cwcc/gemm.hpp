/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstddef>

namespace cwcc {

// Small dense kernels behind conv2d/dense. All operands row-major. The
// inner loops stay contiguous in B and C and the reduction blocking is
// fixed, so accumulation order is deterministic run to run.

/// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(int m, int k, int n, const T* a, const T* b, T* c) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + std::size_t(i) * k;
    const T* a1 = a0 + k;
    const T* a2 = a1 + k;
    const T* a3 = a2 + k;
    T* c0 = c + std::size_t(i) * n;
    T* c1 = c0 + n;
    T* c2 = c1 + n;
    T* c3 = c2 + n;
    for (int p = 0; p < k; ++p) {
      const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      const T* brow = b + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) {
        const T bv = brow[j];
        c0[j] += v0 * bv;
        c1[j] += v1 * bv;
        c2[j] += v2 * bv;
        c3[j] += v3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    const T* arow = a + std::size_t(i) * k;
    T* crow = c + std::size_t(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// C[k x n] += A^T * B  with A[m x k], B[m x n]
template <typename T>
void gemm_tn(int m, int k, int n, const T* a, const T* b, T* c) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + std::size_t(i) * k;
    const T* a1 = a0 + k;
    const T* a2 = a1 + k;
    const T* a3 = a2 + k;
    const T* b0 = b + std::size_t(i) * n;
    const T* b1 = b0 + n;
    const T* b2 = b1 + n;
    const T* b3 = b2 + n;
    for (int p = 0; p < k; ++p) {
      const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      T* crow = c + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += v0 * b0[j] + v1 * b1[j] + v2 * b2[j] + v3 * b3[j];
    }
  }
  for (; i < m; ++i) {
    const T* arow = a + std::size_t(i) * k;
    const T* brow = b + std::size_t(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// C[m x n] += A * B^T  with A[m x k], B[n x k]; row-by-row dot products.
template <typename T>
void gemm_nt(int m, int k, int n, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + std::size_t(i) * k;
    T* crow = c + std::size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + std::size_t(j) * k;
      T acc{};
#pragma omp simd reduction(+ : acc)
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

}  // namespace cwcc
