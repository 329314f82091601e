#pragma once

// Dense inner loops. Two implementations live side by side:
//
//   rsc::kernels::reference  plain serial loops, kept as the test oracle
//   rsc::kernels             OpenMP-parallel, cache-friendly variants
//
// Both accumulate every output element over the reduction index in the same
// ascending order, so with -ffp-contract=off they agree bit for bit. The
// parallel versions only split work across independent output rows.

#include <cstddef>
#include <vector>

namespace rsc::kernels {

// Below this many multiply-adds a parallel region costs more than it saves.
inline constexpr std::size_t kParallelWork = std::size_t{1} << 15;

namespace reference {

// C[m×n] = A[m×k] · B[k×n]
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

// C[k×n] = A[m×k]ᵀ · B[m×n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc{0};
      for (std::size_t r = 0; r < m; ++r) acc += a[r * k + i] * b[r * n + j];
      c[i * n + j] = acc;
    }
  }
}

// C[m×n] = A[m×k] · B[n×k]ᵀ
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
  }
}

// out[j] = Σ_i x[i×n + j]
template <typename T>
void column_sums(const T* x, T* out, std::size_t m, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    T acc{0};
    for (std::size_t i = 0; i < m; ++i) acc += x[i * n + j];
    out[j] = acc;
  }
}

}  // namespace reference

template <typename T>
void transpose(const T* a, T* out, std::size_t rows, std::size_t cols) {
#pragma omp parallel for if (rows * cols > kParallelWork)
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
  }
}

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  const bool par = m > 1 && m * k * n > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = T{0};
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = arow[p];
      const T* brow = b + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  const bool par = k > 1 && m * k * n > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < k; ++i) {
    T* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = T{0};
    for (std::size_t r = 0; r < m; ++r) {
      const T s = a[r * k + i];
      const T* brow = b + r * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  std::vector<T> bt(n * k);
  transpose(b, bt.data(), n, k);
  gemm(a, bt.data(), c, m, k, n);
}

template <typename T>
void column_sums(const T* x, T* out, std::size_t m, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) out[j] = T{0};
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = x + i * n;
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) out[j] += row[j];
  }
}

// out[i] = f(a[i])
template <typename T, typename F>
void map(const T* a, T* out, std::size_t n, F f) {
#pragma omp parallel for simd if (n > kParallelWork)
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i]);
}

// out[i] = f(a[i], b[i])
template <typename T, typename F>
void zip(const T* a, const T* b, T* out, std::size_t n, F f) {
#pragma omp parallel for simd if (n > kParallelWork)
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
}

}  // namespace rsc::kernels
