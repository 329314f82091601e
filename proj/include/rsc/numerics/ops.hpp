#pragma once

// Pure tensor arithmetic. Every function validates shapes, computes a fresh
// result and rejects non-finite output with NonFiniteResult.
//
// Broadcasting rule for the binary elementwise ops (add, sub, mul):
//   * equal shapes combine elementwise;
//   * a right operand with a single element acts as a scalar;
//   * a right operand of shape [n] or [1×n] is added to every row of a left
//     operand whose trailing extent is n.
// Anything else is a ShapeMismatch. Broadcasting is one-sided: the left
// operand always determines the result shape.

#include <cmath>
#include <string>

#include "rsc/numerics/kernels.hpp"
#include "rsc/numerics/tensor.hpp"

namespace rsc::ops {

enum class Broadcast { kSame, kScalar, kRow };

template <typename T>
Broadcast broadcast_kind(const BasicTensor<T>& a, const BasicTensor<T>& b,
                         const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalar;
  const bool row_like = b.rank() == 1 || (b.rank() == 2 && b.dim(0) == 1);
  if (row_like && b.cols() == a.cols()) return Broadcast::kRow;
  throw ShapeMismatch(std::string(op) + ": cannot broadcast " +
                      shape_str(b.shape()) + " onto " + shape_str(a.shape()));
}

template <typename T, typename F>
BasicTensor<T> broadcast_zip(const BasicTensor<T>& a, const BasicTensor<T>& b,
                             const char* op, F f) {
  const Broadcast kind = broadcast_kind(a, b, op);
  BasicTensor<T> out(a.shape());
  const std::size_t n = a.size();
  switch (kind) {
    case Broadcast::kSame:
      kernels::zip(a.data(), b.data(), out.data(), n, f);
      break;
    case Broadcast::kScalar: {
      const T s = b[0];
      kernels::map(a.data(), out.data(), n, [&](T x) { return f(x, s); });
      break;
    }
    case Broadcast::kRow: {
      const std::size_t cols = a.cols();
      for (std::size_t r = 0; r < a.rows(); ++r) {
        kernels::zip(a.data() + r * cols, b.data(), out.data() + r * cols, cols, f);
      }
      break;
    }
  }
  require_finite(out, op);
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return broadcast_zip(a, b, "add", [](T x, T y) { return x + y; });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return broadcast_zip(a, b, "sub", [](T x, T y) { return x - y; });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return broadcast_zip(a, b, "mul", [](T x, T y) { return x * y; });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  BasicTensor<T> out(a.shape());
  kernels::map(a.data(), out.data(), a.size(), [s](T x) { return x * s; });
  require_finite(out, "scale");
  return out;
}

// a[m×k] · b[k×n]. A rank-1 right operand is treated as a column vector and
// the result is rank-1 of length m.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1)) {
    throw ShapeMismatch("matmul expects a matrix on the left, got " +
                        shape_str(a.shape()) + " · " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1);
  const std::size_t bk = b.dim(0);
  const std::size_t n = b.rank() == 2 ? b.dim(1) : 1;
  if (k != bk) {
    throw ShapeMismatch("matmul inner dimensions " + shape_str(a.shape()) +
                        " · " + shape_str(b.shape()));
  }
  BasicTensor<T> out(b.rank() == 2 ? Shape{m, n} : Shape{m});
  kernels::gemm(a.data(), b.data(), out.data(), m, k, n);
  require_finite(out, "matmul");
  return out;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  if (a.rank() != 2) throw ShapeMismatch("transpose expects a matrix");
  BasicTensor<T> out({a.dim(1), a.dim(0)});
  kernels::transpose(a.data(), out.data(), a.dim(0), a.dim(1));
  return out;
}

// Repeats a row vector [n] into [rows×n].
template <typename T>
BasicTensor<T> broadcast_rows(const BasicTensor<T>& row, std::size_t rows) {
  BasicTensor<T> out({rows, row.size()});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(row.data(), row.data() + row.size(), out.data() + r * row.size());
  }
  return out;
}

template <typename T>
T sum(const BasicTensor<T>& a) {
  T acc{0};
  for (T v : a.values()) acc += v;
  if (!std::isfinite(acc)) throw NonFiniteResult("sum overflowed");
  return acc;
}

template <typename T>
T mean(const BasicTensor<T>& a) {
  return sum(a) / static_cast<T>(a.size());
}

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& a, T slope) {
  BasicTensor<T> out(a.shape());
  kernels::map(a.data(), out.data(), a.size(),
               [slope](T x) { return x > T{0} ? x : slope * x; });
  return out;
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& a) {
  BasicTensor<T> out(a.shape());
  kernels::map(a.data(), out.data(), a.size(), [](T x) { return std::tanh(x); });
  return out;
}

// Per-column mean over the rows of a matrix.
template <typename T>
BasicTensor<T> column_mean(const BasicTensor<T>& a) {
  BasicTensor<T> out({a.cols()});
  kernels::column_sums(a.data(), out.data(), a.rows(), a.cols());
  const T inv = T{1} / static_cast<T>(a.rows());
  for (T& v : out.values()) v *= inv;
  return out;
}

// Per-column biased (1/N) variance, the statistic batch-norm normalizes by.
template <typename T>
BasicTensor<T> column_variance(const BasicTensor<T>& a, const BasicTensor<T>& mu) {
  const std::size_t rows = a.rows(), cols = a.cols();
  if (mu.size() != cols) throw ShapeMismatch("column_variance: mean length");
  BasicTensor<T> out({cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const T d = a[r * cols + c] - mu[c];
      out[c] += d * d;
    }
  }
  const T inv = T{1} / static_cast<T>(rows);
  for (T& v : out.values()) v *= inv;
  require_finite(out, "column_variance");
  return out;
}

}  // namespace rsc::ops
