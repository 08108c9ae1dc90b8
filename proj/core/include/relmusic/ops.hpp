// SPDX-License-Identifier: Apache-2.0
//
// Dense kernels over BasicTensor. Every dot product accumulates in ascending
// index order starting from zero, so results are reproducible bit for bit and
// can be compared against scalar reference loops.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "relmusic/tensor.hpp"

namespace relmusic {

namespace detail {

inline void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(shape));
  }
}

}  // namespace detail

namespace detail {

/// c[m×n] += a[m×k] · b[k×n], all row-major. Every c[i][j] accumulates
/// a[i][p] * b[p][j] for p = 0, 1, ..., k-1 in that order; four rows of a
/// share each pass over a row of b.
template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + i * k;
    const T* a1 = a0 + k;
    const T* a2 = a1 + k;
    const T* a3 = a2 + k;
    T* c0 = c + i * n;
    T* c1 = c0 + n;
    T* c2 = c1 + n;
    T* c3 = c2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const T s0 = a0[p], s1 = a1[p], s2 = a2[p], s3 = a3[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const T bj = brow[j];
        c0[j] += s0 * bj;
        c1[j] += s1 * bj;
        c2[j] += s2 * bj;
        c3[j] += s3 * bj;
      }
    }
  }
  for (; i < m; ++i) {
    const T* arow = a + i * k;
    T* out = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) out[j] += s * brow[j];
    }
  }
}

template <typename T>
void transpose_into(const T* src, std::size_t rows, std::size_t cols, T* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

}  // namespace detail

/// a[M×K] · b[K×N].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_rank(a.shape(), 2, "matmul");
  detail::require_rank(b.shape(), 2, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  BasicTensor<T> c({m, n});
  detail::gemm_accumulate(m, n, k, a.data(), b.data(), c.data());
  return c;
}

/// a[M×K] · b[N×K]ᵀ.
template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_rank(a.shape(), 2, "matmul_nt");
  detail::require_rank(b.shape(), 2, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner extents differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
  }
  BasicTensor<T> bt({k, n});
  detail::transpose_into(b.data(), n, k, bt.data());
  BasicTensor<T> c({m, n});
  detail::gemm_accumulate(m, n, k, a.data(), bt.data(), c.data());
  return c;
}

/// a[K×M]ᵀ · b[K×N].
template <typename T>
BasicTensor<T> matmul_tn(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_rank(a.shape(), 2, "matmul_tn");
  detail::require_rank(b.shape(), 2, "matmul_tn");
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul_tn: inner extents differ, " + shape_str(a.shape()) + "^T x " +
                         shape_str(b.shape()));
  }
  BasicTensor<T> at({m, k});
  detail::transpose_into(a.data(), k, m, at.data());
  BasicTensor<T> c({m, n});
  detail::gemm_accumulate(m, n, k, at.data(), b.data(), c.data());
  return c;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  detail::require_rank(a.shape(), 2, "transpose");
  BasicTensor<T> t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// In-place a += b for equal shapes.
template <typename T>
void add_inplace(BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
BasicTensor<T> add(BasicTensor<T> a, const BasicTensor<T>& b) {
  add_inplace(a, b);
  return a;
}

template <typename T>
void scale_inplace(BasicTensor<T>& a, T factor) {
  for (auto& x : a.flat()) x *= factor;
}

/// Row-wise softmax. mask(i, j) != 0 marks an attendable entry; masked entries
/// come out as exactly zero. A row with no attendable entry is all zeros and
/// increments *fully_masked_rows when provided.
template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& m, const Mask* mask = nullptr,
                            std::size_t* fully_masked_rows = nullptr) {
  detail::require_rank(m.shape(), 2, "softmax_rows");
  if (mask && mask->shape() != m.shape()) {
    throw DimensionError("softmax_rows: mask shape " + shape_str(mask->shape()) + " vs logits " +
                         shape_str(m.shape()));
  }
  const std::size_t rows = m.rows(), cols = m.cols();
  BasicTensor<T> out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    const T* in = m.data() + i * cols;
    const unsigned char* keep = mask ? mask->data() + i * cols : nullptr;
    T* o = out.data() + i * cols;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < cols; ++j)
      if (!keep || keep[j]) mx = std::max(mx, in[j]);
    if (mx == -std::numeric_limits<T>::infinity()) {
      if (fully_masked_rows) ++*fully_masked_rows;
      continue;
    }
    T sum{};
    for (std::size_t j = 0; j < cols; ++j) {
      if (!keep || keep[j]) {
        o[j] = std::exp(in[j] - mx);
        sum += o[j];
      }
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= sum;
  }
  return out;
}

/// Per-dimension zero padding: before[d] and after[d] elements.
struct PadSpec {
  std::vector<std::size_t> before;
  std::vector<std::size_t> after;
};

template <typename T>
BasicTensor<T> pad(const BasicTensor<T>& m, const PadSpec& spec) {
  const std::size_t rank = m.rank();
  if (spec.before.size() != rank || spec.after.size() != rank) {
    throw DimensionError("pad: spec rank does not match tensor " + shape_str(m.shape()));
  }
  Shape out_shape(rank);
  for (std::size_t d = 0; d < rank; ++d) out_shape[d] = m.shape()[d] + spec.before[d] + spec.after[d];
  BasicTensor<T> out(out_shape);
  if (m.empty()) return out;

  // Walk source elements in row-major order with a mixed-radix counter.
  std::vector<std::size_t> idx(rank, 0);
  std::vector<std::size_t> out_stride(rank, 1);
  for (std::size_t d = rank; d-- > 1;) out_stride[d - 1] = out_stride[d] * out_shape[d];
  for (std::size_t flat = 0; flat < m.size(); ++flat) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < rank; ++d) off += (idx[d] + spec.before[d]) * out_stride[d];
    out[off] = m[flat];
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < m.shape()[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

/// Metadata-only reshape: the buffer moves into the result unchanged.
template <typename T>
BasicTensor<T> reshape(BasicTensor<T> m, Shape new_shape) {
  m.reshape_inplace(std::move(new_shape));
  return m;
}

/// Half-open [begin, end) per dimension.
struct Range {
  std::size_t begin;
  std::size_t end;
};

template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& m, const std::vector<Range>& ranges) {
  const std::size_t rank = m.rank();
  if (ranges.size() != rank) throw BoundsError("slice: range count does not match " + shape_str(m.shape()));
  Shape out_shape(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    if (ranges[d].begin > ranges[d].end || ranges[d].end > m.shape()[d]) {
      throw BoundsError("slice: range [" + std::to_string(ranges[d].begin) + ", " +
                        std::to_string(ranges[d].end) + ") out of bounds for dim " + std::to_string(d) +
                        " of " + shape_str(m.shape()));
    }
    out_shape[d] = ranges[d].end - ranges[d].begin;
  }
  BasicTensor<T> out(out_shape);
  if (out.empty()) return out;
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t d = rank; d-- > 1;) in_stride[d - 1] = in_stride[d] * m.shape()[d];
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < rank; ++d) off += (idx[d] + ranges[d].begin) * in_stride[d];
    out[flat] = m[off];
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

/// Columns [begin, begin + width) of a matrix, as a contiguous copy.
template <typename T>
BasicTensor<T> column_block(const BasicTensor<T>& m, std::size_t begin, std::size_t width) {
  return slice(m, {{0, m.rows()}, {begin, begin + width}});
}

/// Writes src into columns [begin, begin + src.cols()) of dst.
template <typename T>
void set_column_block(BasicTensor<T>& dst, std::size_t begin, const BasicTensor<T>& src) {
  if (src.rows() != dst.rows() || begin + src.cols() > dst.cols()) {
    throw BoundsError("set_column_block: " + shape_str(src.shape()) + " at column " + std::to_string(begin) +
                      " does not fit " + shape_str(dst.shape()));
  }
  for (std::size_t i = 0; i < src.rows(); ++i)
    for (std::size_t j = 0; j < src.cols(); ++j) dst(i, begin + j) = src(i, j);
}

/// Lower-triangular (j <= i) attendability mask.
inline Mask causal_mask(std::size_t length) {
  Mask m({length, length});
  for (std::size_t i = 0; i < length; ++i)
    for (std::size_t j = 0; j <= i; ++j) m(i, j) = 1;
  return m;
}

template <typename T>
T max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw DimensionError("max_abs_diff: shape mismatch");
  T worst{};
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace relmusic
