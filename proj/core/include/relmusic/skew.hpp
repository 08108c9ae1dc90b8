// SPDX-License-Identifier: Apache-2.0
//
// Skew transforms: turn an absolute-by-relative (query, distance) logit
// matrix into an absolute-by-absolute (query, key) matrix by pad -> reshape
// -> slice over the row-major buffer.
//
// Two forms are provided for each transform. The *_stepwise functions run the
// pad/reshape/slice sequence literally on tensors. The fused functions compute
// the same flat-index composition directly and allocate only the output.

#pragma once

#include <cstddef>
#include <string>

#include "relmusic/ops.hpp"
#include "relmusic/tensor.hpp"

namespace relmusic {

namespace detail {

inline void require_square(const Shape& s, const char* op) {
  if (s.size() != 2 || s[0] != s[1]) {
    throw DimensionError(std::string(op) + ": expected a square matrix, got " + shape_str(s));
  }
}

inline std::size_t local_block_of(const Shape& s, const char* op) {
  if (s.size() != 2 || s[0] == 0 || s[1] != 2 * s[0] - 1) {
    throw DimensionError(std::string(op) + ": expected N x (2N-1), got " + shape_str(s));
  }
  return s[0];
}

}  // namespace detail

/// Global skew of QEᵀ (L×L, columns ordered by distance -(L-1)..0).
/// out(i, j) = qe(i, j - i + L - 1) for j <= i. Entries above the diagonal
/// hold whatever the reshape moved there (neighbouring-row values or pad
/// zeros); callers mask them.
template <typename T>
BasicTensor<T> skew_global(const BasicTensor<T>& qe) {
  detail::require_square(qe.shape(), "skew_global");
  const std::size_t len = qe.rows();
  BasicTensor<T> out({len, len});
  // Padded buffer is L×(L+1) with a zero column 0; reinterpreted as (L+1)×L,
  // the last L rows start at flat offset L.
  const std::size_t padded_cols = len + 1;
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j < len; ++j) {
      const std::size_t f = (i + 1) * len + j;
      const std::size_t a = f / padded_cols;
      const std::size_t b = f % padded_cols;
      out(i, j) = b == 0 ? T{} : qe(a, b - 1);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> skew_global_stepwise(const BasicTensor<T>& qe) {
  detail::require_square(qe.shape(), "skew_global");
  const std::size_t len = qe.rows();
  auto padded = pad(qe, PadSpec{{0, 1}, {0, 0}});        // 1. dummy column on the left
  auto reshaped = reshape(std::move(padded), {len + 1, len});  // 2. (L+1, L)
  return slice(reshaped, {{1, len + 1}, {0, len}});         // 3. last L rows
}

/// Adjoint of skew_global restricted to the causal triangle: scatters
/// d_srel(i, j), j <= i, back to (i, j - i + L - 1). Other entries are zero.
template <typename T>
BasicTensor<T> skew_global_backward(const BasicTensor<T>& d_srel) {
  detail::require_square(d_srel.shape(), "skew_global_backward");
  const std::size_t len = d_srel.rows();
  BasicTensor<T> d_qe({len, len});
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j <= i; ++j) d_qe(i, j + len - 1 - i) = d_srel(i, j);
  return d_qe;
}

/// Local skew of Q·E_leftᵀ (N×(2N-1), columns ordered by distance
/// -(2N-1)..-1) into the N×N logits against the previous block:
/// out(i, j) = qe(i, j - i + N - 1). Every output entry is defined.
template <typename T>
BasicTensor<T> skew_local(const BasicTensor<T>& qe) {
  const std::size_t n = detail::local_block_of(qe.shape(), "skew_local");
  const std::size_t width = 2 * n - 1;
  BasicTensor<T> out({n, n});
  // Padded buffer is N×2N (zero column on the right), flattened, N-1 zeros
  // appended, viewed as (N+1)×(2N-1); keep the first N rows, last N columns.
  const std::size_t padded_cols = 2 * n;
  const std::size_t padded_size = n * padded_cols;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t f = i * width + (n - 1) + j;
      const std::size_t a = f / padded_cols;
      const std::size_t b = f % padded_cols;
      out(i, j) = (f < padded_size && b < width) ? qe(a, b) : T{};
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> skew_local_stepwise(const BasicTensor<T>& qe) {
  const std::size_t n = detail::local_block_of(qe.shape(), "skew_local");
  const std::size_t width = 2 * n - 1;
  auto padded = pad(qe, PadSpec{{0, 0}, {0, 1}});                 // 1. dummy column on the right
  auto flat = reshape(std::move(padded), {2 * n * n});            // 2a. flatten
  auto flat_padded = pad(flat, PadSpec{{0}, {n - 1}});            // 2b. N-1 trailing zeros
  auto reshaped = reshape(std::move(flat_padded), {n + 1, width}); // 3. (N+1, 2N-1)
  return slice(reshaped, {{0, n}, {n - 1, width}});               // 4. first N rows, last N cols
}

/// Adjoint of skew_local: d_qe(i, j - i + N - 1) = d_out(i, j).
template <typename T>
BasicTensor<T> skew_local_backward(const BasicTensor<T>& d_out) {
  detail::require_square(d_out.shape(), "skew_local_backward");
  const std::size_t n = d_out.rows();
  BasicTensor<T> d_qe({n, 2 * n - 1});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d_qe(i, j + n - 1 - i) = d_out(i, j);
  return d_qe;
}

}  // namespace relmusic
