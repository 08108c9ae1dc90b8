// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "relmusic/tensor.hpp"

namespace relmusic {

enum class TableMode {
  /// Rows cover distances -(n-1) .. 0; row r is distance r - (n - 1).
  global,
  /// Rows cover distances -n .. -1 (n = 2N-1 for block length N); row r is distance r - n.
  local_left,
};

/// Per-head learned embeddings indexed by relative distance (key - query).
/// Distances farther than the table reaches clip to the farthest row.
template <typename T>
struct RelativeEmbeddingTable {
  TableMode mode = TableMode::global;
  BasicTensor<T> weights;  // (num_distances, head_dim)

  std::size_t num_distances() const { return weights.rows(); }
  std::size_t head_dim() const { return weights.cols(); }

  std::int64_t distance_of_row(std::size_t r) const {
    const auto n = static_cast<std::int64_t>(num_distances());
    const auto row = static_cast<std::int64_t>(r);
    return mode == TableMode::global ? row - (n - 1) : row - n;
  }

  std::size_t row_for_distance(std::int64_t distance) const {
    const auto n = static_cast<std::int64_t>(num_distances());
    const std::int64_t row = mode == TableMode::global ? distance + n - 1 : distance + n;
    return static_cast<std::size_t>(std::clamp<std::int64_t>(row, 0, n - 1));
  }

  /// Table rows backing a global span of `span` keys: entry r is the row for
  /// distance r - (span - 1).
  std::vector<std::size_t> span_rows(std::size_t span) const {
    std::vector<std::size_t> rows(span);
    for (std::size_t r = 0; r < span; ++r) {
      rows[r] = row_for_distance(static_cast<std::int64_t>(r) - static_cast<std::int64_t>(span) + 1);
    }
    return rows;
  }

  /// Gathers the span embeddings (span × head_dim) for the given rows.
  BasicTensor<T> gather(const std::vector<std::size_t>& rows) const {
    const std::size_t dim = head_dim();
    BasicTensor<T> out({rows.size(), dim});
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy_n(weights.data() + rows[r] * dim, dim, out.data() + r * dim);
    return out;
  }

  static RelativeEmbeddingTable zeros(TableMode mode, std::size_t num_distances, std::size_t head_dim) {
    return {mode, BasicTensor<T>({num_distances, head_dim})};
  }
};

/// Accumulates span-embedding gradients into the table rows they were gathered from.
template <typename T>
void scatter_rows_add(const BasicTensor<T>& d_span, const std::vector<std::size_t>& rows,
                      BasicTensor<T>& d_table) {
  const std::size_t dim = d_span.cols();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    T* dst = d_table.data() + rows[r] * dim;
    const T* src = d_span.data() + r * dim;
    for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
  }
}

}  // namespace relmusic
