// SPDX-License-Identifier: Apache-2.0
//
// Content-dependent relative logits for the first decoder layer: for each
// (query, key) pair, the query is dotted with the sum of a time-distance
// embedding and a pitch-interval embedding. The pairwise gather is explicit,
// so memory is quadratic in length times head width.
//
// Table layouts (rows × head_dim):
//   time:  max_dt + 2 rows. Row dt + max_dt for dt = time(key) - time(query)
//          clipped to [-max_dt, 0]; last row for pairs without timing.
//   pitch: 2*max_interval + 2 rows. Row iv + max_interval for
//          iv = pitch(key) - pitch(query) clipped to ±max_interval; last row
//          when either token carries no pitch.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "relmusic/tensor.hpp"

namespace relmusic {

/// Per-token musical attributes; -1 marks "none".
struct TokenAnnotation {
  std::vector<int> pitch;
  std::vector<int> time;

  std::size_t size() const { return pitch.size(); }
};

inline std::size_t time_table_rows(std::size_t max_dt) { return max_dt + 2; }
inline std::size_t pitch_table_rows(std::size_t max_interval) { return 2 * max_interval + 2; }

inline std::size_t time_row(const TokenAnnotation& ann, std::size_t query, std::size_t key,
                            std::size_t table_rows) {
  const auto max_dt = static_cast<std::int64_t>(table_rows - 2);
  if (ann.time[query] < 0 || ann.time[key] < 0) return table_rows - 1;
  const std::int64_t dt = std::clamp<std::int64_t>(ann.time[key] - ann.time[query], -max_dt, 0);
  return static_cast<std::size_t>(dt + max_dt);
}

inline std::size_t pitch_row(const TokenAnnotation& ann, std::size_t query, std::size_t key,
                             std::size_t table_rows) {
  const auto max_iv = static_cast<std::int64_t>((table_rows - 2) / 2);
  if (ann.pitch[query] < 0 || ann.pitch[key] < 0) return table_rows - 1;
  const std::int64_t iv = std::clamp<std::int64_t>(ann.pitch[key] - ann.pitch[query], -max_iv, max_iv);
  return static_cast<std::size_t>(iv + max_iv);
}

namespace detail {

template <typename T>
void check_pitch_time_tables(const BasicTensor<T>& q, const BasicTensor<T>& time_table,
                             const BasicTensor<T>& pitch_table) {
  if (time_table.rank() != 2 || pitch_table.rank() != 2 || time_table.cols() != q.cols() ||
      pitch_table.cols() != q.cols() || time_table.rows() < 2 || pitch_table.rows() < 2 ||
      pitch_table.rows() % 2 != 0) {
    throw DimensionError("pitch/time tables " + shape_str(time_table.shape()) + ", " +
                         shape_str(pitch_table.shape()) + " incompatible with queries " +
                         shape_str(q.shape()));
  }
}

}  // namespace detail

/// Logits for queries at absolute positions q_offset.. against keys at
/// k_offset .. k_offset + k_count. Returns (q.rows() × k_count).
template <typename T>
BasicTensor<T> pitch_time_logits_span(const BasicTensor<T>& q, std::size_t q_offset, std::size_t k_offset,
                                      std::size_t k_count, const TokenAnnotation& ann,
                                      const BasicTensor<T>& time_table, const BasicTensor<T>& pitch_table) {
  detail::check_pitch_time_tables(q, time_table, pitch_table);
  if (q_offset + q.rows() > ann.size() || k_offset + k_count > ann.size()) {
    throw BoundsError("pitch/time logits: annotation shorter than the attended span");
  }
  const std::size_t dim = q.cols();
  BasicTensor<T> out({q.rows(), k_count});
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const T* qi = q.data() + i * dim;
    for (std::size_t j = 0; j < k_count; ++j) {
      const T* et = time_table.data() + time_row(ann, q_offset + i, k_offset + j, time_table.rows()) * dim;
      const T* ep = pitch_table.data() + pitch_row(ann, q_offset + i, k_offset + j, pitch_table.rows()) * dim;
      T s{};
      for (std::size_t d = 0; d < dim; ++d) s += qi[d] * (et[d] + ep[d]);
      out(i, j) = s;
    }
  }
  return out;
}

/// Global form: L×L logits over the whole annotated sequence. Refuses lengths
/// above gather_cap since the gather is quadratic in memory traffic.
template <typename T>
BasicTensor<T> pitch_time_relative_logits(const BasicTensor<T>& q, const TokenAnnotation& ann,
                                          const BasicTensor<T>& time_table, const BasicTensor<T>& pitch_table,
                                          std::size_t gather_cap = 2048) {
  if (q.rows() > gather_cap) {
    throw ConfigError("pitch/time relative logits gather pairwise embeddings; length " +
                      std::to_string(q.rows()) + " exceeds the gather cap of " + std::to_string(gather_cap) +
                      ". Disable use_pitch_time_relative or raise pitch_time_max_len.");
  }
  return pitch_time_logits_span(q, 0, 0, q.rows(), ann, time_table, pitch_table);
}

/// Backward of pitch_time_logits_span given the logit gradient d_logits.
template <typename T>
void pitch_time_logits_span_backward(const BasicTensor<T>& q, std::size_t q_offset, std::size_t k_offset,
                                     const TokenAnnotation& ann, const BasicTensor<T>& time_table,
                                     const BasicTensor<T>& pitch_table, const BasicTensor<T>& d_logits,
                                     BasicTensor<T>& d_q, BasicTensor<T>& d_time, BasicTensor<T>& d_pitch) {
  const std::size_t dim = q.cols();
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const T* qi = q.data() + i * dim;
    T* dqi = d_q.data() + i * dim;
    for (std::size_t j = 0; j < d_logits.cols(); ++j) {
      const T g = d_logits(i, j);
      if (g == T{}) continue;
      const std::size_t tr = time_row(ann, q_offset + i, k_offset + j, time_table.rows());
      const std::size_t pr = pitch_row(ann, q_offset + i, k_offset + j, pitch_table.rows());
      const T* et = time_table.data() + tr * dim;
      const T* ep = pitch_table.data() + pr * dim;
      T* det = d_time.data() + tr * dim;
      T* dep = d_pitch.data() + pr * dim;
      for (std::size_t d = 0; d < dim; ++d) {
        dqi[d] += g * (et[d] + ep[d]);
        det[d] += g * qi[d];
        dep[d] += g * qi[d];
      }
    }
  }
}

}  // namespace relmusic
