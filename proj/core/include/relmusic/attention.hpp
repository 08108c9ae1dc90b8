// SPDX-License-Identifier: Apache-2.0
//
// Single-head attention kernels: scaled dot-product attention, relative
// attention with global skew, blocked local relative attention, the
// materializing (L, L, D_h) reference, and reverse-mode gradients.
//
// Logit convention throughout: (QKᵀ + S_rel [+ extra]) / sqrt(D_h), masked,
// softmax over keys. Mask entries != 0 are attendable.

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "relmusic/alloc_meter.hpp"
#include "relmusic/ops.hpp"
#include "relmusic/relative_table.hpp"
#include "relmusic/skew.hpp"
#include "relmusic/tensor.hpp"

namespace relmusic {

/// Causal attendability: query i sees keys j <= i.
struct CausalMask {
  std::size_t length = 0;

  bool attendable(std::size_t query, std::size_t key) const { return key <= query; }
  Mask dense() const { return causal_mask(length); }
};

struct LocalAttentionConfig {
  std::size_t block_length = 1;  // N
  std::size_t num_blocks = 1;    // M

  std::size_t length() const { return block_length * num_blocks; }

  static LocalAttentionConfig for_length(std::size_t length, std::size_t block_length) {
    if (block_length == 0 || length % block_length != 0) {
      throw ConfigError("local attention: length " + std::to_string(length) +
                        " is not a multiple of block length " + std::to_string(block_length));
    }
    return {block_length, length / block_length};
  }
};

template <typename T>
struct AttentionResult {
  BasicTensor<T> z;
  BasicTensor<T> weights;
};

template <typename T>
struct LocalAttentionResult {
  BasicTensor<T> z;
  /// Per block: N × 2N weights over [previous block | current block] keys.
  std::vector<BasicTensor<T>> weights;
};

/// Optional inputs shared by the global and local forward passes.
template <typename T>
struct AttentionExtras {
  /// Added to the unscaled logits (global: L×L; local: one N×2N per block).
  const std::vector<BasicTensor<T>>* extra_logits = nullptr;
  /// Multipliers applied to the post-softmax weights (dropout), same layout.
  const std::vector<BasicTensor<T>>* dropout = nullptr;
};

template <typename T>
struct GlobalAttentionCache {
  BasicTensor<T> q, k, v;
  std::vector<std::size_t> span_rows;
  BasicTensor<T> e_span;
  BasicTensor<T> weights;
  BasicTensor<T> dropout;
  std::size_t table_rows = 0;
  bool relative = false;
  bool valid = false;
};

template <typename T>
struct LocalAttentionCache {
  LocalAttentionConfig cfg;
  BasicTensor<T> q, k, v;
  BasicTensor<T> e_left;
  std::vector<std::size_t> right_rows;
  BasicTensor<T> e_right;
  std::vector<BasicTensor<T>> weights;
  std::vector<BasicTensor<T>> dropout;
  std::size_t right_table_rows = 0;
  bool relative = false;
  bool valid = false;
};

template <typename T>
struct AttentionGrads {
  BasicTensor<T> dq, dk, dv;
  BasicTensor<T> d_table;        // global table, or local right (current-block) table
  BasicTensor<T> d_left_table;   // local only
  /// Gradient w.r.t. the unscaled logits (L×L global, or per block N×2N).
  std::vector<BasicTensor<T>> d_logits;
};

namespace detail {

template <typename T>
void require_qkv(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v, const char* op) {
  if (q.rank() != 2 || k.shape() != q.shape() || v.shape() != q.shape()) {
    throw DimensionError(std::string(op) + ": q, k, v must share one L×D_h shape; got " + shape_str(q.shape()) +
                         ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
}

template <typename T>
void divide_inplace(BasicTensor<T>& m, T divisor) {
  for (auto& x : m.flat()) x /= divisor;
}

template <typename T>
BasicTensor<T> hadamard(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

/// d logits (before scaling) from d weights for a masked softmax with scale.
template <typename T>
BasicTensor<T> softmax_backward_scaled(const BasicTensor<T>& p, const BasicTensor<T>& dp, T scale_divisor) {
  BasicTensor<T> out(p.shape());
  const std::size_t rows = p.rows(), cols = p.cols();
  for (std::size_t i = 0; i < rows; ++i) {
    T dot{};
    for (std::size_t j = 0; j < cols; ++j) dot += p(i, j) * dp(i, j);
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = p(i, j) * (dp(i, j) - dot) / scale_divisor;
  }
  return out;
}

template <typename T>
BasicTensor<T> rows_of(const BasicTensor<T>& m, std::size_t begin, std::size_t count) {
  return slice(m, {{begin, begin + count}, {0, m.cols()}});
}

template <typename T>
void add_rows(BasicTensor<T>& dst, std::size_t begin, const BasicTensor<T>& src, std::size_t src_begin,
              std::size_t count) {
  const std::size_t cols = dst.cols();
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < cols; ++j) dst(begin + i, j) += src(src_begin + i, j);
}

}  // namespace detail

/// Materializing reference: gathers R (L, L, D_h) with R[i][j] = E row for
/// distance j - i (zero above the diagonal) and returns S_rel[i][j] = q_i · R[i][j].
/// Memory is Θ(L²·D_h) for R, charged to meter_category::kRelativeEmbeddings.
template <typename T>
BasicTensor<T> naive_srel_global(const BasicTensor<T>& q, const RelativeEmbeddingTable<T>& table) {
  if (table.mode != TableMode::global) throw ConfigError("naive_srel_global: table must be in global mode");
  if (q.rank() != 2 || q.cols() != table.head_dim()) {
    throw DimensionError("naive_srel_global: queries " + shape_str(q.shape()) + " vs table " +
                         shape_str(table.weights.shape()));
  }
  const std::size_t len = q.rows(), dim = q.cols();
  BasicTensor<T> r_tensor;
  {
    MeterCategory cat(meter_category::kRelativeEmbeddings);
    r_tensor = BasicTensor<T>({len, len, dim});
  }
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const std::size_t row =
          table.row_for_distance(static_cast<std::int64_t>(j) - static_cast<std::int64_t>(i));
      std::copy_n(table.weights.data() + row * dim, dim, &r_tensor(i, j, 0));
    }
  }
  BasicTensor<T> srel;
  {
    MeterCategory cat(meter_category::kRelativeLogits);
    srel = BasicTensor<T>({len, len});
  }
  for (std::size_t i = 0; i < len; ++i) {
    const T* qi = q.data() + i * dim;
    for (std::size_t j = 0; j < len; ++j) {
      const T* rij = &r_tensor(i, j, 0);
      T s{};
      for (std::size_t d = 0; d < dim; ++d) s += qi[d] * rij[d];
      srel(i, j) = s;
    }
  }
  return srel;
}

/// O(L·D_h) route: gather the L span embeddings, form QEᵀ, skew. Optionally
/// returns the gathered rows and span embeddings for the backward pass.
template <typename T>
BasicTensor<T> efficient_srel_global(const BasicTensor<T>& q, const RelativeEmbeddingTable<T>& table,
                                     std::vector<std::size_t>* rows_out = nullptr,
                                     BasicTensor<T>* e_span_out = nullptr) {
  if (table.mode != TableMode::global) throw ConfigError("relative global attention: table must be in global mode");
  if (q.rank() != 2 || q.cols() != table.head_dim()) {
    throw DimensionError("relative global attention: queries " + shape_str(q.shape()) + " vs table " +
                         shape_str(table.weights.shape()));
  }
  auto rows = table.span_rows(q.rows());
  const std::size_t span = rows.size(), dim = table.head_dim();
  BasicTensor<T> e_t;  // (D_h, L): gathered directly in the layout the product reads
  {
    MeterCategory cat(meter_category::kRelativeEmbeddings);
    e_t = BasicTensor<T>({dim, span});
  }
  for (std::size_t r = 0; r < span; ++r) {
    const T* src = table.weights.data() + rows[r] * dim;
    for (std::size_t d = 0; d < dim; ++d) e_t(d, r) = src[d];
  }
  BasicTensor<T> srel;
  {
    MeterCategory cat(meter_category::kRelativeLogits);
    auto qe = matmul(q, e_t);
    srel = skew_global(qe);
  }
  if (e_span_out) *e_span_out = table.gather(rows);
  if (rows_out) *rows_out = std::move(rows);
  return srel;
}

/// Plain scaled dot-product attention.
template <typename T>
AttentionResult<T> scaled_dot_product_attention(const BasicTensor<T>& q, const BasicTensor<T>& k,
                                                const BasicTensor<T>& v, const Mask& mask) {
  detail::require_qkv(q, k, v, "attention");
  auto logits = matmul_nt(q, k);
  detail::divide_inplace(logits, std::sqrt(static_cast<T>(q.cols())));
  auto weights = softmax_rows(logits, &mask);
  auto z = matmul(weights, v);
  return {std::move(z), std::move(weights)};
}

/// Relative global attention. table == nullptr gives plain attention through
/// the same code path (used by the non-relative decoder).
template <typename T>
AttentionResult<T> relative_attention_global(const BasicTensor<T>& q, const BasicTensor<T>& k,
                                             const BasicTensor<T>& v, const RelativeEmbeddingTable<T>* table,
                                             const Mask& mask, const AttentionExtras<T>& extras = {},
                                             GlobalAttentionCache<T>* cache = nullptr) {
  detail::require_qkv(q, k, v, "relative_attention_global");
  const std::size_t len = q.rows();
  if (mask.shape() != Shape{len, len}) throw DimensionError("relative_attention_global: mask must be L×L");

  auto logits = matmul_nt(q, k);
  std::vector<std::size_t> rows;
  BasicTensor<T> e_span;
  if (table) add_inplace(logits, efficient_srel_global(q, *table, &rows, &e_span));
  if (extras.extra_logits) add_inplace(logits, extras.extra_logits->at(0));
  detail::divide_inplace(logits, std::sqrt(static_cast<T>(q.cols())));
  auto weights = softmax_rows(logits, &mask);
  const BasicTensor<T>* drop = extras.dropout ? &extras.dropout->at(0) : nullptr;
  auto z = drop ? matmul(detail::hadamard(weights, *drop), v) : matmul(weights, v);

  if (cache) {
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->span_rows = std::move(rows);
    cache->e_span = std::move(e_span);
    cache->weights = weights;
    cache->dropout = drop ? *drop : BasicTensor<T>();
    cache->table_rows = table ? table->num_distances() : 0;
    cache->relative = table != nullptr;
    cache->valid = true;
  }
  return {std::move(z), std::move(weights)};
}

template <typename T>
AttentionGrads<T> relative_attention_global_backward(const GlobalAttentionCache<T>& cache,
                                                     const BasicTensor<T>& dz) {
  if (!cache.valid) throw StateError("attention backward: forward intermediates were not retained");
  if (dz.shape() != cache.q.shape()) throw DimensionError("attention backward: dz shape mismatch");
  const T scale = std::sqrt(static_cast<T>(cache.q.cols()));
  const bool has_drop = !cache.dropout.empty();
  const BasicTensor<T>& p = cache.weights;

  AttentionGrads<T> g;
  g.dv = has_drop ? matmul_tn(detail::hadamard(p, cache.dropout), dz) : matmul_tn(p, dz);
  auto dp = matmul_nt(dz, cache.v);
  if (has_drop) dp = detail::hadamard(dp, cache.dropout);
  auto da = detail::softmax_backward_scaled(p, dp, scale);
  g.dq = matmul(da, cache.k);
  g.dk = matmul_tn(da, cache.q);
  if (cache.relative) {
    auto dqe = skew_global_backward(da);
    add_inplace(g.dq, matmul(dqe, cache.e_span));
    auto d_span = matmul_tn(dqe, cache.q);
    g.d_table = BasicTensor<T>({cache.table_rows, cache.q.cols()});
    scatter_rows_add(d_span, cache.span_rows, g.d_table);
  }
  g.d_logits.push_back(std::move(da));
  return g;
}

/// Blocked local relative attention. Block b attends to block b-1 without a
/// mask (distances -(2N-1)..-1 through left_table and skew_local) and to
/// itself causally (right_table, a global-mode table, through skew_global).
/// Block 0 has no previous block. Both tables null gives plain block-local
/// attention.
template <typename T>
LocalAttentionResult<T> relative_attention_local(const BasicTensor<T>& q, const BasicTensor<T>& k,
                                                 const BasicTensor<T>& v,
                                                 const RelativeEmbeddingTable<T>* left_table,
                                                 const RelativeEmbeddingTable<T>* right_table,
                                                 const LocalAttentionConfig& cfg,
                                                 const AttentionExtras<T>& extras = {},
                                                 LocalAttentionCache<T>* cache = nullptr) {
  detail::require_qkv(q, k, v, "relative_attention_local");
  const std::size_t n = cfg.block_length, dim = q.cols();
  if (n == 0 || q.rows() != cfg.length()) {
    throw ConfigError("relative_attention_local: length " + std::to_string(q.rows()) + " is not " +
                      std::to_string(cfg.num_blocks) + " blocks of " + std::to_string(n));
  }
  if ((left_table == nullptr) != (right_table == nullptr)) {
    throw ConfigError("relative_attention_local: left and right tables must both be present or both absent");
  }
  const bool relative = left_table != nullptr;
  BasicTensor<T> e_left, e_right;
  std::vector<std::size_t> right_rows;
  if (relative) {
    if (left_table->mode != TableMode::local_left || right_table->mode != TableMode::global) {
      throw ConfigError("relative_attention_local: expected a local-left table and a global-mode current-block table");
    }
    if (left_table->num_distances() != 2 * n - 1 || left_table->head_dim() != dim ||
        right_table->head_dim() != dim) {
      throw DimensionError("relative_attention_local: left table must be (2N-1)×D_h = " +
                           std::to_string(2 * n - 1) + "x" + std::to_string(dim) + ", got " +
                           shape_str(left_table->weights.shape()));
    }
    MeterCategory cat(meter_category::kRelativeEmbeddings);
    e_left = left_table->weights;
    right_rows = right_table->span_rows(n);
    e_right = right_table->gather(right_rows);
  }

  const T scale = std::sqrt(static_cast<T>(dim));
  LocalAttentionResult<T> result{BasicTensor<T>({q.rows(), dim}), {}};
  for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
    const std::size_t start = b * n;
    auto qb = detail::rows_of(q, start, n);
    BasicTensor<T> k_span({2 * n, dim}), v_span({2 * n, dim});
    if (b > 0) {
      std::copy_n(k.data() + (start - n) * dim, 2 * n * dim, k_span.data());
      std::copy_n(v.data() + (start - n) * dim, 2 * n * dim, v_span.data());
    } else {
      std::copy_n(k.data(), n * dim, k_span.data() + n * dim);
      std::copy_n(v.data(), n * dim, v_span.data() + n * dim);
    }
    auto logits = matmul_nt(qb, k_span);
    Mask mask({n, 2 * n});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) mask(i, j) = b > 0 ? 1 : 0;
      for (std::size_t j = 0; j <= i; ++j) mask(i, n + j) = 1;
    }
    if (relative) {
      MeterCategory cat(meter_category::kRelativeLogits);
      if (b > 0) {
        auto left = skew_local(matmul_nt(qb, e_left));
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) logits(i, j) += left(i, j);
      }
      auto right = skew_global(matmul_nt(qb, e_right));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) logits(i, n + j) += right(i, j);
    }
    if (extras.extra_logits) add_inplace(logits, extras.extra_logits->at(b));
    detail::divide_inplace(logits, scale);
    auto weights = softmax_rows(logits, &mask);
    const BasicTensor<T>* drop = extras.dropout ? &extras.dropout->at(b) : nullptr;
    auto zb = drop ? matmul(detail::hadamard(weights, *drop), v_span) : matmul(weights, v_span);
    std::copy_n(zb.data(), n * dim, result.z.data() + start * dim);
    if (cache) cache->dropout.push_back(drop ? *drop : BasicTensor<T>());
    result.weights.push_back(std::move(weights));
  }

  if (cache) {
    cache->cfg = cfg;
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->e_left = std::move(e_left);
    cache->right_rows = std::move(right_rows);
    cache->e_right = std::move(e_right);
    cache->weights = result.weights;
    cache->right_table_rows = relative ? right_table->num_distances() : 0;
    cache->relative = relative;
    cache->valid = true;
  }
  return result;
}

template <typename T>
AttentionGrads<T> relative_attention_local_backward(const LocalAttentionCache<T>& cache, const BasicTensor<T>& dz) {
  if (!cache.valid) throw StateError("local attention backward: forward intermediates were not retained");
  if (dz.shape() != cache.q.shape()) throw DimensionError("local attention backward: dz shape mismatch");
  const std::size_t n = cache.cfg.block_length, dim = cache.q.cols();
  const T scale = std::sqrt(static_cast<T>(dim));

  AttentionGrads<T> g;
  g.dq = BasicTensor<T>(cache.q.shape());
  g.dk = BasicTensor<T>(cache.q.shape());
  g.dv = BasicTensor<T>(cache.q.shape());
  BasicTensor<T> d_right_span;
  if (cache.relative) {
    g.d_left_table = BasicTensor<T>({2 * n - 1, dim});
    d_right_span = BasicTensor<T>({n, dim});
  }

  for (std::size_t b = 0; b < cache.cfg.num_blocks; ++b) {
    const std::size_t start = b * n;
    const std::size_t span_start = b > 0 ? start - n : start;
    const std::size_t span_offset = b > 0 ? 0 : n;  // row in the 2N span where real keys begin
    const std::size_t span_count = b > 0 ? 2 * n : n;
    auto qb = detail::rows_of(cache.q, start, n);
    auto dzb = detail::rows_of(dz, start, n);
    BasicTensor<T> k_span({2 * n, dim}), v_span({2 * n, dim});
    std::copy_n(cache.k.data() + span_start * dim, span_count * dim, k_span.data() + span_offset * dim);
    std::copy_n(cache.v.data() + span_start * dim, span_count * dim, v_span.data() + span_offset * dim);

    const auto& p = cache.weights[b];
    const auto& drop = cache.dropout[b];
    const bool has_drop = !drop.empty();
    auto dv_span = has_drop ? matmul_tn(detail::hadamard(p, drop), dzb) : matmul_tn(p, dzb);
    auto dp = matmul_nt(dzb, v_span);
    if (has_drop) dp = detail::hadamard(dp, drop);
    auto da = detail::softmax_backward_scaled(p, dp, scale);
    auto dqb = matmul(da, k_span);
    auto dk_span = matmul_tn(da, qb);
    detail::add_rows(g.dv, span_start, dv_span, span_offset, span_count);
    detail::add_rows(g.dk, span_start, dk_span, span_offset, span_count);

    if (cache.relative) {
      BasicTensor<T> da_prev({n, n}), da_curr({n, n});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          da_prev(i, j) = da(i, j);
          da_curr(i, j) = da(i, n + j);
        }
      if (b > 0) {
        auto dqel = skew_local_backward(da_prev);
        add_inplace(dqb, matmul(dqel, cache.e_left));
        add_inplace(g.d_left_table, matmul_tn(dqel, qb));
      }
      auto dqer = skew_global_backward(da_curr);
      add_inplace(dqb, matmul(dqer, cache.e_right));
      add_inplace(d_right_span, matmul_tn(dqer, qb));
    }
    detail::add_rows(g.dq, start, dqb, 0, n);
    g.d_logits.push_back(std::move(da));
  }
  if (cache.relative) {
    g.d_table = BasicTensor<T>({cache.right_table_rows, dim});
    scatter_rows_add(d_right_span, cache.right_rows, g.d_table);
  }
  return g;
}

}  // namespace relmusic
