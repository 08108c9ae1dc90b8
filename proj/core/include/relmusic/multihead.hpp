// SPDX-License-Identifier: Apache-2.0
//
// Multi-head relative self-attention: project, split into H heads of width
// D/H, attend per head (global or blocked local), concatenate, project.

#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "relmusic/attention.hpp"
#include "relmusic/pitch_time.hpp"

namespace relmusic {

enum class AttentionMode { global, local };

template <typename T>
struct MultiHeadWeights {
  BasicTensor<T> wq, wk, wv, wo;  // each D×D
};

template <typename T>
struct HeadTables {
  /// Global table, or the current-block table in local mode.
  std::optional<RelativeEmbeddingTable<T>> rel;
  /// Previous-block table (local mode only).
  std::optional<RelativeEmbeddingTable<T>> left;
  /// Time-distance and pitch-interval tables (first decoder layer only).
  std::optional<BasicTensor<T>> time_table;
  std::optional<BasicTensor<T>> pitch_table;
};

struct MultiHeadOptions {
  AttentionMode mode = AttentionMode::global;
  std::size_t block_length = 0;
  const TokenAnnotation* annotation = nullptr;
  std::size_t pitch_time_cap = 2048;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;  // required when dropout > 0
};

template <typename T>
struct HeadTableGrads {
  BasicTensor<T> d_rel, d_left, d_time, d_pitch;
};

template <typename T>
struct MultiHeadCache {
  MultiHeadOptions options;
  BasicTensor<T> x, q, k, v, concat;
  std::vector<GlobalAttentionCache<T>> global;
  std::vector<LocalAttentionCache<T>> local;
  std::vector<bool> pitch_time;
  bool valid = false;
};

template <typename T>
struct MultiHeadOutput {
  BasicTensor<T> out;
  /// weights[h]: one L×L matrix (global) or one N×2N matrix per block (local).
  std::vector<std::vector<BasicTensor<T>>> weights;
};

template <typename T>
struct MultiHeadGrads {
  BasicTensor<T> dx, dwq, dwk, dwv, dwo;
  std::vector<HeadTableGrads<T>> heads;
};

namespace detail {

template <typename T>
BasicTensor<T> dropout_multipliers(const Shape& shape, double rate, std::mt19937_64& rng) {
  BasicTensor<T> m(shape);
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& x : m.flat()) x = keep(rng) ? scale : T{};
  return m;
}

template <typename T>
BasicTensor<T> local_pitch_time_block(const BasicTensor<T>& qb, std::size_t block, std::size_t n,
                                      const TokenAnnotation& ann, const BasicTensor<T>& et,
                                      const BasicTensor<T>& ep) {
  const std::size_t start = block * n;
  BasicTensor<T> out({n, 2 * n});
  if (block > 0) {
    auto span = pitch_time_logits_span(qb, start, start - n, 2 * n, ann, et, ep);
    return span;
  }
  auto cur = pitch_time_logits_span(qb, start, start, n, ann, et, ep);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, n + j) = cur(i, j);
  return out;
}

}  // namespace detail

template <typename T>
MultiHeadOutput<T> multi_head_attention(const BasicTensor<T>& x, const MultiHeadWeights<T>& w,
                                        const std::vector<HeadTables<T>>& tables, const MultiHeadOptions& opt,
                                        MultiHeadCache<T>* cache = nullptr) {
  if (x.rank() != 2) throw DimensionError("multi_head_attention: x must be L×D, got " + shape_str(x.shape()));
  const std::size_t len = x.rows(), depth = x.cols(), heads = tables.size();
  if (heads == 0 || depth % heads != 0) {
    throw ConfigError("multi_head_attention: depth " + std::to_string(depth) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  for (const auto* m : {&w.wq, &w.wk, &w.wv, &w.wo}) {
    if (m->shape() != Shape{depth, depth}) {
      throw DimensionError("multi_head_attention: projection must be D×D, got " + shape_str(m->shape()));
    }
  }
  if (opt.dropout > 0.0 && !opt.rng) throw ConfigError("multi_head_attention: dropout requires an RNG");
  const std::size_t dh = depth / heads;

  auto q = matmul(x, w.wq);
  auto k = matmul(x, w.wk);
  auto v = matmul(x, w.wv);
  BasicTensor<T> concat({len, depth});
  MultiHeadOutput<T> result;
  result.weights.resize(heads);
  if (cache) {
    cache->global.clear();
    cache->local.clear();
    cache->pitch_time.clear();
  }

  std::optional<Mask> mask;
  std::optional<LocalAttentionConfig> lcfg;
  if (opt.mode == AttentionMode::global) {
    mask = causal_mask(len);
  } else {
    lcfg = LocalAttentionConfig::for_length(len, opt.block_length);
  }

  for (std::size_t h = 0; h < heads; ++h) {
    const auto& t = tables[h];
    auto qh = column_block(q, h * dh, dh);
    auto kh = column_block(k, h * dh, dh);
    auto vh = column_block(v, h * dh, dh);
    const bool use_pt = t.time_table.has_value() && t.pitch_table.has_value();
    if (use_pt && !opt.annotation) throw ConfigError("pitch/time relative logits need a token annotation");
    if (use_pt && len > opt.pitch_time_cap) {
      throw ConfigError("pitch/time relative logits gather pairwise embeddings; length " + std::to_string(len) +
                        " exceeds the gather cap of " + std::to_string(opt.pitch_time_cap) +
                        ". Disable use_pitch_time_relative or raise pitch_time_max_len.");
    }

    std::vector<BasicTensor<T>> extra, drop;
    AttentionExtras<T> extras;
    if (opt.mode == AttentionMode::global) {
      if (use_pt) {
        extra.push_back(pitch_time_relative_logits(qh, *opt.annotation, *t.time_table, *t.pitch_table,
                                                   opt.pitch_time_cap));
      }
      if (opt.dropout > 0.0) drop.push_back(detail::dropout_multipliers<T>({len, len}, opt.dropout, *opt.rng));
    } else {
      const std::size_t n = lcfg->block_length;
      for (std::size_t b = 0; b < lcfg->num_blocks; ++b) {
        if (use_pt) {
          extra.push_back(detail::local_pitch_time_block(detail::rows_of(qh, b * n, n), b, n, *opt.annotation,
                                                         *t.time_table, *t.pitch_table));
        }
        if (opt.dropout > 0.0) drop.push_back(detail::dropout_multipliers<T>({n, 2 * n}, opt.dropout, *opt.rng));
      }
    }
    if (!extra.empty()) extras.extra_logits = &extra;
    if (!drop.empty()) extras.dropout = &drop;

    if (opt.mode == AttentionMode::global) {
      const RelativeEmbeddingTable<T>* table = t.rel ? &*t.rel : nullptr;
      GlobalAttentionCache<T>* hc = nullptr;
      if (cache) hc = &cache->global.emplace_back();
      auto r = relative_attention_global(qh, kh, vh, table, *mask, extras, hc);
      set_column_block(concat, h * dh, r.z);
      result.weights[h].push_back(std::move(r.weights));
    } else {
      const RelativeEmbeddingTable<T>* left = t.left ? &*t.left : nullptr;
      const RelativeEmbeddingTable<T>* right = t.rel ? &*t.rel : nullptr;
      LocalAttentionCache<T>* hc = nullptr;
      if (cache) hc = &cache->local.emplace_back();
      auto r = relative_attention_local(qh, kh, vh, left, right, *lcfg, extras, hc);
      set_column_block(concat, h * dh, r.z);
      result.weights[h] = std::move(r.weights);
    }
    if (cache) cache->pitch_time.push_back(use_pt);
  }

  result.out = matmul(concat, w.wo);
  if (cache) {
    cache->options = opt;
    cache->options.rng = nullptr;
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
    cache->valid = true;
  }
  return result;
}

template <typename T>
MultiHeadGrads<T> multi_head_attention_backward(const MultiHeadCache<T>& cache, const MultiHeadWeights<T>& w,
                                                const std::vector<HeadTables<T>>& tables,
                                                const BasicTensor<T>& dout) {
  if (!cache.valid) throw StateError("multi-head backward: forward intermediates were not retained");
  const std::size_t len = cache.x.rows(), depth = cache.x.cols(), heads = tables.size();
  const std::size_t dh = depth / heads;

  MultiHeadGrads<T> g;
  g.dwo = matmul_tn(cache.concat, dout);
  auto dconcat = matmul_nt(dout, w.wo);
  BasicTensor<T> dq({len, depth}), dk({len, depth}), dv({len, depth});
  g.heads.resize(heads);

  for (std::size_t h = 0; h < heads; ++h) {
    auto dzh = column_block(dconcat, h * dh, dh);
    AttentionGrads<T> ag;
    if (cache.options.mode == AttentionMode::global) {
      ag = relative_attention_global_backward(cache.global[h], dzh);
    } else {
      ag = relative_attention_local_backward(cache.local[h], dzh);
    }
    auto& hg = g.heads[h];
    hg.d_rel = std::move(ag.d_table);
    hg.d_left = std::move(ag.d_left_table);
    if (cache.pitch_time[h]) {
      const auto& t = tables[h];
      hg.d_time = BasicTensor<T>(t.time_table->shape());
      hg.d_pitch = BasicTensor<T>(t.pitch_table->shape());
      const auto& ann = *cache.options.annotation;
      if (cache.options.mode == AttentionMode::global) {
        const auto& qh = cache.global[h].q;
        pitch_time_logits_span_backward(qh, 0, 0, ann, *t.time_table, *t.pitch_table, ag.d_logits[0], ag.dq,
                                        hg.d_time, hg.d_pitch);
      } else {
        const auto& lc = cache.local[h];
        const std::size_t n = lc.cfg.block_length;
        for (std::size_t b = 0; b < lc.cfg.num_blocks; ++b) {
          const std::size_t start = b * n;
          auto qb = detail::rows_of(lc.q, start, n);
          BasicTensor<T> dqb({n, dh});
          if (b > 0) {
            pitch_time_logits_span_backward(qb, start, start - n, ann, *t.time_table, *t.pitch_table,
                                            ag.d_logits[b], dqb, hg.d_time, hg.d_pitch);
          } else {
            auto dcur = slice(ag.d_logits[b], {{0, n}, {n, 2 * n}});
            pitch_time_logits_span_backward(qb, start, start, ann, *t.time_table, *t.pitch_table, dcur, dqb,
                                            hg.d_time, hg.d_pitch);
          }
          detail::add_rows(ag.dq, start, dqb, 0, n);
        }
      }
    }
    set_column_block(dq, h * dh, ag.dq);
    set_column_block(dk, h * dh, ag.dk);
    set_column_block(dv, h * dh, ag.dv);
  }

  g.dwq = matmul_tn(cache.x, dq);
  g.dwk = matmul_tn(cache.x, dk);
  g.dwv = matmul_tn(cache.x, dv);
  g.dx = matmul_nt(dq, w.wq);
  add_inplace(g.dx, matmul_nt(dk, w.wk));
  add_inplace(g.dx, matmul_nt(dv, w.wv));
  return g;
}

}  // namespace relmusic
