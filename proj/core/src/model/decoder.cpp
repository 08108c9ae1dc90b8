// SPDX-License-Identifier: Apache-2.0
#include "relmusic/model/decoder.hpp"

#include <cmath>

#include "relmusic/codec/jsb.hpp"
#include "relmusic/codec/performance.hpp"
#include "relmusic/errors.hpp"
#include "relmusic/ops.hpp"

namespace relmusic::model {

namespace {

constexpr std::int64_t kPerformanceStepMs = 125;

void add_bias(Tensor& m, const Tensor& bias) {
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) += bias[c];
}

}  // namespace

TokenAnnotation annotate_tokens(const ModelConfig& cfg, const std::vector<int>& tokens) {
  TokenAnnotation ann;
  ann.pitch.resize(tokens.size(), -1);
  ann.time.resize(tokens.size(), -1);
  if (cfg.annotation_codec == AnnotationCodec::jsb_grid) {
    for (std::size_t p = 0; p < tokens.size(); ++p) {
      const int tok = tokens[p];
      ann.pitch[p] = tok >= 0 && tok < codec::kJsbRestToken ? tok : -1;
      ann.time[p] = static_cast<int>(p / codec::kJsbVoices);
    }
    return ann;
  }
  std::int64_t elapsed = 0;
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    const int tok = tokens[p];
    if (tok >= codec::kTimeShiftBase && tok < codec::kVelocityBase) {
      elapsed += static_cast<std::int64_t>(tok - codec::kTimeShiftBase + 1) * codec::kTimeQuantumMs;
    }
    if (tok >= codec::kNoteOnBase && tok < codec::kNoteOffBase) ann.pitch[p] = tok - codec::kNoteOnBase;
    ann.time[p] = static_cast<int>(elapsed / kPerformanceStepMs);
  }
  return ann;
}

ForwardResult forward(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& tokens,
                      const ForwardOptions& opt, ForwardCache* cache) {
  const std::size_t len = tokens.size();
  if (len == 0) throw DimensionError("forward: empty token sequence");
  if (len > cfg.max_len) {
    if (!opt.allow_longer) {
      throw ConfigError("sequence length " + std::to_string(len) + " exceeds max_len " +
                        std::to_string(cfg.max_len));
    }
    if (cfg.position_mode != PositionMode::none && !opt.extrapolate_positions) {
      throw ConfigError("length " + std::to_string(len) + " exceeds max_len " + std::to_string(cfg.max_len) +
                        " and position_mode " + to_string(cfg.position_mode) +
                        " has no trained positions beyond it; only position_mode none (relative attention) "
                        "generalizes past the training length");
    }
  }
  const bool dropout_on = opt.training && cfg.dropout > 0.0;
  if (dropout_on && !opt.rng) throw ConfigError("forward: training with dropout requires an RNG");

  std::vector<int> padded = tokens;
  if (cfg.attention_mode == AttentionMode::local && len % cfg.block_length != 0) {
    padded.resize((len / cfg.block_length + 1) * cfg.block_length, 0);
  }
  std::shared_ptr<const TokenAnnotation> annotation;
  if (cfg.use_pitch_time_relative) annotation = std::make_shared<TokenAnnotation>(annotate_tokens(cfg, padded));

  ForwardResult result;
  if (opt.keep_attention) result.attention.resize(cfg.layers);
  if (cache) {
    cache->valid = false;
    cache->layers.clear();
    cache->layers.resize(cfg.layers);
  }

  MultiHeadOptions mh;
  mh.mode = cfg.attention_mode;
  mh.block_length = cfg.block_length;
  mh.pitch_time_cap = cfg.pitch_time_max_len;
  mh.dropout = dropout_on ? cfg.dropout : 0.0;
  mh.rng = opt.rng;
  const double ff_dropout = dropout_on ? cfg.dropout : 0.0;
  const double eps = cfg.layer_norm_epsilon;

  Tensor h = positional_signal(cfg, w.embedding, padded);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto& lw = w.layers[l];
    LayerCache* lc = cache ? &cache->layers[l] : nullptr;
    mh.annotation = l == 0 ? annotation.get() : nullptr;
    MultiHeadOutput<double> att;
    if (cfg.norm == NormPlacement::pre) {
      const auto a = layer_norm(h, lw.norm1, eps, lc ? &lc->norm1 : nullptr);
      att = multi_head_attention(a, lw.attention, lw.tables, mh, lc ? &lc->attention : nullptr);
      add_inplace(h, att.out);
      const auto b = layer_norm(h, lw.norm2, eps, lc ? &lc->norm2 : nullptr);
      add_inplace(h, feedforward(b, lw.ff, ff_dropout, opt.rng, lc ? &lc->ff : nullptr));
    } else {
      att = multi_head_attention(h, lw.attention, lw.tables, mh, lc ? &lc->attention : nullptr);
      add_inplace(h, att.out);
      h = layer_norm(h, lw.norm1, eps, lc ? &lc->norm1 : nullptr);
      add_inplace(h, feedforward(h, lw.ff, ff_dropout, opt.rng, lc ? &lc->ff : nullptr));
      h = layer_norm(h, lw.norm2, eps, lc ? &lc->norm2 : nullptr);
    }
    if (opt.keep_attention) result.attention[l] = std::move(att.weights);
  }
  auto y = layer_norm(h, w.final_norm, eps, cache ? &cache->final_norm : nullptr);
  auto logits = matmul(y, w.out_w);
  add_bias(logits, w.out_b);
  if (padded.size() != len) logits = slice(logits, {{0, len}, {0, cfg.vocab_size}});
  result.logits = std::move(logits);

  if (cache) {
    cache->tokens = std::move(padded);
    cache->length = len;
    cache->annotation = std::move(annotation);
    cache->final_out = std::move(y);
    cache->valid = true;
  }
  return result;
}

void backward(const ModelConfig& cfg, const ModelWeights& w, const ForwardCache& cache, const Tensor& d_logits,
              ModelWeights& grads) {
  if (!cache.valid) throw StateError("backward: no forward cache");
  const std::size_t padded = cache.tokens.size(), v = cfg.vocab_size;
  if (d_logits.rows() != cache.length || d_logits.cols() != v) {
    throw DimensionError("backward: d_logits " + shape_str(d_logits.shape()) + " does not match forward output");
  }
  Tensor dl({padded, v});
  std::copy_n(d_logits.data(), d_logits.size(), dl.data());

  add_inplace(grads.out_w, matmul_tn(cache.final_out, dl));
  for (std::size_t r = 0; r < padded; ++r)
    for (std::size_t c = 0; c < v; ++c) grads.out_b[c] += dl(r, c);
  auto dh = layer_norm_backward(cache.final_norm, w.final_norm, matmul_nt(dl, w.out_w), grads.final_norm);

  for (std::size_t li = cfg.layers; li-- > 0;) {
    const auto& lw = w.layers[li];
    const auto& lc = cache.layers[li];
    auto& lg = grads.layers[li];
    auto accumulate_attention = [&](const Tensor& dout) {
      auto g = multi_head_attention_backward(lc.attention, lw.attention, lw.tables, dout);
      add_inplace(lg.attention.wq, g.dwq);
      add_inplace(lg.attention.wk, g.dwk);
      add_inplace(lg.attention.wv, g.dwv);
      add_inplace(lg.attention.wo, g.dwo);
      for (std::size_t hd = 0; hd < g.heads.size(); ++hd) {
        auto& tg = lg.tables[hd];
        const auto& hg = g.heads[hd];
        if (tg.rel && hg.d_rel.size()) add_inplace(tg.rel->weights, hg.d_rel);
        if (tg.left && hg.d_left.size()) add_inplace(tg.left->weights, hg.d_left);
        if (tg.time_table && hg.d_time.size()) add_inplace(*tg.time_table, hg.d_time);
        if (tg.pitch_table && hg.d_pitch.size()) add_inplace(*tg.pitch_table, hg.d_pitch);
      }
      return std::move(g.dx);
    };
    if (cfg.norm == NormPlacement::pre) {
      add_inplace(dh, layer_norm_backward(lc.norm2, lw.norm2, feedforward_backward(lc.ff, lw.ff, dh, lg.ff), lg.norm2));
      add_inplace(dh, layer_norm_backward(lc.norm1, lw.norm1, accumulate_attention(dh), lg.norm1));
    } else {
      auto du = layer_norm_backward(lc.norm2, lw.norm2, dh, lg.norm2);
      dh = add(feedforward_backward(lc.ff, lw.ff, du, lg.ff), du);
      du = layer_norm_backward(lc.norm1, lw.norm1, dh, lg.norm1);
      dh = add(accumulate_attention(du), du);
    }
  }
  positional_signal_backward(cfg, cache.tokens, dh, grads.embedding);
}

double next_token_nll(const Tensor& logits, const std::vector<int>& tokens, Tensor* d_logits) {
  const std::size_t len = tokens.size();
  if (len < 2) throw DimensionError("next_token_nll: need at least two tokens");
  if (logits.rank() != 2 || logits.rows() != len) {
    throw DimensionError("next_token_nll: logits " + shape_str(logits.shape()) + " for " + std::to_string(len) +
                         " tokens");
  }
  const std::size_t v = logits.cols();
  const double inv = 1.0 / static_cast<double>(len - 1);
  if (d_logits) *d_logits = Tensor({len, v});
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < len; ++t) {
    const int target = tokens[t + 1];
    if (target < 0 || static_cast<std::size_t>(target) >= v) {
      throw BoundsError("target token " + std::to_string(target) + " outside vocabulary of " + std::to_string(v));
    }
    const double* row = logits.data() + t * v;
    double mx = row[0];
    for (std::size_t c = 1; c < v; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < v; ++c) sum += std::exp(row[c] - mx);
    const double log_z = mx + std::log(sum);
    total += log_z - row[target];
    if (d_logits) {
      double* g = d_logits->data() + t * v;
      for (std::size_t c = 0; c < v; ++c) g[c] = std::exp(row[c] - log_z) * inv;
      g[target] -= inv;
    }
  }
  return total * inv;
}

double loss_and_gradients(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& tokens,
                          const ForwardOptions& opt, ModelWeights& grads, double weight) {
  ForwardCache cache;
  const auto out = forward(cfg, w, tokens, opt, &cache);
  Tensor dl;
  const double loss = next_token_nll(out.logits, tokens, &dl);
  if (weight != 1.0) scale_inplace(dl, weight);
  backward(cfg, w, cache, dl, grads);
  return loss;
}

double evaluate_nll(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& tokens,
                    const ForwardOptions& opt) {
  ForwardOptions eval = opt;
  eval.training = false;
  return next_token_nll(forward(cfg, w, tokens, eval).logits, tokens);
}

}  // namespace relmusic::model
