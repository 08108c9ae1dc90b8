// SPDX-License-Identifier: Apache-2.0
#include "relmusic/model/weights.hpp"

#include <cmath>

#include "relmusic/errors.hpp"
#include "relmusic/pitch_time.hpp"

namespace relmusic::model {

namespace {

template <typename Self, typename Out>
void collect(Self& w, Out& out) {
  out.emplace_back("embedding", &w.embedding);
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    auto& layer = w.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    out.emplace_back(p + "attn.wq", &layer.attention.wq);
    out.emplace_back(p + "attn.wk", &layer.attention.wk);
    out.emplace_back(p + "attn.wv", &layer.attention.wv);
    out.emplace_back(p + "attn.wo", &layer.attention.wo);
    for (std::size_t h = 0; h < layer.tables.size(); ++h) {
      auto& t = layer.tables[h];
      const std::string suffix = ".h" + std::to_string(h);
      if (t.rel) out.emplace_back(p + "attn.rel" + suffix, &t.rel->weights);
      if (t.left) out.emplace_back(p + "attn.rel_left" + suffix, &t.left->weights);
      if (t.time_table) out.emplace_back(p + "attn.time" + suffix, &*t.time_table);
      if (t.pitch_table) out.emplace_back(p + "attn.pitch" + suffix, &*t.pitch_table);
    }
    out.emplace_back(p + "norm1.gamma", &layer.norm1.gamma);
    out.emplace_back(p + "norm1.beta", &layer.norm1.beta);
    out.emplace_back(p + "norm2.gamma", &layer.norm2.gamma);
    out.emplace_back(p + "norm2.beta", &layer.norm2.beta);
    out.emplace_back(p + "ff.w1", &layer.ff.w1);
    out.emplace_back(p + "ff.b1", &layer.ff.b1);
    out.emplace_back(p + "ff.w2", &layer.ff.w2);
    out.emplace_back(p + "ff.b2", &layer.ff.b2);
  }
  out.emplace_back("final_norm.gamma", &w.final_norm.gamma);
  out.emplace_back("final_norm.beta", &w.final_norm.beta);
  out.emplace_back("output.w", &w.out_w);
  out.emplace_back("output.b", &w.out_b);
}

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : t.flat()) x = dist(rng);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelWeights::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  collect(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelWeights::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  collect(*this, out);
  return out;
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

ModelWeights zero_weights(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.depth, f = cfg.feedforward_size, v = cfg.vocab_size, dh = cfg.head_dim();
  ModelWeights w;
  w.embedding = Tensor({v, cfg.resolved_embedding_width()});
  w.layers.resize(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    auto& layer = w.layers[l];
    layer.attention = {Tensor({d, d}), Tensor({d, d}), Tensor({d, d}), Tensor({d, d})};
    layer.tables.resize(cfg.heads);
    for (auto& t : layer.tables) {
      if (cfg.use_relative) {
        if (cfg.attention_mode == AttentionMode::global) {
          t.rel = RelativeEmbeddingTable<double>::zeros(TableMode::global, cfg.relative_table_rows(), dh);
        } else {
          t.rel = RelativeEmbeddingTable<double>::zeros(TableMode::global, cfg.block_length, dh);
          t.left = RelativeEmbeddingTable<double>::zeros(TableMode::local_left, 2 * cfg.block_length - 1, dh);
        }
      }
      if (cfg.use_pitch_time_relative && l == 0) {
        t.time_table = Tensor({time_table_rows(cfg.max_time_distance), dh});
        t.pitch_table = Tensor({pitch_table_rows(cfg.max_pitch_interval), dh});
      }
    }
    layer.norm1 = {Tensor({d}), Tensor({d})};
    layer.norm2 = {Tensor({d}), Tensor({d})};
    layer.ff = {Tensor({d, f}), Tensor({f}), Tensor({f, d}), Tensor({d})};
  }
  w.final_norm = {Tensor({d}), Tensor({d})};
  w.out_w = Tensor({d, v});
  w.out_b = Tensor({v});
  return w;
}

ModelWeights init_weights(const ModelConfig& cfg, std::mt19937_64& rng) {
  auto w = zero_weights(cfg);
  constexpr double kTableNoise = 0.05;
  fill_uniform(w.embedding, 1.0, rng);
  const double attn_bound = 1.0 / std::sqrt(static_cast<double>(cfg.depth));
  for (auto& layer : w.layers) {
    fill_uniform(layer.attention.wq, attn_bound, rng);
    fill_uniform(layer.attention.wk, attn_bound, rng);
    fill_uniform(layer.attention.wv, attn_bound, rng);
    fill_uniform(layer.attention.wo, attn_bound, rng);
    for (auto& t : layer.tables) {
      if (t.rel) fill_uniform(t.rel->weights, kTableNoise, rng);
      if (t.left) fill_uniform(t.left->weights, kTableNoise, rng);
      if (t.time_table) fill_uniform(*t.time_table, kTableNoise, rng);
      if (t.pitch_table) fill_uniform(*t.pitch_table, kTableNoise, rng);
    }
    layer.norm1.gamma.fill(1.0);
    layer.norm2.gamma.fill(1.0);
    fill_uniform(layer.ff.w1, attn_bound, rng);
    fill_uniform(layer.ff.w2, 1.0 / std::sqrt(static_cast<double>(cfg.feedforward_size)), rng);
  }
  w.final_norm.gamma.fill(1.0);
  fill_uniform(w.out_w, attn_bound, rng);
  return w;
}

void check_weights(const ModelConfig& cfg, const ModelWeights& w) {
  const auto expected = zero_weights(cfg);
  const auto want = expected.named();
  const auto have = w.named();
  if (want.size() != have.size()) {
    throw DimensionError("model weights: expected " + std::to_string(want.size()) + " tensors, found " +
                         std::to_string(have.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].first != have[i].first) {
      throw DimensionError("model weights: slot " + std::to_string(i) + " is '" + have[i].first + "', expected '" +
                           want[i].first + "'");
    }
    if (want[i].second->shape() != have[i].second->shape()) {
      throw DimensionError("model weights: '" + want[i].first + "' has shape " + shape_str(have[i].second->shape()) +
                           ", expected " + shape_str(want[i].second->shape()));
    }
  }
}

}  // namespace relmusic::model
