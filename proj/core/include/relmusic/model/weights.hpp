// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "relmusic/model/config.hpp"
#include "relmusic/multihead.hpp"
#include "relmusic/tensor.hpp"

namespace relmusic::model {

struct LayerNormWeights {
  Tensor gamma, beta;  // [D]
};

struct FeedForwardWeights {
  Tensor w1, b1, w2, b2;  // D×F, [F], F×D, [D]
};

struct LayerWeights {
  MultiHeadWeights<double> attention;
  std::vector<HeadTables<double>> tables;  // one per head
  LayerNormWeights norm1, norm2;
  FeedForwardWeights ff;
};

/// Every learnable tensor of the decoder. Gradients use the same structure.
struct ModelWeights {
  Tensor embedding;  // vocab × embedding width
  std::vector<LayerWeights> layers;
  LayerNormWeights final_norm;
  Tensor out_w, out_b;  // D×vocab, [vocab]

  /// Stable-ordered view of every tensor with its slot name, e.g.
  /// "layer0.attn.rel_left.h1" or "output.w".
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  std::size_t parameter_count() const;
};

/// Zero-filled weights with every slot shaped for the config.
ModelWeights zero_weights(const ModelConfig& cfg);

/// Fan-in scaled uniform init for projections, small uniform noise for the
/// relative tables, unit layer-norm scales, zero biases.
ModelWeights init_weights(const ModelConfig& cfg, std::mt19937_64& rng);

/// Throws DimensionError unless every slot matches the config's shapes.
void check_weights(const ModelConfig& cfg, const ModelWeights& w);

}  // namespace relmusic::model
