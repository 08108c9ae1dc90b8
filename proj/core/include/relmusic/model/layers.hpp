// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "relmusic/model/config.hpp"
#include "relmusic/model/weights.hpp"
#include "relmusic/tensor.hpp"

namespace relmusic::model {

/// Sinusoid bank rows for positions [first, first + count): channel 2i holds
/// sin(pos / 10000^(2i/width)), channel 2i+1 the matching cosine.
Tensor sinusoid_bank(std::size_t first, std::size_t count, std::size_t width);

/// Input representation [len × D] for the position mode: token embeddings
/// plus (or concatenated with) sinusoids and, for the instrument mode, a
/// one-hot voice label (voice = position mod 4) in the last four channels.
Tensor positional_signal(const ModelConfig& cfg, const Tensor& embedding, const std::vector<int>& tokens);

/// Accumulates d_input's token-embedding channels into d_embedding rows.
void positional_signal_backward(const ModelConfig& cfg, const std::vector<int>& tokens, const Tensor& d_input,
                                Tensor& d_embedding);

struct LayerNormCache {
  Tensor xhat;
  std::vector<double> rstd;
};

/// Per-row normalization to zero mean and unit variance, then gamma * x + beta.
Tensor layer_norm(const Tensor& x, const LayerNormWeights& w, double epsilon, LayerNormCache* cache = nullptr);
Tensor layer_norm_backward(const LayerNormCache& cache, const LayerNormWeights& w, const Tensor& dy,
                           LayerNormWeights& grads);

struct FeedForwardCache {
  Tensor z, pre, act;
  std::optional<Tensor> keep;  // dropout multipliers
};

/// ReLU(z W1 + b1) W2 + b2 per position, with dropout on the ReLU output.
Tensor feedforward(const Tensor& z, const FeedForwardWeights& w, double dropout = 0.0,
                   std::mt19937_64* rng = nullptr, FeedForwardCache* cache = nullptr);
Tensor feedforward_backward(const FeedForwardCache& cache, const FeedForwardWeights& w, const Tensor& dout,
                            FeedForwardWeights& grads);

}  // namespace relmusic::model
