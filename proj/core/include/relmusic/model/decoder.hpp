// SPDX-License-Identifier: Apache-2.0
//
// Decoder stack. Pre-norm layer:
//   h += MHA(LN1(h));  h += FF(LN2(h))
// Post-norm layer:
//   h = LN1(h + MHA(h));  h = LN2(h + FF(h))
// followed by a final layer norm and the output projection.

#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <vector>

#include "relmusic/model/config.hpp"
#include "relmusic/model/layers.hpp"
#include "relmusic/model/weights.hpp"
#include "relmusic/multihead.hpp"
#include "relmusic/pitch_time.hpp"

namespace relmusic::model {

/// Per-token pitch and time step for the first-layer pitch/time logits.
/// JSB grids: pitch is the token unless it is the rest token, time is
/// position / 4. Performance events: NOTE_ON tokens carry their pitch, time is
/// elapsed milliseconds in 125 ms steps.
TokenAnnotation annotate_tokens(const ModelConfig& cfg, const std::vector<int>& tokens);

struct ForwardOptions {
  /// Enables dropout; requires rng when the configured rate is non-zero.
  bool training = false;
  std::mt19937_64* rng = nullptr;
  /// Accept sequences longer than max_len. Relative distances clip; models
  /// with an absolute position signal still refuse unless
  /// extrapolate_positions is also set.
  bool allow_longer = false;
  bool extrapolate_positions = false;
  /// Return post-softmax attention weights for every layer and head.
  bool keep_attention = false;
};

struct LayerCache {
  LayerNormCache norm1, norm2;
  MultiHeadCache<double> attention;
  FeedForwardCache ff;
};

struct ForwardCache {
  std::vector<int> tokens;  // padded to a whole number of blocks in local mode
  std::size_t length = 0;   // caller's sequence length
  std::shared_ptr<const TokenAnnotation> annotation;
  std::vector<LayerCache> layers;
  LayerNormCache final_norm;
  Tensor final_out;
  bool valid = false;
};

struct ForwardResult {
  Tensor logits;  // length × vocab
  /// attention[layer][head]: one L×L matrix (global) or N×2N per block
  /// (local, over the padded length).
  std::vector<std::vector<std::vector<Tensor>>> attention;
};

ForwardResult forward(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& tokens,
                      const ForwardOptions& opt = {}, ForwardCache* cache = nullptr);

/// Accumulates parameter gradients for d(loss)/d(logits) into grads.
void backward(const ModelConfig& cfg, const ModelWeights& w, const ForwardCache& cache, const Tensor& d_logits,
              ModelWeights& grads);

/// Mean next-token cross-entropy in nats: logits row t predicts tokens[t+1].
/// Writes d(loss)/d(logits) when d_logits is given.
double next_token_nll(const Tensor& logits, const std::vector<int>& tokens, Tensor* d_logits = nullptr);

/// forward + next_token_nll + backward; gradients are added to grads scaled by `weight`.
double loss_and_gradients(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& tokens,
                          const ForwardOptions& opt, ModelWeights& grads, double weight = 1.0);

/// Mean NLL of a sequence without dropout.
double evaluate_nll(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& tokens,
                    const ForwardOptions& opt = {});

}  // namespace relmusic::model
