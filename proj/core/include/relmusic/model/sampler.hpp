// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "relmusic/model/config.hpp"
#include "relmusic/model/weights.hpp"

namespace relmusic::model {

/// Attention of the query that produced one sampled token, for one layer and
/// head. weights[k] belongs to key position key_start + k.
struct TraceRow {
  std::size_t query = 0;
  std::size_t layer = 0;
  std::size_t head = 0;
  std::size_t key_start = 0;
  std::vector<double> weights;
};

struct AttentionTrace {
  std::vector<TraceRow> rows;

  nlohmann::json to_json() const;
};

struct SampleOptions {
  std::size_t length = 0;  // total output length including the prime
  double temperature = 1.0;  // 0 = argmax
  std::uint64_t seed = 1;
  bool trace = false;
  /// Let absolute-position models run past max_len (off by default: refused).
  bool extrapolate_positions = false;
};

struct SampleResult {
  std::vector<int> tokens;
  AttentionTrace trace;
};

/// Autoregressive sampling; the prime is copied verbatim as the prefix.
/// Lengths past max_len are allowed for position_mode none (relative
/// distances clip) and refused with ConfigError for absolute positions.
SampleResult sample(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& prime,
                    const SampleOptions& opt);

}  // namespace relmusic::model
