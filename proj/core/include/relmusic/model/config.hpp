// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "json.hpp"
#include "relmusic/multihead.hpp"

namespace relmusic::model {

enum class PositionMode {
  add_sinusoid,
  concat_sinusoid,
  concat_sinusoid_and_instrument,
  /// No absolute position signal; order comes only from relative attention.
  none,
};

enum class NormPlacement { pre, post };

/// Source of per-token pitch and time for the first-layer pitch/time logits.
enum class AnnotationCodec { jsb_grid, performance };

struct ModelConfig {
  std::size_t vocab_size = 129;
  std::size_t max_len = 128;
  std::size_t depth = 128;
  std::size_t heads = 4;
  std::size_t layers = 3;
  std::size_t feedforward_size = 512;
  AttentionMode attention_mode = AttentionMode::global;
  std::size_t block_length = 0;  // local mode only
  PositionMode position_mode = PositionMode::add_sinusoid;
  /// Concat modes: channels for the token embedding and the sinusoid bank.
  /// Zero means derive: sinusoid gets half of what the instrument labels leave.
  std::size_t embedding_width = 0;
  std::size_t sinusoid_width = 0;
  /// Global mode: farthest distinct distance; 0 means max_len / 2.
  std::size_t relative_max_distance = 0;
  bool use_relative = true;
  bool use_pitch_time_relative = false;
  AnnotationCodec annotation_codec = AnnotationCodec::jsb_grid;
  std::size_t max_time_distance = 32;
  std::size_t max_pitch_interval = 24;
  std::size_t pitch_time_max_len = 2048;
  double dropout = 0.1;
  NormPlacement norm = NormPlacement::pre;
  double layer_norm_epsilon = 1e-5;
  std::uint64_t seed = 1;

  std::size_t head_dim() const { return depth / heads; }
  std::size_t instrument_width() const {
    return position_mode == PositionMode::concat_sinusoid_and_instrument ? 4 : 0;
  }
  /// Resolved widths after applying the derivation rules.
  std::size_t resolved_sinusoid_width() const;
  std::size_t resolved_embedding_width() const;
  /// Number of rows in a global-mode relative table.
  std::size_t relative_table_rows() const;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

/// Exact learnable-parameter count implied by the config.
std::size_t parameter_count(const ModelConfig& cfg);

nlohmann::json to_json(const ModelConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig config_from_json(const nlohmann::json& j);
ModelConfig load_config_file(const std::string& path);
void save_config_file(const ModelConfig& cfg, const std::string& path);

std::string to_string(PositionMode mode);
std::string to_string(AttentionMode mode);

}  // namespace relmusic::model
