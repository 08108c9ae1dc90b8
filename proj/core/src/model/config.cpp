// SPDX-License-Identifier: Apache-2.0
#include "relmusic/model/config.hpp"

#include <fstream>
#include <set>

#include "relmusic/errors.hpp"
#include "relmusic/pitch_time.hpp"

namespace relmusic::model {

namespace {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<PositionMode> kPositionNames[] = {
    {PositionMode::add_sinusoid, "add_sinusoid"},
    {PositionMode::concat_sinusoid, "concat_sinusoid"},
    {PositionMode::concat_sinusoid_and_instrument, "concat_sinusoid_and_instrument"},
    {PositionMode::none, "none"},
};
constexpr EnumName<AttentionMode> kAttentionNames[] = {
    {AttentionMode::global, "global"},
    {AttentionMode::local, "local"},
};
constexpr EnumName<NormPlacement> kNormNames[] = {
    {NormPlacement::pre, "pre"},
    {NormPlacement::post, "post"},
};
constexpr EnumName<AnnotationCodec> kCodecNames[] = {
    {AnnotationCodec::jsb_grid, "jsb_grid"},
    {AnnotationCodec::performance, "performance"},
};

template <typename E, std::size_t N>
std::string name_of(const EnumName<E> (&table)[N], E value) {
  for (const auto& e : table) {
    if (e.value == value) return e.name;
  }
  return "?";
}

template <typename E, std::size_t N>
E parse_enum(const EnumName<E> (&table)[N], const nlohmann::json& j, const char* key) {
  if (!j.is_string()) throw ConfigError(std::string("config key '") + key + "' must be a string");
  const auto s = j.get<std::string>();
  std::string options;
  for (const auto& e : table) {
    if (s == e.name) return e.value;
    options += options.empty() ? "" : ", ";
    options += e.name;
  }
  throw ConfigError(std::string("config key '") + key + "': unknown value '" + s + "' (expected " + options + ")");
}

template <typename V>
void read_number(const nlohmann::json& j, const char* key, V& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if constexpr (std::is_same_v<V, bool>) {
    if (!it->is_boolean()) throw ConfigError(std::string("config key '") + key + "' must be true or false");
  } else if constexpr (std::is_floating_point_v<V>) {
    if (!it->is_number()) throw ConfigError(std::string("config key '") + key + "' must be a number");
  } else {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<std::int64_t>() >= 0)) {
      throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
    }
  }
  out = it->template get<V>();
}

}  // namespace

std::string to_string(PositionMode mode) { return name_of(kPositionNames, mode); }
std::string to_string(AttentionMode mode) { return name_of(kAttentionNames, mode); }

std::size_t ModelConfig::resolved_sinusoid_width() const {
  switch (position_mode) {
    case PositionMode::none:
      return 0;
    case PositionMode::add_sinusoid:
      return depth;
    default:
      break;
  }
  if (sinusoid_width != 0) return sinusoid_width;
  if (embedding_width != 0) return depth - std::min(depth, embedding_width + instrument_width());
  return (depth - std::min(depth, instrument_width())) / 2;
}

std::size_t ModelConfig::resolved_embedding_width() const {
  if (position_mode == PositionMode::none || position_mode == PositionMode::add_sinusoid) return depth;
  if (embedding_width != 0) return embedding_width;
  return depth - std::min(depth, resolved_sinusoid_width() + instrument_width());
}

std::size_t ModelConfig::relative_table_rows() const {
  const std::size_t max_distance = relative_max_distance != 0 ? relative_max_distance : max_len / 2;
  return max_distance + 1;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (vocab_size == 0) fail("vocab_size must be positive");
  if (max_len == 0) fail("max_len must be positive");
  if (depth == 0 || heads == 0) fail("depth and heads must be positive");
  if (depth % heads != 0) {
    fail("depth " + std::to_string(depth) + " is not divisible by heads " + std::to_string(heads));
  }
  if (layers == 0) fail("layers must be positive");
  if (feedforward_size == 0) fail("feedforward_size must be positive");
  if (attention_mode == AttentionMode::local) {
    if (block_length == 0) fail("local attention needs block_length > 0");
    if (max_len % block_length != 0) {
      fail("max_len " + std::to_string(max_len) + " is not divisible by block_length " +
           std::to_string(block_length));
    }
  }
  if (position_mode == PositionMode::concat_sinusoid ||
      position_mode == PositionMode::concat_sinusoid_and_instrument) {
    const auto e = resolved_embedding_width();
    const auto s = resolved_sinusoid_width();
    if (e + s + instrument_width() != depth) {
      fail("concat widths embedding " + std::to_string(e) + " + sinusoid " + std::to_string(s) + " + instrument " +
           std::to_string(instrument_width()) + " do not sum to depth " + std::to_string(depth));
    }
    if (e == 0 || s == 0) fail("concat modes need non-zero embedding and sinusoid widths");
    if (s % 2 != 0) fail("sinusoid_width must be even");
  } else if (depth % 2 != 0 && position_mode == PositionMode::add_sinusoid) {
    fail("add_sinusoid needs an even depth");
  }
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (layer_norm_epsilon <= 0.0) fail("layer_norm_epsilon must be positive");
  if (use_pitch_time_relative && (max_time_distance == 0 || max_pitch_interval == 0)) {
    fail("pitch/time logits need max_time_distance and max_pitch_interval > 0");
  }
}

std::size_t parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.depth, f = cfg.feedforward_size, v = cfg.vocab_size;
  std::size_t relative = 0;
  if (cfg.use_relative) {
    relative = cfg.attention_mode == AttentionMode::global ? cfg.relative_table_rows() * d
                                                           : (2 * cfg.block_length - 1 + cfg.block_length) * d;
  }
  const std::size_t norm = 4 * d;
  const std::size_t per_layer = 4 * d * d + relative + 2 * d * f + f + d + norm;
  std::size_t pitch_time = 0;
  if (cfg.use_pitch_time_relative) {
    pitch_time = (time_table_rows(cfg.max_time_distance) + pitch_table_rows(cfg.max_pitch_interval)) * d;
  }
  const std::size_t embedding = v * cfg.resolved_embedding_width();
  const std::size_t head = 2 * d + d * v + v;  // final norm + output projection
  return embedding + cfg.layers * per_layer + pitch_time + head;
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {
      {"vocab_size", cfg.vocab_size},
      {"max_len", cfg.max_len},
      {"depth", cfg.depth},
      {"heads", cfg.heads},
      {"layers", cfg.layers},
      {"feedforward_size", cfg.feedforward_size},
      {"attention_mode", name_of(kAttentionNames, cfg.attention_mode)},
      {"block_length", cfg.block_length},
      {"position_mode", name_of(kPositionNames, cfg.position_mode)},
      {"embedding_width", cfg.embedding_width},
      {"sinusoid_width", cfg.sinusoid_width},
      {"relative_max_distance", cfg.relative_max_distance},
      {"use_relative", cfg.use_relative},
      {"use_pitch_time_relative", cfg.use_pitch_time_relative},
      {"annotation_codec", name_of(kCodecNames, cfg.annotation_codec)},
      {"max_time_distance", cfg.max_time_distance},
      {"max_pitch_interval", cfg.max_pitch_interval},
      {"pitch_time_max_len", cfg.pitch_time_max_len},
      {"dropout", cfg.dropout},
      {"norm", name_of(kNormNames, cfg.norm)},
      {"layer_norm_epsilon", cfg.layer_norm_epsilon},
      {"seed", cfg.seed},
  };
}

ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  static const std::set<std::string> known = {
      "vocab_size", "max_len", "depth", "heads", "layers", "feedforward_size", "attention_mode", "block_length",
      "position_mode", "embedding_width", "sinusoid_width", "relative_max_distance", "use_relative",
      "use_pitch_time_relative", "annotation_codec", "max_time_distance", "max_pitch_interval",
      "pitch_time_max_len", "dropout", "norm", "layer_norm_epsilon", "seed", "train"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("model config: unknown key '" + key + "'");
  }
  ModelConfig cfg;
  read_number(j, "vocab_size", cfg.vocab_size);
  read_number(j, "max_len", cfg.max_len);
  read_number(j, "depth", cfg.depth);
  read_number(j, "heads", cfg.heads);
  read_number(j, "layers", cfg.layers);
  read_number(j, "feedforward_size", cfg.feedforward_size);
  if (j.contains("attention_mode")) cfg.attention_mode = parse_enum(kAttentionNames, j["attention_mode"], "attention_mode");
  read_number(j, "block_length", cfg.block_length);
  if (j.contains("position_mode")) cfg.position_mode = parse_enum(kPositionNames, j["position_mode"], "position_mode");
  read_number(j, "embedding_width", cfg.embedding_width);
  read_number(j, "sinusoid_width", cfg.sinusoid_width);
  read_number(j, "relative_max_distance", cfg.relative_max_distance);
  read_number(j, "use_relative", cfg.use_relative);
  read_number(j, "use_pitch_time_relative", cfg.use_pitch_time_relative);
  if (j.contains("annotation_codec")) {
    cfg.annotation_codec = parse_enum(kCodecNames, j["annotation_codec"], "annotation_codec");
  }
  read_number(j, "max_time_distance", cfg.max_time_distance);
  read_number(j, "max_pitch_interval", cfg.max_pitch_interval);
  read_number(j, "pitch_time_max_len", cfg.pitch_time_max_len);
  read_number(j, "dropout", cfg.dropout);
  if (j.contains("norm")) cfg.norm = parse_enum(kNormNames, j["norm"], "norm");
  read_number(j, "layer_norm_epsilon", cfg.layer_norm_epsilon);
  read_number(j, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

ModelConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config_file(const ModelConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << to_json(cfg).dump(2) << '\n';
}

}  // namespace relmusic::model
