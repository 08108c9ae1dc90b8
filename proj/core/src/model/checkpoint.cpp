// SPDX-License-Identifier: Apache-2.0
#include "relmusic/model/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "relmusic/errors.hpp"

namespace relmusic::model {

namespace {

constexpr char kMagic[8] = {'R', 'M', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::uint64_t kMaxNameLength = 4096;
constexpr std::uint64_t kMaxRank = 8;

template <typename V>
void put(std::ostream& out, V value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(V));
}

template <typename V>
V get(std::istream& in, const std::string& path, const char* what) {
  V value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(V))) {
    throw CheckpointError("checkpoint '" + path + "' truncated while reading " + what);
  }
  return value;
}

std::string get_string(std::istream& in, const std::string& path, std::uint64_t limit, const char* what) {
  const auto n = get<std::uint64_t>(in, path, what);
  if (n > limit) throw CheckpointError("checkpoint '" + path + "': implausible " + std::string(what) + " length");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw CheckpointError("checkpoint '" + path + "' truncated while reading " + what);
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelWeights& w, std::uint64_t step) {
  check_weights(cfg, w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, step);
  const std::string config = to_json(cfg).dump();
  put<std::uint64_t>(out, config.size());
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  const auto named = w.named();
  put<std::uint64_t>(out, named.size());
  for (const auto& [name, t] : named) {
    put<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, t->rank());
    for (const auto dim : t->shape()) put<std::uint64_t>(out, dim);
    out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("'" + path + "' is not a relmusic checkpoint");
  }
  const auto version = get<std::uint32_t>(in, path, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint '" + path + "' has format version " + std::to_string(version) +
                          "; this build reads version " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  ck.step = get<std::uint64_t>(in, path, "step");
  const auto config = get_string(in, path, 1 << 20, "config");
  try {
    ck.config = config_from_json(nlohmann::json::parse(config));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint '" + path + "' has an unreadable config: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError("checkpoint '" + path + "' has an invalid config: " + e.what());
  }
  ck.weights = zero_weights(ck.config);
  auto slots = ck.weights.named();
  const auto count = get<std::uint64_t>(in, path, "tensor count");
  if (count != slots.size()) {
    throw CheckpointError("checkpoint '" + path + "' holds " + std::to_string(count) + " tensors; its config needs " +
                          std::to_string(slots.size()));
  }
  for (auto& [expected_name, tensor] : slots) {
    const auto name = get_string(in, path, kMaxNameLength, "tensor name");
    if (name != expected_name) {
      throw CheckpointError("checkpoint '" + path + "': found tensor '" + name + "' where '" + expected_name +
                            "' was expected");
    }
    const auto rank = get<std::uint64_t>(in, path, "rank");
    if (rank > kMaxRank) throw CheckpointError("checkpoint '" + path + "': implausible rank for '" + name + "'");
    Shape shape(rank);
    for (auto& dim : shape) dim = get<std::uint64_t>(in, path, "dims");
    if (shape != tensor->shape()) {
      throw CheckpointError("checkpoint '" + path + "': tensor '" + name + "' has shape " + shape_str(shape) +
                            ", config needs " + shape_str(tensor->shape()));
    }
    if (!in.read(reinterpret_cast<char*>(tensor->data()),
                 static_cast<std::streamsize>(tensor->size() * sizeof(double)))) {
      throw CheckpointError("checkpoint '" + path + "' truncated in tensor '" + name + "'");
    }
  }
  return ck;
}

void require_compatible(const ModelConfig& a, const ModelConfig& b) {
  auto ja = to_json(a);
  auto jb = to_json(b);
  // Regularization and seeding do not change the function a checkpoint computes.
  for (const char* key : {"dropout", "seed"}) {
    ja.erase(key);
    jb.erase(key);
  }
  for (const auto& [key, value] : ja.items()) {
    if (jb[key] != value) {
      throw CheckpointError("checkpoint (format version " + std::to_string(kCheckpointVersion) +
                            ") is incompatible with the config: '" + key + "' is " + value.dump() +
                            " in the checkpoint but " + jb[key].dump() + " in the config");
    }
  }
}

}  // namespace relmusic::model
