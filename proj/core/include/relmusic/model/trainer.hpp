// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "relmusic/model/config.hpp"
#include "relmusic/model/corpus.hpp"
#include "relmusic/model/optimizer.hpp"
#include "relmusic/model/weights.hpp"

namespace relmusic::model {

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 8;
  /// Crop length; 0 uses the model's max_len.
  std::size_t crop_length = 0;
  AdamConfig adam;
  /// Validation every eval_every steps (0 = never) over at most eval_crops crops.
  std::size_t eval_every = 100;
  std::size_t eval_crops = 64;
  /// Stop after this many evaluations without an improvement of min_delta (0 = never).
  std::size_t patience = 0;
  double min_delta = 0.0;
  /// Stop once validation NLL reaches this value (0 = never).
  double target_nll = 0.0;
  /// Checkpoint callback period in steps (0 = never).
  std::size_t checkpoint_every = 0;
  std::uint64_t seed = 1;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Reads the "train" object of a config document (missing keys keep defaults).
TrainConfig train_config_from_json(const nlohmann::json& j);

struct StepMetrics {
  std::size_t step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double learning_rate = 0.0;
};

struct EvalMetrics {
  std::size_t step = 0;
  double nll = 0.0;
};

struct TrainCallbacks {
  std::function<void(const StepMetrics&)> on_step;
  std::function<void(const EvalMetrics&)> on_eval;
  std::function<void(std::size_t step, const ModelWeights&)> on_checkpoint;
};

struct TrainResult {
  ModelWeights weights;       // after the last step taken
  ModelWeights best_weights;  // at the best validation NLL (== weights without validation)
  std::size_t steps_taken = 0;
  bool stopped_early = false;
  bool reached_target = false;
  double best_val_nll = 0.0;
  std::size_t best_step = 0;
  std::vector<StepMetrics> history;
  std::vector<EvalMetrics> evals;
};

/// Mean next-token NLL over crops, weighted by predicted positions.
double corpus_nll(const ModelConfig& cfg, const ModelWeights& w, const std::vector<std::vector<int>>& crops,
                  bool extrapolate_positions = false);

/// Trains from the config's seeded initialization. Deterministic for fixed
/// configs and data. Throws DivergenceError on a non-finite loss or gradient.
TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg, const Corpus& train_set, const Corpus* val_set,
                  const TrainCallbacks& callbacks = {});

}  // namespace relmusic::model
