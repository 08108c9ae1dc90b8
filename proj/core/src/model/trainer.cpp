// SPDX-License-Identifier: Apache-2.0
#include "relmusic/model/trainer.hpp"

#include <cmath>
#include <limits>

#include "relmusic/errors.hpp"
#include "relmusic/model/decoder.hpp"

namespace relmusic::model {

namespace {

template <typename V>
void read_key(const nlohmann::json& j, const char* key, V& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number()) throw ConfigError(std::string("train config key '") + key + "' must be a number");
  if constexpr (std::is_integral_v<V>) {
    if (!it->is_number_integer() || it->template get<std::int64_t>() < 0) {
      throw ConfigError(std::string("train config key '") + key + "' must be a non-negative integer");
    }
  }
  out = it->template get<V>();
}

}  // namespace

nlohmann::json to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"crop_length", c.crop_length},
          {"learning_rate", c.adam.learning_rate},
          {"warmup_steps", c.adam.warmup_steps},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"adam_epsilon", c.adam.epsilon},
          {"clip_norm", c.adam.clip_norm},
          {"eval_every", c.eval_every},
          {"eval_crops", c.eval_crops},
          {"patience", c.patience},
          {"min_delta", c.min_delta},
          {"target_nll", c.target_nll},
          {"checkpoint_every", c.checkpoint_every},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const char* known[] = {"steps",      "batch_size", "crop_length", "learning_rate", "warmup_steps",
                                "beta1",      "beta2",      "adam_epsilon", "clip_norm",    "eval_every",
                                "eval_crops", "patience",   "min_delta",  "target_nll",   "checkpoint_every", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
      throw ConfigError("train config: unknown key '" + key + "'");
    }
  }
  read_key(j, "steps", c.steps);
  read_key(j, "batch_size", c.batch_size);
  read_key(j, "crop_length", c.crop_length);
  read_key(j, "learning_rate", c.adam.learning_rate);
  read_key(j, "warmup_steps", c.adam.warmup_steps);
  read_key(j, "beta1", c.adam.beta1);
  read_key(j, "beta2", c.adam.beta2);
  read_key(j, "adam_epsilon", c.adam.epsilon);
  read_key(j, "clip_norm", c.adam.clip_norm);
  read_key(j, "eval_every", c.eval_every);
  read_key(j, "eval_crops", c.eval_crops);
  read_key(j, "patience", c.patience);
  read_key(j, "min_delta", c.min_delta);
  read_key(j, "target_nll", c.target_nll);
  read_key(j, "checkpoint_every", c.checkpoint_every);
  read_key(j, "seed", c.seed);
  if (c.batch_size == 0) throw ConfigError("train config: batch_size must be positive");
  return c;
}

double corpus_nll(const ModelConfig& cfg, const ModelWeights& w, const std::vector<std::vector<int>>& crops,
                  bool extrapolate_positions) {
  ForwardOptions opt;
  opt.allow_longer = extrapolate_positions || cfg.position_mode == PositionMode::none;
  opt.extrapolate_positions = extrapolate_positions;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& crop : crops) {
    if (crop.size() < 2) continue;
    const std::size_t n = crop.size() - 1;
    total += evaluate_nll(cfg, w, crop, opt) * static_cast<double>(n);
    count += n;
  }
  if (count == 0) throw ConfigError("evaluation set has no sequence of two or more tokens");
  return total / static_cast<double>(count);
}

TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg, const Corpus& train_set, const Corpus* val_set,
                  const TrainCallbacks& callbacks) {
  cfg.validate();
  check_vocabulary(train_set, cfg.vocab_size);
  if (val_set) check_vocabulary(*val_set, cfg.vocab_size);
  const std::size_t crop = tcfg.crop_length ? tcfg.crop_length : cfg.max_len;
  if (crop > cfg.max_len) throw ConfigError("crop_length exceeds the model's max_len");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (train_set.sequences[i].size() >= 2) usable.push_back(i);
  }
  if (usable.empty()) throw ConfigError("training corpus has no sequence of two or more tokens");

  std::mt19937_64 init_rng(cfg.seed);
  TrainResult result;
  result.weights = init_weights(cfg, init_rng);
  result.best_val_nll = std::numeric_limits<double>::infinity();
  Adam adam(tcfg.adam, result.weights);
  std::mt19937_64 rng(tcfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);

  std::vector<std::vector<int>> val_crops;
  if (val_set && tcfg.eval_every > 0) val_crops = tile_crops(*val_set, crop, tcfg.eval_crops);
  std::size_t stale = 0;
  bool have_best = false;

  ForwardOptions fwd;
  fwd.training = true;
  fwd.rng = &rng;
  for (std::size_t step = 1; step <= tcfg.steps; ++step) {
    auto grads = zero_weights(cfg);
    double loss = 0.0;
    const double weight = 1.0 / static_cast<double>(tcfg.batch_size);
    for (std::size_t b = 0; b < tcfg.batch_size; ++b) {
      const auto seq = random_crop(train_set.sequences[usable[pick(rng)]], crop, rng);
      loss += loss_and_gradients(cfg, result.weights, seq, fwd, grads, weight) * weight;
    }
    if (!std::isfinite(loss)) {
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": loss is " +
                            std::to_string(loss) + "; lower learning_rate or raise warmup_steps");
    }
    const double norm = adam.step(result.weights, grads);
    if (!std::isfinite(norm)) {
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": gradient norm is " +
                            std::to_string(norm) + "; lower learning_rate or raise warmup_steps");
    }
    StepMetrics m{step, loss, norm, adam.last_learning_rate()};
    result.history.push_back(m);
    result.steps_taken = step;
    if (callbacks.on_step) callbacks.on_step(m);
    if (callbacks.on_checkpoint && tcfg.checkpoint_every && step % tcfg.checkpoint_every == 0) {
      callbacks.on_checkpoint(step, result.weights);
    }
    if (!val_crops.empty() && step % tcfg.eval_every == 0) {
      const double nll = corpus_nll(cfg, result.weights, val_crops);
      EvalMetrics e{step, nll};
      result.evals.push_back(e);
      if (callbacks.on_eval) callbacks.on_eval(e);
      const bool reached = tcfg.target_nll > 0.0 && nll <= tcfg.target_nll;
      if (nll < result.best_val_nll - tcfg.min_delta || !have_best) {
        result.best_val_nll = std::min(result.best_val_nll, nll);
        result.best_step = step;
        result.best_weights = result.weights;
        have_best = true;
        stale = 0;
      } else if (tcfg.patience && ++stale >= tcfg.patience) {
        result.stopped_early = true;
        break;
      }
      if (reached) {
        result.reached_target = true;
        break;
      }
    }
  }
  if (!have_best) {
    result.best_weights = result.weights;
    result.best_step = result.steps_taken;
  }
  return result;
}

}  // namespace relmusic::model
