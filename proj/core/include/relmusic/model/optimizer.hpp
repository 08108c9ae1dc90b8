// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "relmusic/model/weights.hpp"

namespace relmusic::model {

struct AdamConfig {
  double learning_rate = 1e-3;  // peak, reached at the end of warmup
  std::size_t warmup_steps = 200;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 1.0;
};

/// Linear warmup then inverse-square-root decay; step counts from 1.
double learning_rate_at(const AdamConfig& cfg, std::size_t step);

double global_norm(const ModelWeights& grads);

class Adam {
 public:
  Adam(const AdamConfig& cfg, const ModelWeights& like);

  /// Clips, then applies one update. Returns the pre-clip gradient norm.
  double step(ModelWeights& weights, ModelWeights& grads);
  std::size_t steps_taken() const { return step_; }
  double last_learning_rate() const { return last_lr_; }

 private:
  AdamConfig cfg_;
  ModelWeights m_, v_;
  std::size_t step_ = 0;
  double last_lr_ = 0.0;
};

}  // namespace relmusic::model
