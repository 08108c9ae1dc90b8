// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "relmusic/model/config.hpp"
#include "relmusic/model/weights.hpp"

namespace relmusic::model {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_slot;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
  /// Entries whose probes flipped a ReLU unit; excluded from the maximum.
  std::size_t kinks_skipped = 0;
};

struct GradCheckOptions {
  /// Step of the five-point stencil (probes at ±h and ±2h).
  double step = 3e-4;
  /// Denominator floor: |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Check at most this many entries per slot (evenly strided); 0 checks all.
  std::size_t max_per_slot = 0;
};

/// Compares backward() against five-point central differences of next_token_nll on
/// `tokens` for every learnable tensor. Dropout is disabled.
GradCheckReport gradient_check(const ModelConfig& cfg, ModelWeights& w, const std::vector<int>& tokens,
                               const GradCheckOptions& opt = {});

}  // namespace relmusic::model
