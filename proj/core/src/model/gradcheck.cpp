// SPDX-License-Identifier: Apache-2.0
#include "relmusic/model/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "relmusic/model/decoder.hpp"

namespace relmusic::model {

GradCheckReport gradient_check(const ModelConfig& cfg, ModelWeights& w, const std::vector<int>& tokens,
                               const GradCheckOptions& opt) {
  ModelConfig eval_cfg = cfg;
  eval_cfg.dropout = 0.0;
  auto grads = zero_weights(eval_cfg);
  loss_and_gradients(eval_cfg, w, tokens, ForwardOptions{}, grads);

  // Probes that flip a ReLU unit straddle a kink, where the difference
  // quotient does not estimate the derivative at the point.
  auto loss_and_pattern = [&](std::vector<bool>& pattern) {
    ForwardCache cache;
    const auto logits = forward(eval_cfg, w, tokens, ForwardOptions{}, &cache).logits;
    pattern.clear();
    for (const auto& layer : cache.layers)
      for (const double v : layer.ff.pre.flat()) pattern.push_back(v > 0.0);
    return next_token_nll(logits, tokens);
  };
  std::vector<bool> base_pattern, probe_pattern;
  loss_and_pattern(base_pattern);

  GradCheckReport report;
  auto params = w.named();
  const auto analytic = grads.named();
  for (std::size_t s = 0; s < params.size(); ++s) {
    auto& tensor = *params[s].second;
    const std::size_t n = tensor.size();
    const std::size_t stride = opt.max_per_slot == 0 || n <= opt.max_per_slot ? 1 : n / opt.max_per_slot;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = tensor.data()[i];
      const double h = opt.step;
      bool kink = false;
      auto loss_at = [&](double offset) {
        tensor.data()[i] = saved + offset;
        const double loss = loss_and_pattern(probe_pattern);
        kink |= probe_pattern != base_pattern;
        return loss;
      };
      const double numeric = (loss_at(-2 * h) - 8 * loss_at(-h) + 8 * loss_at(h) - loss_at(2 * h)) / (12 * h);
      tensor.data()[i] = saved;
      if (kink) {
        ++report.kinks_skipped;
        continue;
      }
      const double a = analytic[s].second->data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
      const double err = std::abs(a - numeric) / denom;
      ++report.checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_slot = params[s].first;
        report.worst_index = i;
        report.analytic_at_worst = a;
        report.numeric_at_worst = numeric;
      }
    }
  }
  return report;
}

}  // namespace relmusic::model
