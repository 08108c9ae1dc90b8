// SPDX-License-Identifier: Apache-2.0
#include "relmusic/model/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "relmusic/errors.hpp"

namespace relmusic::model {

namespace {

ModelWeights zeros_like(const ModelWeights& like) {
  ModelWeights z = like;
  for (auto& [name, t] : z.named()) t->fill(0.0);
  return z;
}

}  // namespace

double learning_rate_at(const AdamConfig& cfg, std::size_t step) {
  if (step == 0) return 0.0;
  const auto s = static_cast<double>(step);
  const auto w = static_cast<double>(std::max<std::size_t>(cfg.warmup_steps, 1));
  return cfg.learning_rate * std::min(s / w, std::sqrt(w / s));
}

double global_norm(const ModelWeights& grads) {
  double sum = 0.0;
  for (const auto& [name, t] : grads.named())
    for (const double g : t->flat()) sum += g * g;
  return std::sqrt(sum);
}

Adam::Adam(const AdamConfig& cfg, const ModelWeights& like) : cfg_(cfg), m_(zeros_like(like)), v_(zeros_like(like)) {
  if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
    throw ConfigError("Adam betas must be in [0, 1)");
  }
}

double Adam::step(ModelWeights& weights, ModelWeights& grads) {
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) return norm;
  const double clip = cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;
  ++step_;
  last_lr_ = learning_rate_at(cfg_, step_);
  const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  auto params = weights.named();
  auto gs = grads.named();
  auto ms = m_.named();
  auto vs = v_.named();
  for (std::size_t s = 0; s < params.size(); ++s) {
    double* p = params[s].second->data();
    const double* g = gs[s].second->data();
    double* m = ms[s].second->data();
    double* v = vs[s].second->data();
    const std::size_t n = params[s].second->size();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i] * clip;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      p[i] -= last_lr_ * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
  return norm;
}

}  // namespace relmusic::model
