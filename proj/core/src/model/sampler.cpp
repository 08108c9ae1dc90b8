// SPDX-License-Identifier: Apache-2.0
#include "relmusic/model/sampler.hpp"

#include <cmath>
#include <random>

#include "relmusic/errors.hpp"
#include "relmusic/model/decoder.hpp"

namespace relmusic::model {

nlohmann::json AttentionTrace::to_json() const {
  auto rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back(
        {{"query", r.query}, {"layer", r.layer}, {"head", r.head}, {"key_start", r.key_start}, {"weights", r.weights}});
  }
  return {{"rows", std::move(rows_json)}};
}

namespace {

int choose(const double* logits, std::size_t v, double temperature, std::mt19937_64& rng) {
  if (temperature == 0.0) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < v; ++c) {
      if (logits[c] > logits[best]) best = c;
    }
    return static_cast<int>(best);
  }
  double mx = logits[0] / temperature;
  for (std::size_t c = 1; c < v; ++c) mx = std::max(mx, logits[c] / temperature);
  std::vector<double> p(v);
  double sum = 0.0;
  for (std::size_t c = 0; c < v; ++c) sum += p[c] = std::exp(logits[c] / temperature - mx);
  const double u = std::uniform_real_distribution<double>(0.0, sum)(rng);
  double acc = 0.0;
  for (std::size_t c = 0; c < v; ++c) {
    acc += p[c];
    if (u < acc) return static_cast<int>(c);
  }
  return static_cast<int>(v - 1);
}

void record(const ModelConfig& cfg, const std::vector<std::vector<std::vector<Tensor>>>& attention,
            std::size_t query, AttentionTrace& trace) {
  for (std::size_t l = 0; l < attention.size(); ++l) {
    for (std::size_t h = 0; h < attention[l].size(); ++h) {
      TraceRow row{query, l, h, 0, {}};
      if (cfg.attention_mode == AttentionMode::global) {
        const auto& m = attention[l][h][0];
        row.weights.assign(m.data() + query * m.cols(), m.data() + query * m.cols() + query + 1);
      } else {
        const std::size_t n = cfg.block_length, b = query / n, r = query % n;
        const auto& m = attention[l][h][b];
        const double* src = m.data() + r * m.cols();
        // Columns 0..N-1 are the previous block, N..2N-1 the current one.
        const std::size_t first_col = b == 0 ? n : 0;
        row.key_start = b == 0 ? 0 : (b - 1) * n;
        row.weights.assign(src + first_col, src + n + r + 1);
      }
      trace.rows.push_back(std::move(row));
    }
  }
}

}  // namespace

SampleResult sample(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& prime,
                    const SampleOptions& opt) {
  if (prime.empty()) throw ConfigError("sample: the prime needs at least one token");
  if (opt.length <= prime.size()) {
    throw ConfigError("sample: length " + std::to_string(opt.length) + " must exceed the prime length " +
                      std::to_string(prime.size()));
  }
  if (!(opt.temperature >= 0.0) || !std::isfinite(opt.temperature)) {
    throw ConfigError("sample: temperature must be a finite value >= 0");
  }
  if (opt.length > cfg.max_len && cfg.position_mode != PositionMode::none && !opt.extrapolate_positions) {
    throw ConfigError("sample: length " + std::to_string(opt.length) + " exceeds max_len " +
                      std::to_string(cfg.max_len) + "; position_mode " + to_string(cfg.position_mode) +
                      " has no trained positions beyond it. Only position_mode none (relative attention) "
                      "generalizes past the training length");
  }
  for (const int t : prime) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
      throw ConfigError("sample: prime token " + std::to_string(t) + " outside vocab_size " +
                        std::to_string(cfg.vocab_size));
    }
  }
  std::mt19937_64 rng(opt.seed);
  SampleResult result;
  result.tokens = prime;
  ForwardOptions fwd;
  fwd.allow_longer = true;
  fwd.extrapolate_positions = opt.extrapolate_positions;
  fwd.keep_attention = opt.trace;
  while (result.tokens.size() < opt.length) {
    const auto out = forward(cfg, w, result.tokens, fwd);
    const std::size_t last = result.tokens.size() - 1;
    if (opt.trace) record(cfg, out.attention, last, result.trace);
    result.tokens.push_back(choose(out.logits.data() + last * cfg.vocab_size, cfg.vocab_size, opt.temperature, rng));
  }
  return result;
}

}  // namespace relmusic::model
