// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "relmusic/model/decoder.hpp"

namespace {

using namespace relmusic::model;

ModelConfig bench_config(bool relative) {
  ModelConfig c;
  c.vocab_size = 64;
  c.max_len = 128;
  c.depth = 32;
  c.heads = 4;
  c.layers = 2;
  c.feedforward_size = 64;
  c.dropout = 0.0;
  c.use_relative = relative;
  c.position_mode = relative ? PositionMode::none : PositionMode::add_sinusoid;
  return c;
}

std::vector<int> tokens_for(const ModelConfig& c) {
  std::vector<int> t(c.max_len);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<int>((i * 7) % c.vocab_size);
  return t;
}

void BM_DecoderForward(benchmark::State& state) {
  const auto c = bench_config(state.range(0) != 0);
  std::mt19937_64 rng(1);
  const auto w = init_weights(c, rng);
  const auto tokens = tokens_for(c);
  for (auto _ : state) benchmark::DoNotOptimize(forward(c, w, tokens));
}
BENCHMARK(BM_DecoderForward)->ArgName("relative")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DecoderTrainStep(benchmark::State& state) {
  const auto c = bench_config(state.range(0) != 0);
  std::mt19937_64 rng(1);
  const auto w = init_weights(c, rng);
  auto grads = zero_weights(c);
  const auto tokens = tokens_for(c);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(c, w, tokens, {}, grads));
}
BENCHMARK(BM_DecoderTrainStep)->ArgName("relative")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
