// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "relmusic/attention.hpp"
#include "relmusic/skew.hpp"

namespace {

using namespace relmusic;

template <typename T>
BasicTensor<T> random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  BasicTensor<T> t({rows, cols});
  for (auto& x : t.flat()) x = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
RelativeEmbeddingTable<T> random_table(TableMode mode, std::size_t rows, std::size_t dim) {
  auto table = RelativeEmbeddingTable<T>::zeros(mode, rows, dim);
  table.weights = random_matrix<T>(rows, dim, 7);
  return table;
}

void BM_SkewGlobal(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto qe = random_matrix<float>(len, len, 1);
  for (auto _ : state) benchmark::DoNotOptimize(skew_global(qe));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len * len));
}
BENCHMARK(BM_SkewGlobal)->RangeMultiplier(2)->Range(64, 1024);

void BM_SkewGlobalStepwise(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto qe = random_matrix<float>(len, len, 1);
  for (auto _ : state) benchmark::DoNotOptimize(skew_global_stepwise(qe));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len * len));
}
BENCHMARK(BM_SkewGlobalStepwise)->RangeMultiplier(2)->Range(64, 1024);

// Relative logits through the materialized R tensor.
void BM_SrelNaive(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto q = random_matrix<float>(len, 64, 2);
  const auto table = random_table<float>(TableMode::global, len, 64);
  for (auto _ : state) benchmark::DoNotOptimize(naive_srel_global(q, table));
}
BENCHMARK(BM_SrelNaive)->Arg(128)->Arg(256)->Arg(650)->Unit(benchmark::kMillisecond);

// Relative logits through Q·E^T and the skew.
void BM_SrelEfficient(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto q = random_matrix<float>(len, 64, 2);
  const auto table = random_table<float>(TableMode::global, len, 64);
  for (auto _ : state) benchmark::DoNotOptimize(efficient_srel_global(q, table));
}
BENCHMARK(BM_SrelEfficient)->Arg(128)->Arg(256)->Arg(650)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_RelativeAttentionGlobal(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto q = random_matrix<double>(len, 32, 3), k = random_matrix<double>(len, 32, 4),
             v = random_matrix<double>(len, 32, 5);
  const auto table = random_table<double>(TableMode::global, len, 32);
  const auto mask = causal_mask(len);
  for (auto _ : state) benchmark::DoNotOptimize(relative_attention_global(q, k, v, &table, mask));
}
BENCHMARK(BM_RelativeAttentionGlobal)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_RelativeAttentionLocal(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const std::size_t block = 64;
  const auto q = random_matrix<double>(len, 32, 3), k = random_matrix<double>(len, 32, 4),
             v = random_matrix<double>(len, 32, 5);
  const auto left = random_table<double>(TableMode::local_left, 2 * block - 1, 32);
  const auto right = random_table<double>(TableMode::global, block, 32);
  const auto cfg = LocalAttentionConfig::for_length(len, block);
  for (auto _ : state) benchmark::DoNotOptimize(relative_attention_local(q, k, v, &left, &right, cfg));
}
BENCHMARK(BM_RelativeAttentionLocal)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace
