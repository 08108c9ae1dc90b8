// SPDX-License-Identifier: Apache-2.0
//
// Per-layer, per-head memory of the relative-logit computation: closed-form
// byte counts for the materializing (R) path and the skewing (E^r) path, plus
// metered peaks and wall times from running both.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace relmusic::cli {

enum class Precision { f32, f64 };

std::size_t bytes_of(Precision p);
std::string to_string(Precision p);
Precision parse_precision(const std::string& s);

struct BenchOptions {
  std::vector<std::size_t> lengths{650, 2048, 3500};
  std::size_t head_dim = 64;
  Precision precision = Precision::f32;
  /// The naive path runs only when its analytic footprint fits this budget.
  std::size_t naive_limit_bytes = 512'000'000;
  std::uint64_t seed = 1;
};

struct BenchRow {
  std::size_t length = 0;
  std::size_t head_dim = 0;
  Precision precision = Precision::f32;

  std::size_t analytic_r_bytes = 0;     // L * L * D_h elements
  std::size_t analytic_er_bytes = 0;    // L * D_h elements
  std::size_t analytic_srel_bytes = 0;  // L * L elements

  bool naive_measured = false;  // false: over budget, analytic only
  std::size_t naive_peak_bytes = 0;
  std::size_t naive_embedding_peak_bytes = 0;
  double naive_seconds = 0.0;

  std::size_t efficient_peak_bytes = 0;
  std::size_t efficient_embedding_peak_bytes = 0;
  double efficient_seconds = 0.0;

  std::size_t naive_analytic_bytes() const { return analytic_r_bytes + analytic_srel_bytes; }
  std::size_t efficient_analytic_bytes() const { return analytic_er_bytes + analytic_srel_bytes; }
};

struct BenchReport {
  std::vector<BenchRow> rows;

  nlohmann::ordered_json to_json() const;
  void print_table(std::ostream& out) const;
};

BenchRow bench_length(std::size_t length, const BenchOptions& opt);
BenchReport run_bench_mem(const BenchOptions& opt);

/// Decimal megabytes.
inline double megabytes(std::size_t bytes) { return static_cast<double>(bytes) / 1e6; }

}  // namespace relmusic::cli
