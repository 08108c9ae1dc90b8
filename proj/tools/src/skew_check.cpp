// SPDX-License-Identifier: Apache-2.0
#include "relmusic/cli/skew_check.hpp"

#include <chrono>
#include <cstring>
#include <random>
#include <sstream>

#include "relmusic/skew.hpp"

namespace relmusic::cli {

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

// Column of qe read by output (i, j) in both layouts: j - i + n - 1, with n
// the number of rows. width bounds the faulty shift.
std::size_t oracle_column(std::size_t n, std::size_t width, std::size_t i, std::size_t j, bool fault) {
  const std::size_t col = j + n - 1 - i;
  if (!fault || width == 1) return col;
  return col + 1 < width ? col + 1 : col - 1;
}

Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor t({rows, cols});
  for (auto& x : t.flat()) x = dist(rng);
  return t;
}

}  // namespace

SkewCheckReport run_skew_check(const SkewCheckOptions& opt) {
  SkewCheckReport report;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(opt.seed);
  auto record = [&](const char* kernel, std::size_t size, std::size_t i, std::size_t j, double got, double want) {
    ++report.compared_entries;
    if (same_bits(got, want)) return;
    if (report.mismatches++ == 0) {
      std::ostringstream os;
      os << kernel << " size " << size << " at (" << i << ", " << j << "): got " << got << ", oracle " << want;
      report.first_mismatch = os.str();
    }
  };

  for (std::size_t len = 1; len <= opt.max_len; ++len) {
    for (std::size_t t = 0; t < opt.trials; ++t) {
      const auto qe = random_matrix(len, len, rng);
      const auto fused = skew_global(qe);
      const auto stepwise = skew_global_stepwise(qe);
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          const double want = qe(i, oracle_column(len, len, i, j, opt.inject_fault));
          record("skew_global", len, i, j, fused(i, j), want);
          record("skew_global_stepwise", len, i, j, stepwise(i, j), want);
        }
      }
      ++report.global_instances;
    }
  }

  for (std::size_t n = 1; n <= opt.max_block; ++n) {
    const std::size_t width = 2 * n - 1;
    for (std::size_t t = 0; t < opt.trials; ++t) {
      const auto qe = random_matrix(n, width, rng);
      const auto fused = skew_local(qe);
      const auto stepwise = skew_local_stepwise(qe);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double want = qe(i, oracle_column(n, width, i, j, opt.inject_fault));
          record("skew_local", n, i, j, fused(i, j), want);
          record("skew_local_stepwise", n, i, j, stepwise(i, j), want);
        }
      }
      ++report.local_instances;
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace relmusic::cli
