// SPDX-License-Identifier: Apache-2.0
//
// Randomized equivalence sweep of the skew kernels against index-map oracles.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace relmusic::cli {

struct SkewCheckOptions {
  std::size_t max_len = 64;    // global: L = 1..max_len
  std::size_t max_block = 32;  // local: N = 1..max_block
  std::size_t trials = 200;    // random instances per size
  std::uint64_t seed = 1;
  /// Shifts the oracle's distance index by one. Harness sanity only.
  bool inject_fault = false;
};

struct SkewCheckReport {
  std::size_t global_instances = 0;
  std::size_t local_instances = 0;
  std::size_t compared_entries = 0;
  std::size_t mismatches = 0;
  std::string first_mismatch;
  double seconds = 0.0;

  bool passed() const { return mismatches == 0; }
};

SkewCheckReport run_skew_check(const SkewCheckOptions& opt);

}  // namespace relmusic::cli
