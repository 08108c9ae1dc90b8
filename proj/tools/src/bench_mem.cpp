// SPDX-License-Identifier: Apache-2.0
#include "relmusic/cli/bench_mem.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>
#include <random>

#include "relmusic/alloc_meter.hpp"
#include "relmusic/attention.hpp"
#include "relmusic/errors.hpp"

namespace relmusic::cli {

std::size_t bytes_of(Precision p) { return p == Precision::f32 ? 4 : 8; }

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + s + "' (expected f32 or f64)");
}

namespace {

struct Measurement {
  std::size_t peak = 0;
  std::size_t embedding_peak = 0;
  double seconds = 0.0;
};

template <typename T, typename Fn>
Measurement measure(Fn&& fn) {
  AllocationMeter meter;
  Measurement m;
  const auto start = std::chrono::steady_clock::now();
  {
    MeterRegion region(meter);
    auto srel = fn();
    m.peak = meter.peak_bytes();
    m.embedding_peak = meter.peak_bytes(meter_category::kRelativeEmbeddings);
  }
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

template <typename T>
void run_paths(BenchRow& row, const BenchOptions& opt) {
  std::mt19937_64 rng(opt.seed ^ row.length);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  BasicTensor<T> q({row.length, row.head_dim});
  for (auto& x : q.flat()) x = static_cast<T>(dist(rng));
  auto table = RelativeEmbeddingTable<T>::zeros(TableMode::global, row.length, row.head_dim);
  for (auto& x : table.weights.flat()) x = static_cast<T>(dist(rng));

  // Serialized: naive first, then efficient, each under a fresh meter.
  if (row.naive_measured) {
    const auto m = measure<T>([&] { return naive_srel_global(q, table); });
    row.naive_peak_bytes = m.peak;
    row.naive_embedding_peak_bytes = m.embedding_peak;
    row.naive_seconds = m.seconds;
  }
  const auto m = measure<T>([&] { return efficient_srel_global(q, table); });
  row.efficient_peak_bytes = m.peak;
  row.efficient_embedding_peak_bytes = m.embedding_peak;
  row.efficient_seconds = m.seconds;
}

std::string format_mb(std::size_t bytes) {
  const double mb = megabytes(bytes);
  char buf[32];
  if (mb < 10.0) {
    std::snprintf(buf, sizeof buf, "%.2f", mb);
  } else if (mb < 100.0) {
    std::snprintf(buf, sizeof buf, "%.1f", mb);
  } else {
    std::snprintf(buf, sizeof buf, "%.0f", mb);
  }
  return buf;
}

double ratio(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

}  // namespace

BenchRow bench_length(std::size_t length, const BenchOptions& opt) {
  if (length == 0) throw ConfigError("bench-mem: lengths must be positive");
  if (opt.head_dim == 0) throw ConfigError("bench-mem: head dimension must be positive");
  BenchRow row;
  row.length = length;
  row.head_dim = opt.head_dim;
  row.precision = opt.precision;
  const std::size_t elem = bytes_of(opt.precision);
  row.analytic_r_bytes = length * length * opt.head_dim * elem;
  row.analytic_er_bytes = length * opt.head_dim * elem;
  row.analytic_srel_bytes = length * length * elem;
  row.naive_measured = row.naive_analytic_bytes() <= opt.naive_limit_bytes;
  if (opt.precision == Precision::f32) {
    run_paths<float>(row, opt);
  } else {
    run_paths<double>(row, opt);
  }
  return row;
}

BenchReport run_bench_mem(const BenchOptions& opt) {
  BenchReport report;
  for (const std::size_t len : opt.lengths) report.rows.push_back(bench_length(len, opt));
  return report;
}

nlohmann::ordered_json BenchReport::to_json() const {
  auto rows_json = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["length"] = r.length;
    j["head_dim"] = r.head_dim;
    j["precision"] = to_string(r.precision);
    j["analytic"] = {{"r_bytes", r.analytic_r_bytes},
                     {"er_bytes", r.analytic_er_bytes},
                     {"srel_bytes", r.analytic_srel_bytes},
                     {"r_mb", megabytes(r.analytic_r_bytes)},
                     {"er_mb", megabytes(r.analytic_er_bytes)},
                     {"srel_mb", megabytes(r.analytic_srel_bytes)}};
    nlohmann::ordered_json naive;
    naive["measured"] = r.naive_measured;
    if (r.naive_measured) {
      naive["peak_bytes"] = r.naive_peak_bytes;
      naive["embedding_peak_bytes"] = r.naive_embedding_peak_bytes;
      naive["seconds"] = r.naive_seconds;
    } else {
      naive["note"] = "analytic only: exceeds the naive memory budget";
    }
    j["naive"] = naive;
    j["efficient"] = {{"peak_bytes", r.efficient_peak_bytes},
                      {"embedding_peak_bytes", r.efficient_embedding_peak_bytes},
                      {"seconds", r.efficient_seconds}};
    j["efficient_peak_over_analytic"] = ratio(r.efficient_peak_bytes, r.efficient_analytic_bytes());
    if (r.naive_measured) {
      j["naive_over_efficient_peak"] = ratio(r.naive_peak_bytes, r.efficient_peak_bytes);
      j["naive_over_efficient_embedding_peak"] =
          ratio(r.naive_embedding_peak_bytes, r.efficient_embedding_peak_bytes);
      j["speedup"] = r.efficient_seconds > 0 ? r.naive_seconds / r.efficient_seconds : 0.0;
    }
    rows_json.push_back(j);
  }
  nlohmann::ordered_json out;
  out["unit"] = "bytes per layer per head; mb = 1e6 bytes";
  out["rows"] = rows_json;
  return out;
}

void BenchReport::print_table(std::ostream& out) const {
  char line[256];
  std::snprintf(line, sizeof line, "%6s %5s %4s | %9s %9s %9s | %11s %11s %7s | %9s %9s\n", "L", "D_h", "prec",
                "R MB", "E^r MB", "S_rel MB", "naive peak", "eff peak", "ratio", "naive ms", "eff ms");
  out << line;
  for (const auto& r : rows) {
    const std::string naive_peak = r.naive_measured ? format_mb(r.naive_peak_bytes) : "n/a*";
    char ratio_buf[16] = "n/a*";
    char naive_ms[32] = "n/a*";
    if (r.naive_measured) {
      std::snprintf(ratio_buf, sizeof ratio_buf, "%.1f", ratio(r.naive_peak_bytes, r.efficient_peak_bytes));
      std::snprintf(naive_ms, sizeof naive_ms, "%.3f", r.naive_seconds * 1e3);
    }
    std::snprintf(line, sizeof line, "%6zu %5zu %4s | %9s %9s %9s | %11s %11s %7s | %9s %9.3f\n", r.length,
                  r.head_dim, to_string(r.precision).c_str(), format_mb(r.analytic_r_bytes).c_str(),
                  format_mb(r.analytic_er_bytes).c_str(), format_mb(r.analytic_srel_bytes).c_str(),
                  naive_peak.c_str(), format_mb(r.efficient_peak_bytes).c_str(), ratio_buf, naive_ms,
                  r.efficient_seconds * 1e3);
    out << line;
  }
  for (const auto& r : rows) {
    if (!r.naive_measured) {
      out << "* naive path over the memory budget; analytic only\n";
      break;
    }
  }
}

}  // namespace relmusic::cli
