// Copyright 2026 The fqfm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "fqfm/attention.hpp"

namespace fqfm {

struct BenchRow {
  std::string mechanism;
  std::int64_t n_pixels = 0;
  std::int64_t window = 0;  // patch or window size
  double median_ms = 0;
  std::int64_t op_count = 0;       // flops for fsas, token pairs for the baselines
  std::int64_t workset_bytes = 0;  // peak live tensor bytes during one run
  bool skipped = false;
  std::string note;
};

struct BenchConfig {
  std::int64_t channels = 8;
  std::int64_t window = 8;  // window attention tile / oracle patch
  std::int64_t warmup = 5;
  std::int64_t repeats = 9;
  std::int64_t token_cap = 4096;
  std::uint64_t seed = 7;
};

namespace detail {

template <class F>
BenchRow time_workload(F&& run, std::int64_t warmup, std::int64_t repeats, bool count_pairs) {
  BenchRow row;
  for (std::int64_t i = 0; i < warmup; ++i) run();
  instrument::reset();
  run();
  row.op_count = count_pairs ? instrument::counters().token_pairs : instrument::counters().flops;
  row.workset_bytes = instrument::counters().peak_bytes;
  std::vector<double> ms;
  for (std::int64_t i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run();
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  row.median_ms = ms[ms.size() / 2];
  return row;
}

}  // namespace detail

/// One row per size for a single mechanism. The quadratic oracle skips sizes
/// whose token count exceeds the cap, leaving a note.
template <class S>
std::vector<BenchRow> time_mechanism(const std::string& mechanism,
                                     const std::vector<std::pair<std::int64_t, std::int64_t>>& sizes,
                                     const BenchConfig& cfg) {
  FQFM_REQUIRE(mechanism == "fsas" || mechanism == "window_attention" ||
                   mechanism == "quadratic_oracle",
               "time_mechanism: unknown mechanism '", mechanism, "'");
  FQFM_REQUIRE(cfg.warmup >= 5 && cfg.repeats >= 9,
               "time_mechanism: need >= 5 warmup and >= 9 repeats");
  std::vector<BenchRow> rows;
  const std::int64_t C = cfg.channels, patch = 8;

  ParameterStore<S> ps;
  init::fsas_params(ps, "bench.fsas", C, cfg.seed);
  QkvProjection<S> proj = random_qkv_projection<S>(C, cfg.seed);

  for (const auto& [H, W] : sizes) {
    Rng rng(cfg.seed ^ static_cast<std::uint64_t>(H * 1315423911ULL + W));
    Tensor<S> x = random_uniform<S>({1, C, H, W}, rng);
    BenchRow row;
    if (mechanism == "fsas") {
      PlainExec<S> e(ps);
      row = detail::time_workload([&] { fsas_block(e, x, "bench.fsas", patch); }, cfg.warmup,
                                  cfg.repeats, false);
      row.window = patch;
    } else if (mechanism == "window_attention") {
      row = detail::time_workload([&] { window_attention_forward(x, cfg.window, proj); },
                                  cfg.warmup, cfg.repeats, true);
      row.window = cfg.window;
    } else {
      const std::int64_t tokens = ((H + patch - 1) / patch) * ((W + patch - 1) / patch);
      if (tokens > cfg.token_cap) {
        row.skipped = true;
        row.note = std::to_string(tokens) + " tokens exceed cap " + std::to_string(cfg.token_cap);
        row.window = patch;
        row.mechanism = mechanism;
        row.n_pixels = H * W;
        rows.push_back(std::move(row));
        continue;
      }
      row = detail::time_workload(
          [&] { spatial_attention_oracle(x, proj, patch, patch, cfg.token_cap); }, cfg.warmup,
          cfg.repeats, true);
      row.window = patch;
    }
    row.mechanism = mechanism;
    row.n_pixels = H * W;
    rows.push_back(std::move(row));
  }
  return rows;
}

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<std::string> metadata;  // "# key: value" comment lines
};

inline std::string cpu_model_string() {
  std::ifstream f("/proc/cpuinfo");
  std::string line;
  while (std::getline(f, line))
    if (line.rfind("model name", 0) == 0) {
      const std::size_t colon = line.find(':');
      if (colon != std::string::npos) return line.substr(colon + 2);
    }
  return "unknown";
}

template <class S>
BenchReport run_bench(const std::vector<std::pair<std::int64_t, std::int64_t>>& sizes,
                      const BenchConfig& cfg) {
  BenchReport report;
  report.metadata.push_back("# cpu: " + cpu_model_string());
  report.metadata.push_back(std::string("# precision: ") +
                            (std::is_same_v<S, float> ? "f32" : "f64"));
  report.metadata.push_back("# channels: " + std::to_string(cfg.channels));
  for (const char* mech : {"fsas", "window_attention", "quadratic_oracle"}) {
    auto rows = time_mechanism<S>(mech, sizes, cfg);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  return report;
}

inline void write_bench_csv(const BenchReport& report, std::ostream& out) {
  for (const std::string& line : report.metadata) out << line << "\n";
  out << "mechanism,n_pixels,window,median_ms,op_count,workset_bytes\n";
  for (const BenchRow& r : report.rows) {
    if (r.skipped) {
      out << "# " << r.mechanism << " skipped at n_pixels=" << r.n_pixels << ": " << r.note
          << "\n";
      continue;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", r.median_ms);
    out << r.mechanism << "," << r.n_pixels << "," << r.window << "," << buf << "," << r.op_count
        << "," << r.workset_bytes << "\n";
  }
}

/// Least-squares slope of log(median time) vs log(pixel count).
inline double fit_slope(const std::vector<std::pair<double, double>>& n_vs_time) {
  FQFM_REQUIRE(n_vs_time.size() >= 4, "fit_slope: need >= 4 points, got ", n_vs_time.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(n_vs_time.size());
  for (const auto& [N, t] : n_vs_time) {
    FQFM_REQUIRE(N > 0 && t > 0, "fit_slope: nonpositive point");
    const double x = std::log(N), y = std::log(t);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double fit_slope(const std::vector<BenchRow>& rows, const std::string& mechanism) {
  std::vector<std::pair<double, double>> pts;
  for (const BenchRow& r : rows)
    if (r.mechanism == mechanism && !r.skipped)
      pts.emplace_back(static_cast<double>(r.n_pixels), r.median_ms);
  return fit_slope(pts);
}

}  // namespace fqfm
