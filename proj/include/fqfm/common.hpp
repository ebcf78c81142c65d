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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fqfm {

namespace detail {

inline void append_msg(std::ostringstream&) {}

template <class T, class... Rest>
void append_msg(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  append_msg(os, rest...);
}

template <class... Args>
[[noreturn]] void fail_msg(const Args&... args) {
  std::ostringstream os;
  append_msg(os, args...);
  throw std::invalid_argument(os.str());
}

}  // namespace detail

// Message arguments are only evaluated on failure, so this is safe in hot loops.
#define FQFM_REQUIRE(cond, ...)                      \
  do {                                               \
    if (!(cond)) ::fqfm::detail::fail_msg(__VA_ARGS__); \
  } while (0)

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Deterministic RNG. mt19937_64 is fully specified by the standard and the
/// value mappings below avoid the implementation-defined distribution
/// adapters, so streams are bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::int64_t uniform_int(std::int64_t n) {
    return static_cast<std::int64_t>(
        (static_cast<unsigned __int128>(gen_()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  bool coin() { return (gen_() >> 63) != 0; }

  double normal() {
    // Box-Muller; deterministic given the stream.
    double u1 = std::max(uniform(), 0x1.0p-60);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 gen_;
};

/// Per-thread instrumentation: deterministic operation counters bumped by the
/// kernels plus a live-tensor byte tracker. Counters are thread-local; tensors
/// moved across threads would skew live_bytes, so instrumented runs stay on
/// one thread.
namespace instrument {

struct Counters {
  std::uint64_t flops = 0;
  std::uint64_t token_pairs = 0;
  std::int64_t live_bytes = 0;
  std::int64_t peak_bytes = 0;
};

inline Counters& counters() {
  thread_local Counters c;
  return c;
}

inline void add_flops(std::uint64_t n) { counters().flops += n; }
inline void add_pairs(std::uint64_t n) { counters().token_pairs += n; }

inline void track_alloc(std::int64_t bytes) {
  Counters& c = counters();
  c.live_bytes += bytes;
  c.peak_bytes = std::max(c.peak_bytes, c.live_bytes);
}

inline void track_free(std::int64_t bytes) { counters().live_bytes -= bytes; }

// Zeroes the op counters and restarts the peak at the current live set.
inline void reset() {
  Counters& c = counters();
  c.flops = 0;
  c.token_pairs = 0;
  c.peak_bytes = c.live_bytes;
}

}  // namespace instrument

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace fqfm
