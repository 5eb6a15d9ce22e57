// Copyright 2026 The netmbt Authors
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

#include <cstdint>
#include <random>
#include <stdexcept>

namespace netmbt {

/// SplitMix64 finalizer (Steele, Lea, Flood). Used to derive independent
/// seeds from a suite seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of test `index` within a suite: any single test is reproducible from
/// (suite seed, index) alone.
constexpr std::uint64_t derive_test_seed(std::uint64_t suite_seed,
                                         std::uint64_t index) {
  return splitmix64(suite_seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

/// Deterministic random source. The engine output of mt19937_64 is fixed by
/// the standard; the bounded draws below are written out so replays do not
/// depend on a particular standard library's distributions.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [0, bound). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("SeededRng::below(0)");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform in [lo, hi].
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
    if (hi < lo) throw std::invalid_argument("SeededRng::between: hi < lo");
    return lo + below(hi - lo + 1);
  }

 private:
  std::mt19937_64 engine_;
};

/// True with the given probability. Always consumes exactly one draw.
inline bool maybe(SeededRng& rng, double probability) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw std::invalid_argument("maybe: probability outside [0, 1]");
  }
  return rng.uniform01() < probability;
}

}  // namespace netmbt
