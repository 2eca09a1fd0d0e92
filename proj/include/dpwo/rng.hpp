//
// Copyright 2026 The dpwo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPWO_RNG_HPP_
#define DPWO_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dpwo {

// SplitMix64 finalizer. Used both as the block function of the counter
// generator and to derive independent keys from user seeds.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream seed for trial `index` of a run seeded with `seed`.
constexpr std::uint64_t DeriveStreamSeed(std::uint64_t seed,
                                         std::uint64_t index) {
  return seed ^ index;
}

// Counter-based generator: the i-th draw is a pure function of (key, i), so
// results do not depend on platform, library version, or thread schedule.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed)
      : key_(Mix64(seed ^ 0xD1B54A32D192ED03ULL)) {}

  constexpr std::uint64_t NextU64() {
    return Mix64(key_ + 0x9E3779B97F4A7C15ULL * counter_++);
  }

  // Uniform on [0, 1) with 53 random bits.
  double NextUniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). Multiply-shift; the bias is below 2^-32
  // for every bound this library uses.
  std::uint64_t NextBelow(std::uint64_t bound) {
    const unsigned __int128 product =
        static_cast<unsigned __int128>(NextU64()) * bound;
    return static_cast<std::uint64_t>(product >> 64);
  }

  // Standard normal via Box-Muller. Draws come in pairs; the second one is
  // cached for the next call.
  double NextGaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 1 - U lies in (0, 1], so the logarithm is finite.
    const double u1 = 1.0 - NextUniform();
    const double u2 = NextUniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dpwo

#endif  // DPWO_RNG_HPP_
