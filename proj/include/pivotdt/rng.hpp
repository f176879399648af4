// Copyright 2026 The pivotdt Authors.
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

#ifndef PIVOTDT_RNG_HPP_
#define PIVOTDT_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pivotdt {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for an independent stream identified by (master seed, ids...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> ids = {}) {
  return Rng(derive_seed(seed, ids));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n). Rejection sampling keeps it unbiased and
// independent of the standard library's distribution implementation.
inline int uniform_int(Rng& rng, int n) {
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<int>(x % range);
}

// Stream-id tags, so call sites do not collide by accident.
namespace stream {
inline constexpr std::uint64_t kMatrix = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kMcts = 3;
inline constexpr std::uint64_t kInit = 4;
inline constexpr std::uint64_t kBatch = 5;
inline constexpr std::uint64_t kSlot = 6;
inline constexpr std::uint64_t kEval = 7;
inline constexpr std::uint64_t kRollout = 8;
inline constexpr std::uint64_t kBaseline = 9;
}  // namespace stream

}  // namespace pivotdt

#endif  // PIVOTDT_RNG_HPP_
