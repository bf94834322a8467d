// Copyright 2026 The spatialrisk Authors
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

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace spatialrisk {

/// Engine used for every stochastic stage. mt19937_64 is fully specified by
/// the standard, so streams are portable across standard libraries.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child seed for stream `index` of `master`. For a fixed master the map
/// index -> seed is injective (composition of bijections).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index ^ 0x5851f42d4c957f2dULL));
}

/// Reserved stream indices for non-replication consumers of a master seed.
inline constexpr std::uint64_t kPilotStream = 0xffffffff00000001ULL;
inline constexpr std::uint64_t kBootstrapStream = 0xffffffff00000002ULL;
inline constexpr std::uint64_t kSigmaStream = 0xffffffff00000003ULL;

inline Rng make_rng(std::uint64_t master, std::uint64_t index) {
  return Rng(derive_seed(master, index));
}

/// Throws kInvalidParameter if two replication indices in [0, n) map to the
/// same child seed.
void check_seed_collisions(std::uint64_t master, std::size_t n);

}  // namespace spatialrisk
