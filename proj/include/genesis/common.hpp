/* Copyright 2026 The Genesis Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace genesis {

/// Extent of a 3D grid, x fastest in memory.
struct Dims3 {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t z = 0;

  constexpr std::size_t count() const { return x * y * z; }
  constexpr std::size_t operator[](std::size_t axis) const {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }
  constexpr std::size_t& operator[](std::size_t axis) {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }
  constexpr std::size_t offset(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return ix + x * (iy + y * iz);
  }
  constexpr bool fits_in(const Dims3& outer) const {
    return x <= outer.x && y <= outer.y && z <= outer.z;
  }
  friend constexpr bool operator==(const Dims3&, const Dims3&) = default;
};

/// Integer voxel coordinate.
using Index3 = Dims3;

std::string to_string(const Dims3& d);

// Error taxonomy. The CLI maps ConfigError -> 1, IoError -> 2, everything
// else -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Engine used for every seeded stream in the project.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and a list of stream tags, so that
/// e.g. (master, epoch, sample) always maps to the same stream regardless of
/// how work is scheduled.
template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) {
  std::uint64_t s = mix_seed(seed);
  ((s = mix_seed(s ^ static_cast<std::uint64_t>(tags))), ...);
  return s;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [lo, hi] inclusive.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// Always consumes exactly one draw, so stream alignment does not depend on p.
inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace genesis
