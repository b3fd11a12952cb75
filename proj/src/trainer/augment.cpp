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

#include <algorithm>
#include <random>

#include "genesis/trainer.hpp"

namespace genesis {

namespace {

// Rebuilds image (and mask) with out[x,y,z] = in[src(x,y,z)].
template <typename Src>
void remap(SubVolume& img, std::vector<std::uint8_t>* mask, Dims3 out_shape, Src src) {
  std::vector<float> data(img.data.size());
  std::vector<std::uint8_t> m(mask ? mask->size() : 0);
  std::size_t i = 0;
  for (std::size_t z = 0; z < out_shape.z; ++z)
    for (std::size_t y = 0; y < out_shape.y; ++y)
      for (std::size_t x = 0; x < out_shape.x; ++x, ++i) {
        const std::size_t j = src(x, y, z);
        data[i] = img.data[j];
        if (mask) m[i] = (*mask)[j];
      }
  img.data = std::move(data);
  img.shape = out_shape;
  if (mask) *mask = std::move(m);
}

}  // namespace

void augment_target(SubVolume& img, std::vector<std::uint8_t>* mask, const AugmentConfig& cfg, Rng& rng) {
  if (mask && mask->size() != img.data.size()) throw ShapeError("augment_target: mask and image differ in size");

  if (cfg.flip) {
    const bool fx = bernoulli(rng, 0.5), fy = bernoulli(rng, 0.5), fz = bernoulli(rng, 0.5);
    if (fx || fy || fz) {
      const Dims3 s = img.shape;
      remap(img, mask, s, [&](std::size_t x, std::size_t y, std::size_t z) {
        return s.offset(fx ? s.x - 1 - x : x, fy ? s.y - 1 - y : y, fz ? s.z - 1 - z : z);
      });
    }
  }

  if (cfg.transpose) {
    // One draw per axis pair; only pairs of equal extent may swap.
    const bool sxy = bernoulli(rng, 0.5), sxz = bernoulli(rng, 0.5), syz = bernoulli(rng, 0.5);
    const Dims3 s = img.shape;
    if (sxy && s.x == s.y)
      remap(img, mask, s, [&](std::size_t x, std::size_t y, std::size_t z) { return s.offset(y, x, z); });
    if (sxz && s.x == s.z)
      remap(img, mask, s, [&](std::size_t x, std::size_t y, std::size_t z) { return s.offset(z, y, x); });
    if (syz && s.y == s.z)
      remap(img, mask, s, [&](std::size_t x, std::size_t y, std::size_t z) { return s.offset(x, z, y); });
  }

  if (cfg.rotate) {
    auto k = static_cast<int>(uniform_int(rng, 0, 3));
    const Dims3 s = img.shape;
    // Quarter turns change the x/y extents, so non-square planes only take half turns.
    if (s.x != s.y) k &= 2;
    if (k == 1) {
      remap(img, mask, {s.y, s.x, s.z},
            [&](std::size_t x, std::size_t y, std::size_t z) { return s.offset(y, s.y - 1 - x, z); });
    } else if (k == 2) {
      remap(img, mask, s,
            [&](std::size_t x, std::size_t y, std::size_t z) { return s.offset(s.x - 1 - x, s.y - 1 - y, z); });
    } else if (k == 3) {
      remap(img, mask, {s.y, s.x, s.z},
            [&](std::size_t x, std::size_t y, std::size_t z) { return s.offset(s.x - 1 - y, x, z); });
    }
  }

  if (cfg.noise && cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> n(0.0, cfg.noise_sigma);
    for (float& v : img.data) v = static_cast<float>(std::clamp(static_cast<double>(v) + n(rng), 0.0, 1.0));
  }
}

}  // namespace genesis
