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

#include "genesis/transforms.hpp"

namespace genesis {

namespace {

std::vector<std::uint8_t> union_of(Dims3 shape, const std::vector<Box>& windows) {
  std::vector<std::uint8_t> in(shape.count(), 0);
  for (const Box& b : windows) {
    const std::size_t x1 = std::min(shape.x, b.origin.x + b.extent.x);
    const std::size_t y1 = std::min(shape.y, b.origin.y + b.extent.y);
    const std::size_t z1 = std::min(shape.z, b.origin.z + b.extent.z);
    for (std::size_t z = b.origin.z; z < z1; ++z)
      for (std::size_t y = b.origin.y; y < y1; ++y)
        for (std::size_t x = b.origin.x; x < x1; ++x) in[shape.offset(x, y, z)] = 1;
  }
  return in;
}

double masked_fraction_of(Dims3 shape, CutoutMode mode, const std::vector<Box>& windows) {
  const auto in = union_of(shape, windows);
  const auto covered = static_cast<std::size_t>(std::count(in.begin(), in.end(), std::uint8_t{1}));
  const std::size_t masked = mode == CutoutMode::Outer ? shape.count() - covered : covered;
  return static_cast<double>(masked) / static_cast<double>(shape.count());
}

std::size_t range_draw(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

/// Inner windows span [dim/6, dim/3] per axis; outer windows [dim/2, dim],
/// so both modes can meet the area cap with a handful of windows.
Box sample_box(Dims3 shape, CutoutMode mode, Rng& rng) {
  Box b;
  for (std::size_t a = 0; a < 3; ++a) {
    const std::size_t d = shape[a];
    std::size_t lo, hi;
    if (mode == CutoutMode::Inner) {
      lo = std::max<std::size_t>(1, d / 6);
      hi = std::max<std::size_t>(lo, d / 3);
    } else {
      lo = std::max<std::size_t>(1, (d + 1) / 2);
      hi = d;
    }
    b.extent[a] = range_draw(rng, lo, hi);
    b.origin[a] = range_draw(rng, 0, d - b.extent[a]);
  }
  return b;
}

std::size_t largest_window(const std::vector<Box>& windows) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < windows.size(); ++i) {
    if (windows[i].extent.count() > windows[best].extent.count()) best = i;
  }
  return best;
}

/// Deterministic repair when rejection sampling runs out of retries.
void shrink_until_capped(Dims3 shape, std::vector<Box>& windows, double cap) {
  while (!windows.empty() && masked_fraction_of(shape, CutoutMode::Inner, windows) > cap) {
    Box& b = windows[largest_window(windows)];
    if (b.extent.count() == 1) {
      windows.pop_back();
      continue;
    }
    std::size_t axis = 0;
    for (std::size_t a = 1; a < 3; ++a) {
      if (b.extent[a] > b.extent[axis]) axis = a;
    }
    b.extent[axis] = (b.extent[axis] + 1) / 2;
  }
}

void grow_until_capped(Dims3 shape, std::vector<Box>& windows, double cap) {
  if (windows.empty()) windows.push_back(Box{{shape.x / 2, shape.y / 2, shape.z / 2}, {1, 1, 1}});
  while (masked_fraction_of(shape, CutoutMode::Outer, windows) > cap) {
    Box& b = windows[largest_window(windows)];
    for (std::size_t a = 0; a < 3; ++a) {
      if (b.extent[a] == shape[a]) continue;
      if (b.origin[a] + b.extent[a] < shape[a]) {
        ++b.extent[a];
      } else {
        --b.origin[a];
        ++b.extent[a];
      }
    }
  }
}

}  // namespace

CutoutMask::CutoutMask(CutoutMode mode, Dims3 shape, std::vector<Box> windows, float fill_value, double max_fraction)
    : mode_(mode), shape_(shape), windows_(std::move(windows)), fill_(fill_value) {
  if (shape_.count() == 0) throw ShapeError("cutout mask shape must be positive");
  if (mode_ == CutoutMode::None && !windows_.empty()) throw Error("cutout mode NONE cannot carry windows");
  for (const Box& b : windows_) {
    for (std::size_t a = 0; a < 3; ++a) {
      if (b.extent[a] == 0 || b.origin[a] + b.extent[a] > shape_[a])
        throw ShapeError("cutout window outside the sub-volume");
    }
  }
  mask_ = union_of(shape_, windows_);
  if (mode_ == CutoutMode::Outer) {
    for (auto& m : mask_) m = m ? 0 : 1;
  }
  masked_ = static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
  if (masked_fraction() > max_fraction)
    throw Error("cutout masked fraction " + std::to_string(masked_fraction()) + " exceeds cap " +
                std::to_string(max_fraction));
}

CutoutMask CutoutMask::from_mask(Dims3 shape, std::vector<std::uint8_t> mask, float fill_value) {
  if (mask.size() != shape.count()) throw ShapeError("cutout mask size does not match shape");
  CutoutMask m;
  m.shape_ = shape;
  m.fill_ = fill_value;
  for (auto& v : mask) v = v ? 1 : 0;
  m.masked_ = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  m.mask_ = std::move(mask);
  return m;
}

SubVolume apply_cutout(const SubVolume& sv, const CutoutMask& mask) {
  if (mask.shape() != sv.shape)
    throw ShapeError("cutout mask " + to_string(mask.shape()) + " does not match sub-volume " + to_string(sv.shape));
  SubVolume out = sv;
  const auto& m = mask.mask();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (m[i]) out.data[i] = mask.fill_value();
  }
  return out;
}

CutoutMask gen_cutout_mask(Dims3 shape, CutoutMode mode, const SchedulerConfig& cfg, Rng& rng) {
  if (mode == CutoutMode::None) throw Error("gen_cutout_mask needs INNER or OUTER");
  if (shape.count() == 0) throw ShapeError("gen_cutout_mask: empty shape");
  const double cap = cfg.cutout_max_fraction;
  const auto fill = static_cast<float>(uniform01(rng));

  std::vector<Box> windows;
  const int retries = std::max(1, cfg.cutout_max_retries);
  for (int attempt = 0; attempt < retries; ++attempt) {
    windows.clear();
    const std::size_t k = cfg.cutout_max_windows >= 1
                              ? range_draw(rng, 1, static_cast<std::size_t>(cfg.cutout_max_windows))
                              : 0;
    for (std::size_t i = 0; i < k; ++i) windows.push_back(sample_box(shape, mode, rng));
    if (masked_fraction_of(shape, mode, windows) <= cap) return CutoutMask(mode, shape, std::move(windows), fill, cap);
    if (k == 0) break;  // resampling cannot change an empty window set
  }
  if (mode == CutoutMode::Inner) {
    shrink_until_capped(shape, windows, cap);
  } else {
    grow_until_capped(shape, windows, cap);
  }
  return CutoutMask(mode, shape, std::move(windows), fill, cap);
}

}  // namespace genesis
