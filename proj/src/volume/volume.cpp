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

#include "genesis/volume.hpp"

#include <algorithm>
#include <cmath>

namespace genesis {

std::string to_string(const Dims3& d) {
  return std::to_string(d.x) + "x" + std::to_string(d.y) + "x" + std::to_string(d.z);
}

Volume::Volume(Dims3 dims, std::vector<float> data, Spacing3 spacing, IntensityDomain domain)
    : dims_(dims), data_(std::move(data)), spacing_(spacing), domain_(domain) {
  if (dims_.x == 0 || dims_.y == 0 || dims_.z == 0)
    throw ShapeError("volume dims must be positive, got " + to_string(dims_));
  if (dims_.count() != data_.size())
    throw ShapeError("volume dims " + to_string(dims_) + " need " + std::to_string(dims_.count()) +
                     " scalars, got " + std::to_string(data_.size()));
  for (float s : spacing_) {
    if (!std::isfinite(s) || s <= 0.0f) throw Error("volume spacing must be finite and positive");
  }
  if (domain_ == IntensityDomain::Unit) {
    for (float v : data_) {
      if (!(v >= 0.0f && v <= 1.0f)) throw Error("UNIT-domain volume has a scalar outside [0,1]");
    }
  }
}

NonFiniteVoxelError::NonFiniteVoxelError(Index3 where)
    : Error("non-finite voxel at (" + std::to_string(where.x) + "," + std::to_string(where.y) + "," +
            std::to_string(where.z) + ")"),
      where_(where) {}

namespace {

void check_finite(const Volume& v) {
  const auto data = v.data();
  const Dims3& d = v.dims();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw NonFiniteVoxelError({i % d.x, (i / d.x) % d.y, i / (d.x * d.y)});
    }
  }
}

}  // namespace

Volume normalize_ct(const Volume& v, float clip_lo, float clip_hi) {
  if (v.domain() != IntensityDomain::Hounsfield)
    throw Error("normalize_ct expects a HOUNSFIELD-domain volume");
  if (!(clip_lo < clip_hi)) throw ConfigError("normalize_ct requires clip_lo < clip_hi");
  check_finite(v);
  const double range = static_cast<double>(clip_hi) - clip_lo;
  std::vector<float> out(v.data().size());
  std::transform(v.data().begin(), v.data().end(), out.begin(), [&](float x) {
    const double c = std::clamp(static_cast<double>(x), static_cast<double>(clip_lo),
                                static_cast<double>(clip_hi));
    return static_cast<float>((c - clip_lo) / range);
  });
  return Volume(v.dims(), std::move(out), v.spacing(), IntensityDomain::Unit);
}

Volume normalize_minmax(const Volume& v) {
  check_finite(v);
  const auto [lo_it, hi_it] = std::minmax_element(v.data().begin(), v.data().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw Error("normalize_minmax: constant volume has zero intensity range");
  std::vector<float> out(v.data().size());
  std::transform(v.data().begin(), v.data().end(), out.begin(), [&](float x) {
    return std::clamp(static_cast<float>((x - lo) / (hi - lo)), 0.0f, 1.0f);
  });
  return Volume(v.dims(), std::move(out), v.spacing(), IntensityDomain::Unit);
}

}  // namespace genesis
