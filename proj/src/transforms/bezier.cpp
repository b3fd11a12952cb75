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
#include <numeric>

#include "genesis/transforms.hpp"

namespace genesis {

Point2 bezier_point(Point2 p0, Point2 p1, Point2 p2, Point2 p3, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error("bezier_point: t must lie in [0,1]");
  const double s = 1.0 - t;
  const double b0 = s * s * s;
  const double b1 = 3.0 * s * s * t;
  const double b2 = 3.0 * s * t * t;
  const double b3 = t * t * t;
  return {b0 * p0.x + b1 * p1.x + b2 * p2.x + b3 * p3.x, b0 * p0.y + b1 * p1.y + b2 * p2.y + b3 * p3.y};
}

BezierMap::BezierMap(Point2 p1, Point2 p2, BezierDirection direction, std::size_t resolution, MonotoneMode mode)
    : p1_(p1), p2_(p2), direction_(direction), mode_(mode) {
  if (resolution < 2) throw Error("BezierMap: resolution must be >= 2");
  for (const Point2& p : {p1, p2}) {
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0))
      throw Error("BezierMap: control points must lie in the unit square");
  }
  const Point2 a = p0();
  const Point2 b = p3();
  std::vector<double> xs(resolution), ys(resolution);
  const double step = 1.0 / static_cast<double>(resolution - 1);
  for (std::size_t i = 0; i < resolution; ++i) {
    const double t = i + 1 == resolution ? 1.0 : static_cast<double>(i) * step;
    const Point2 q = bezier_point(a, p1_, p2_, b, t);
    xs[i] = q.x;
    ys[i] = q.y;
  }

  if (mode_ == MonotoneMode::Strict) {
    std::sort(xs.begin(), xs.end());
    if (direction_ == BezierDirection::Increasing) {
      std::sort(ys.begin(), ys.end());
    } else {
      std::sort(ys.begin(), ys.end(), std::greater<>());
    }
    xs_ = std::move(xs);
    ys_ = std::move(ys);
    return;
  }

  // Stable ordering keeps the t=0 sample first among ties at x=0 and the t=1
  // sample last among ties at x=1, pinning the endpoints.
  std::vector<std::size_t> order(resolution);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return xs[l] < xs[r]; });
  xs_.resize(resolution);
  ys_.resize(resolution);
  for (std::size_t i = 0; i < resolution; ++i) {
    xs_[i] = xs[order[i]];
    ys_[i] = ys[order[i]];
  }
}

Point2 BezierMap::p0() const {
  return direction_ == BezierDirection::Increasing ? Point2{0.0, 0.0} : Point2{0.0, 1.0};
}

Point2 BezierMap::p3() const {
  return direction_ == BezierDirection::Increasing ? Point2{1.0, 1.0} : Point2{1.0, 0.0};
}

double BezierMap::operator()(double v) const {
  v = std::clamp(v, 0.0, 1.0);
  const auto it = std::lower_bound(xs_.begin(), xs_.end(), v);
  if (it == xs_.end()) return ys_.back();
  const auto j = static_cast<std::size_t>(it - xs_.begin());
  if (*it == v || j == 0) return ys_[j];
  const double x0 = xs_[j - 1], x1 = xs_[j];
  const double w = (v - x0) / (x1 - x0);
  return ys_[j - 1] + w * (ys_[j] - ys_[j - 1]);
}

BezierMap build_intensity_map(Rng& rng, BezierDirection direction, std::size_t resolution, MonotoneMode mode) {
  if (resolution < kMinLutResolution)
    throw ConfigError("lookup-table resolution must be >= " + std::to_string(kMinLutResolution));
  Point2 p1{uniform01(rng), uniform01(rng)};
  Point2 p2{uniform01(rng), uniform01(rng)};
  return BezierMap(p1, p2, direction, resolution, mode);
}

SubVolume apply_nonlinear(const SubVolume& sv, const BezierMap& map) {
  SubVolume out = sv;
  for (float& v : out.data) v = static_cast<float>(map(v));
  return out;
}

}  // namespace genesis
