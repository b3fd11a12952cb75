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
#include <array>
#include <cmath>
#include <numbers>

#include "genesis/volume.hpp"

namespace genesis {

namespace {

constexpr double kTextureAmplitude = 0.08;
constexpr double kEdgeWidth = 0.35;  // width of the cosine ramp in normalized radius
constexpr double kMinContrast = 0.2;
constexpr double kMaxContrast = 0.45;

struct Ellipsoid {
  std::array<double, 3> center;
  std::array<double, 3> semi_axes;
  std::array<std::array<double, 3>, 3> rotation;  // rows are the ellipsoid axes
  double contrast;
};

std::array<std::array<double, 3>, 3> random_rotation(Rng& rng) {
  // Uniform unit quaternion (Shoemake).
  const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
  const double tau = 2.0 * std::numbers::pi;
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double w = a * std::sin(tau * u2), x = a * std::cos(tau * u2);
  const double y = b * std::sin(tau * u3), z = b * std::cos(tau * u3);
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
           {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
           {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

/// Trilinear value noise on a lattice with the given period, values in [-1, 1].
class ValueNoise {
 public:
  ValueNoise(const Dims3& dims, double period, Rng& rng) : period_(period) {
    for (int a = 0; a < 3; ++a) n_[a] = static_cast<std::size_t>(std::ceil(dims[a] / period)) + 2;
    lattice_.resize(n_[0] * n_[1] * n_[2]);
    for (double& v : lattice_) v = 2.0 * uniform01(rng) - 1.0;
  }

  double operator()(double x, double y, double z) const {
    const double p[3] = {x / period_, y / period_, z / period_};
    std::size_t i0[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
      i0[a] = static_cast<std::size_t>(p[a]);
      const double t = p[a] - static_cast<double>(i0[a]);
      f[a] = t * t * (3.0 - 2.0 * t);
    }
    double acc = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      double w = 1.0;
      std::size_t idx[3];
      for (int a = 0; a < 3; ++a) {
        const bool hi = (corner >> a) & 1;
        idx[a] = i0[a] + (hi ? 1 : 0);
        w *= hi ? f[a] : 1.0 - f[a];
      }
      acc += w * lattice_[idx[0] + n_[0] * (idx[1] + n_[1] * idx[2])];
    }
    return acc;
  }

 private:
  double period_;
  std::size_t n_[3];
  std::vector<double> lattice_;
};

double ramp(double r) {
  if (r <= 1.0 - kEdgeWidth) return 1.0;
  if (r >= 1.0) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (r - (1.0 - kEdgeWidth)) / kEdgeWidth));
}

LabeledPhantom render(const PhantomSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(spec.seed));
  const Dims3& d = spec.dims;

  std::vector<Ellipsoid> blobs(static_cast<std::size_t>(spec.n_ellipsoids));
  for (auto& e : blobs) {
    for (int a = 0; a < 3; ++a) {
      e.center[a] = uniform01(rng) * static_cast<double>(d[a]);
      const double frac = 0.08 + 0.17 * uniform01(rng);
      e.semi_axes[a] = std::max(1.5, frac * static_cast<double>(d[a]));
    }
    e.rotation = random_rotation(rng);
    const double magnitude = kMinContrast + (kMaxContrast - kMinContrast) * uniform01(rng);
    e.contrast = bernoulli(rng, 0.5) ? magnitude : -magnitude;
  }
  const ValueNoise noise(d, 2.0 + 14.0 * spec.texture_scale, rng);

  std::vector<float> data(d.count());
  std::vector<std::uint8_t> mask(d.count(), 0);
  for (std::size_t z = 0; z < d.z; ++z) {
    for (std::size_t y = 0; y < d.y; ++y) {
      for (std::size_t x = 0; x < d.x; ++x) {
        const double p[3] = {x + 0.5, y + 0.5, z + 0.5};
        double v = spec.background_level + kTextureAmplitude * noise(p[0], p[1], p[2]);
        bool inside = false;
        for (const auto& e : blobs) {
          double r2 = 0.0;
          for (int a = 0; a < 3; ++a) {
            double proj = 0.0;
            for (int b = 0; b < 3; ++b) proj += e.rotation[a][b] * (p[b] - e.center[b]);
            // Axis lengths are assigned in the ellipsoid frame.
            const double q = proj / e.semi_axes[a];
            r2 += q * q;
          }
          if (r2 >= 1.0) continue;
          const double r = std::sqrt(r2);
          v += e.contrast * ramp(r);
          inside = inside || r <= 1.0 - 0.5 * kEdgeWidth;
        }
        const std::size_t i = d.offset(x, y, z);
        data[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        mask[i] = inside ? 1 : 0;
      }
    }
  }
  return {Volume(d, std::move(data), {1.0f, 1.0f, 1.0f}, IntensityDomain::Unit), std::move(mask)};
}

}  // namespace

void PhantomSpec::validate() const {
  if (dims.x < 8 || dims.y < 8 || dims.z < 8)
    throw ConfigError("phantom dims must each be >= 8, got " + to_string(dims));
  if (n_ellipsoids < 1) throw ConfigError("phantom n_ellipsoids must be >= 1");
  if (!(texture_scale > 0.0 && texture_scale <= 1.0)) throw ConfigError("phantom texture_scale must lie in (0,1]");
  if (!(background_level >= 0.0 && background_level <= 1.0))
    throw ConfigError("phantom background_level must lie in [0,1]");
}

Volume generate_phantom(const PhantomSpec& spec) { return render(spec).volume; }

LabeledPhantom generate_labeled_phantom(const PhantomSpec& spec) { return render(spec); }

}  // namespace genesis
