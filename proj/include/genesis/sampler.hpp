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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "genesis/common.hpp"
#include "genesis/volume.hpp"

namespace genesis {

/// A fixed-shape crop of a UNIT-domain volume. Owns a copy of its voxels.
struct SubVolume {
  std::vector<float> data;
  Dims3 shape;
  Index3 origin;
  std::string source_id;

  float& at(std::size_t x, std::size_t y, std::size_t z) { return data[shape.offset(x, y, z)]; }
  float at(std::size_t x, std::size_t y, std::size_t z) const { return data[shape.offset(x, y, z)]; }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const SubVolume&, const SubVolume&) = default;
};

struct SamplerConfig {
  Dims3 crop_shape{64, 64, 32};
  int n_per_volume = 16;
  double air_value_max = 0.05;
  double tissue_value_min = 0.95;
  double reject_fraction = 0.95;
  int max_attempts_per_crop = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CropResult {
  std::vector<SubVolume> crops;
  /// True when fewer than n_per_volume informative crops were found within
  /// the attempt budget.
  bool shortfall = false;
  std::size_t attempts = 0;
};

/// Copies the crop of `shape` at `origin` out of `v`.
SubVolume extract_subvolume(const Volume& v, Index3 origin, Dims3 shape, std::string source_id = {});

/// False for crops that are mostly air or mostly full tissue.
bool is_informative(const SubVolume& sv, const SamplerConfig& cfg);

/// Rejection-samples up to cfg.n_per_volume informative crops with origins
/// uniform over all valid positions. Crops may overlap.
CropResult crop_subvolumes(const Volume& v, const SamplerConfig& cfg, const std::string& source_id = {});

/// Writes each crop as `<dir>/crop_NNNNN.mvol` plus `<dir>/manifest.txt`
/// (one line per crop: source_id ox oy oz sx sy sz file).
void save_subvolumes(const std::vector<SubVolume>& crops, const std::filesystem::path& dir);
std::vector<SubVolume> load_subvolumes(const std::filesystem::path& dir);

}  // namespace genesis
