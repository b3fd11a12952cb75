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

#include "genesis/sampler.hpp"

#include <fstream>
#include <sstream>

namespace genesis {

void SamplerConfig::validate() const {
  if (crop_shape.count() == 0) throw ConfigError("sampler crop_shape must be positive");
  if (n_per_volume < 1) throw ConfigError("sampler n_per_volume must be >= 1");
  if (!(air_value_max > 0.0 && air_value_max < tissue_value_min && tissue_value_min < 1.0))
    throw ConfigError("sampler requires 0 < air_value_max < tissue_value_min < 1");
  if (!(reject_fraction > 0.0 && reject_fraction <= 1.0))
    throw ConfigError("sampler reject_fraction must lie in (0,1]");
  if (max_attempts_per_crop < 1) throw ConfigError("sampler max_attempts_per_crop must be >= 1");
}

SubVolume extract_subvolume(const Volume& v, Index3 origin, Dims3 shape, std::string source_id) {
  const Dims3& d = v.dims();
  for (std::size_t a = 0; a < 3; ++a) {
    if (shape[a] == 0 || origin[a] + shape[a] > d[a])
      throw ShapeError("crop " + to_string(shape) + " at " + to_string(origin) + " exceeds volume " + to_string(d));
  }
  SubVolume sv{std::vector<float>(shape.count()), shape, origin, std::move(source_id)};
  const auto src = v.data();
  for (std::size_t z = 0; z < shape.z; ++z) {
    for (std::size_t y = 0; y < shape.y; ++y) {
      const std::size_t from = d.offset(origin.x, origin.y + y, origin.z + z);
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), shape.x,
                  sv.data.begin() + static_cast<std::ptrdiff_t>(shape.offset(0, y, z)));
    }
  }
  return sv;
}

bool is_informative(const SubVolume& sv, const SamplerConfig& cfg) {
  if (sv.data.empty()) return false;
  std::size_t air = 0;
  std::size_t tissue = 0;
  for (float v : sv.data) {
    if (v < cfg.air_value_max) ++air;
    if (v > cfg.tissue_value_min) ++tissue;
  }
  const double n = static_cast<double>(sv.data.size());
  // "Exceeds" is read inclusively so a constant volume is always rejected,
  // including reject_fraction == 1.
  const bool empty = static_cast<double>(air) / n >= cfg.reject_fraction;
  const bool full = static_cast<double>(tissue) / n >= cfg.reject_fraction;
  return !(empty || full);
}

CropResult crop_subvolumes(const Volume& v, const SamplerConfig& cfg, const std::string& source_id) {
  cfg.validate();
  if (v.domain() != IntensityDomain::Unit) throw Error("crop_subvolumes expects a UNIT-domain volume");
  if (!cfg.crop_shape.fits_in(v.dims()))
    throw ShapeError("crop shape " + to_string(cfg.crop_shape) + " larger than volume " + to_string(v.dims()));

  Rng rng(mix_seed(cfg.seed));
  CropResult result;
  const std::size_t budget =
      static_cast<std::size_t>(cfg.n_per_volume) * static_cast<std::size_t>(cfg.max_attempts_per_crop);
  while (result.crops.size() < static_cast<std::size_t>(cfg.n_per_volume) && result.attempts < budget) {
    ++result.attempts;
    Index3 origin;
    for (std::size_t a = 0; a < 3; ++a)
      origin[a] = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(v.dims()[a] - cfg.crop_shape[a])));
    SubVolume sv = extract_subvolume(v, origin, cfg.crop_shape, source_id);
    if (is_informative(sv, cfg)) result.crops.push_back(std::move(sv));
  }
  result.shortfall = result.crops.size() < static_cast<std::size_t>(cfg.n_per_volume);
  return result;
}

void save_subvolumes(const std::vector<SubVolume>& crops, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest in '" + dir.string() + "'");
  for (std::size_t i = 0; i < crops.size(); ++i) {
    const SubVolume& sv = crops[i];
    char name[32];
    std::snprintf(name, sizeof(name), "crop_%05zu.mvol", i);
    write_mvol(Volume(sv.shape, sv.data), dir / name);
    const std::string id = sv.source_id.empty() ? "-" : sv.source_id;
    manifest << id << ' ' << sv.origin.x << ' ' << sv.origin.y << ' ' << sv.origin.z << ' ' << sv.shape.x << ' '
             << sv.shape.y << ' ' << sv.shape.z << ' ' << name << '\n';
  }
}

std::vector<SubVolume> load_subvolumes(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("missing manifest in '" + dir.string() + "'");
  std::vector<SubVolume> out;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    SubVolume sv;
    std::string file;
    if (!(ss >> sv.source_id >> sv.origin.x >> sv.origin.y >> sv.origin.z >> sv.shape.x >> sv.shape.y >> sv.shape.z >>
          file))
      throw IoError("malformed manifest line: " + line);
    if (sv.source_id == "-") sv.source_id.clear();
    const Volume v = read_mvol(dir / file);
    if (v.dims() != sv.shape) throw IoError("manifest shape disagrees with " + file);
    sv.data.assign(v.data().begin(), v.data().end());
    out.push_back(std::move(sv));
  }
  return out;
}

}  // namespace genesis
