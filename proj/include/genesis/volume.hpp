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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genesis/common.hpp"

namespace genesis {

enum class IntensityDomain : std::uint8_t { Hounsfield = 0, Unit = 1 };

using Spacing3 = std::array<float, 3>;

/// A 3D scalar field with voxel spacing. Immutable after construction; the
/// constructor enforces every invariant (payload size, spacing, unit range).
/// 2D images are volumes with dims.z == 1.
class Volume {
 public:
  Volume(Dims3 dims, std::vector<float> data, Spacing3 spacing = {1.0f, 1.0f, 1.0f},
         IntensityDomain domain = IntensityDomain::Unit);

  const Dims3& dims() const { return dims_; }
  const Spacing3& spacing() const { return spacing_; }
  IntensityDomain domain() const { return domain_; }
  std::span<const float> data() const { return data_; }

  float at(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[dims_.offset(x, y, z)];
  }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Dims3 dims_;
  std::vector<float> data_;
  Spacing3 spacing_;
  IntensityDomain domain_;
};

/// Thrown when an input scalar is NaN/Inf; carries the voxel coordinate.
class NonFiniteVoxelError : public Error {
 public:
  NonFiniteVoxelError(Index3 where);
  const Index3& where() const { return where_; }

 private:
  Index3 where_;
};

/// Clips Hounsfield units to [clip_lo, clip_hi] and rescales to [0, 1].
Volume normalize_ct(const Volume& v, float clip_lo = -1000.0f, float clip_hi = 1000.0f);

/// Min-max rescaling to [0, 1]; rejects constant volumes.
Volume normalize_minmax(const Volume& v);

// ---------------------------------------------------------------------------
// MVOL container (little-endian):
//   "MVOL" | u32 version=1 | u32 dims[3] | f32 spacing[3] | u8 dtype (1=f32)
//   | u8 domain | u8 reserved[2] | f32 payload[x*y*z], x fastest.
// ---------------------------------------------------------------------------

enum class MvolErrorCode {
  OpenFailed,
  BadMagic,
  UnsupportedVersion,
  UnsupportedDtype,
  BadDomain,
  BadHeader,
  Truncated,
  DimPayloadMismatch,
  InvalidContent,
};

const char* to_string(MvolErrorCode code);

class MvolError : public IoError {
 public:
  MvolError(MvolErrorCode code, const std::string& detail);
  MvolErrorCode code() const { return code_; }

 private:
  MvolErrorCode code_;
};

inline constexpr std::size_t kMvolHeaderBytes = 36;

std::vector<std::uint8_t> encode_mvol(const Volume& v);
Volume decode_mvol(std::span<const std::uint8_t> bytes);
void write_mvol(const Volume& v, const std::filesystem::path& path);
Volume read_mvol(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// NIfTI-1 (single-file .nii, uncompressed). Only int16 and float32 voxels;
// orientation is ignored and the grid is read as stored.
// ---------------------------------------------------------------------------

enum class NiftiErrorCode { OpenFailed, BadHeaderSize, UnsupportedDatatype, BadDims, Truncated };

class NiftiError : public IoError {
 public:
  NiftiError(NiftiErrorCode code, const std::string& detail);
  NiftiErrorCode code() const { return code_; }

 private:
  NiftiErrorCode code_;
};

inline constexpr std::int16_t kNiftiInt16 = 4;
inline constexpr std::int16_t kNiftiFloat32 = 16;
inline constexpr std::int16_t kNiftiComplex64 = 32;

/// Parsed view of a NIfTI-1 file. Voxels are returned in the HOUNSFIELD
/// (raw scanner) domain after slope/intercept scaling.
Volume decode_nifti1(std::span<const std::uint8_t> bytes);
Volume read_nifti1(const std::filesystem::path& path);

/// Minimal writer used by tests and tools. `scl_slope == 0` means unscaled.
struct NiftiWriteOptions {
  std::int16_t datatype = kNiftiFloat32;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
};
std::vector<std::uint8_t> encode_nifti1(Dims3 dims, std::span<const float> raw_values,
                                        Spacing3 spacing, const NiftiWriteOptions& opts = {});

// ---------------------------------------------------------------------------
// Phantoms
// ---------------------------------------------------------------------------

struct PhantomSpec {
  Dims3 dims{64, 64, 32};
  int n_ellipsoids = 8;
  /// Feature size of the background texture, in (0, 1].
  double texture_scale = 0.5;
  double background_level = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A phantom together with its ground-truth foreground (inside any
/// ellipsoid core), used to build synthetic target tasks.
struct LabeledPhantom {
  Volume volume;
  std::vector<std::uint8_t> mask;
};

/// Ellipsoidal blobs with cosine-ramped edges over value-noise texture,
/// clamped to [0, 1]. Pure function of the spec.
Volume generate_phantom(const PhantomSpec& spec);
LabeledPhantom generate_labeled_phantom(const PhantomSpec& spec);

}  // namespace genesis
