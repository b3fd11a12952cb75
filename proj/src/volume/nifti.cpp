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

#include <cmath>

#include "genesis/detail/bytes.hpp"
#include "genesis/volume.hpp"

namespace genesis {

namespace {

constexpr std::int32_t kHeaderSize = 348;
constexpr std::size_t kDimOffset = 40;
constexpr std::size_t kDatatypeOffset = 70;
constexpr std::size_t kPixdimOffset = 76;
constexpr std::size_t kVoxOffsetOffset = 108;
constexpr std::size_t kMagicOffset = 344;
constexpr std::size_t kSingleFileDataOffset = 352;

const char* to_string(NiftiErrorCode code) {
  switch (code) {
    case NiftiErrorCode::OpenFailed: return "open-failed";
    case NiftiErrorCode::BadHeaderSize: return "bad-header-size";
    case NiftiErrorCode::UnsupportedDatatype: return "unsupported-datatype";
    case NiftiErrorCode::BadDims: return "bad-dims";
    case NiftiErrorCode::Truncated: return "truncated";
  }
  return "unknown";
}

}  // namespace

NiftiError::NiftiError(NiftiErrorCode code, const std::string& detail)
    : IoError(std::string("nifti ") + to_string(code) + ": " + detail), code_(code) {}

Volume decode_nifti1(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const std::int32_t sizeof_hdr = r.i32();
  if (!r.ok()) throw NiftiError(NiftiErrorCode::Truncated, "file shorter than 4 bytes");
  if (sizeof_hdr != kHeaderSize) throw NiftiError(NiftiErrorCode::BadHeaderSize, std::to_string(sizeof_hdr));
  if (bytes.size() < static_cast<std::size_t>(kHeaderSize))
    throw NiftiError(NiftiErrorCode::Truncated, "header shorter than 348 bytes");

  r.seek(kDimOffset);
  std::int16_t dim[8];
  for (auto& d : dim) d = r.i16();
  r.seek(kDatatypeOffset);
  const std::int16_t datatype = r.i16();
  r.seek(kPixdimOffset);
  float pixdim[8];
  for (auto& p : pixdim) p = r.f32();
  r.seek(kVoxOffsetOffset);
  const float vox_offset = r.f32();
  const float scl_slope = r.f32();
  const float scl_inter = r.f32();

  if (datatype != kNiftiInt16 && datatype != kNiftiFloat32)
    throw NiftiError(NiftiErrorCode::UnsupportedDatatype, "datatype code " + std::to_string(datatype));
  if (dim[0] != 2 && dim[0] != 3) throw NiftiError(NiftiErrorCode::BadDims, "dim[0]=" + std::to_string(dim[0]));
  const int nz = dim[0] == 3 ? dim[3] : 1;
  if (dim[1] <= 0 || dim[2] <= 0 || nz <= 0) throw NiftiError(NiftiErrorCode::BadDims, "non-positive extent");
  const Dims3 dims{static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]), static_cast<std::size_t>(nz)};

  Spacing3 spacing{};
  for (int a = 0; a < 3; ++a) {
    const float p = std::fabs(pixdim[a + 1]);
    spacing[a] = (a < dim[0] && std::isfinite(p) && p > 0.0f) ? p : 1.0f;
  }

  const std::size_t offset = vox_offset >= static_cast<float>(kHeaderSize)
                                 ? static_cast<std::size_t>(vox_offset)
                                 : kSingleFileDataOffset;
  const std::size_t elem = datatype == kNiftiInt16 ? 2 : 4;
  if (bytes.size() < offset + dims.count() * elem)
    throw NiftiError(NiftiErrorCode::Truncated, "payload shorter than " + to_string(dims) + " voxels");

  r.seek(offset);
  const bool scaled = scl_slope != 0.0f && std::isfinite(scl_slope);
  std::vector<float> data(dims.count());
  for (float& v : data) {
    const float raw = datatype == kNiftiInt16 ? static_cast<float>(r.i16()) : r.f32();
    v = scaled ? scl_slope * raw + scl_inter : raw;
  }
  return Volume(dims, std::move(data), spacing, IntensityDomain::Hounsfield);
}

Volume read_nifti1(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  if (!detail::slurp(path, bytes)) throw NiftiError(NiftiErrorCode::OpenFailed, path.string());
  return decode_nifti1(bytes);
}

std::vector<std::uint8_t> encode_nifti1(Dims3 dims, std::span<const float> raw_values, Spacing3 spacing,
                                        const NiftiWriteOptions& opts) {
  if (raw_values.size() != dims.count()) throw ShapeError("encode_nifti1: value count does not match dims");
  detail::ByteWriter w;
  w.i32(kHeaderSize);
  w.zeros(kDimOffset - w.size());
  const std::int16_t ndim = dims.z == 1 ? 2 : 3;
  w.i16(ndim);
  w.i16(static_cast<std::int16_t>(dims.x));
  w.i16(static_cast<std::int16_t>(dims.y));
  w.i16(static_cast<std::int16_t>(dims.z));
  for (int i = 0; i < 4; ++i) w.i16(1);
  w.zeros(kDatatypeOffset - w.size());
  w.i16(opts.datatype);
  w.i16(opts.datatype == kNiftiInt16 ? 16 : 32);
  w.i16(0);  // slice_start
  w.f32(1.0f);  // pixdim[0] = qfac
  for (float s : spacing) w.f32(s);
  for (int i = 0; i < 4; ++i) w.f32(1.0f);
  w.f32(static_cast<float>(kSingleFileDataOffset));
  w.f32(opts.scl_slope);
  w.f32(opts.scl_inter);
  w.zeros(kMagicOffset - w.size());
  w.bytes(std::string_view("n+1\0", 4));
  w.zeros(4);  // extension flag
  for (float v : raw_values) {
    if (opts.datatype == kNiftiInt16) {
      w.i16(static_cast<std::int16_t>(std::lround(v)));
    } else {
      w.f32(v);
    }
  }
  return w.take();
}

}  // namespace genesis
