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
constexpr char kMagic[4] = {'M', 'V', 'O', 'L'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 1;
}  // namespace

const char* to_string(MvolErrorCode code) {
  switch (code) {
    case MvolErrorCode::OpenFailed: return "open-failed";
    case MvolErrorCode::BadMagic: return "bad-magic";
    case MvolErrorCode::UnsupportedVersion: return "unsupported-version";
    case MvolErrorCode::UnsupportedDtype: return "unsupported-dtype";
    case MvolErrorCode::BadDomain: return "bad-domain";
    case MvolErrorCode::BadHeader: return "bad-header";
    case MvolErrorCode::Truncated: return "truncated";
    case MvolErrorCode::DimPayloadMismatch: return "dim-payload-mismatch";
    case MvolErrorCode::InvalidContent: return "invalid-content";
  }
  return "unknown";
}

MvolError::MvolError(MvolErrorCode code, const std::string& detail)
    : IoError(std::string("mvol ") + to_string(code) + ": " + detail), code_(code) {}

std::vector<std::uint8_t> encode_mvol(const Volume& v) {
  detail::ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(v.dims().x));
  w.u32(static_cast<std::uint32_t>(v.dims().y));
  w.u32(static_cast<std::uint32_t>(v.dims().z));
  for (float s : v.spacing()) w.f32(s);
  w.u8(kDtypeF32);
  w.u8(static_cast<std::uint8_t>(v.domain()));
  w.zeros(2);
  for (float x : v.data()) w.f32(x);
  return w.take();
}

Volume decode_mvol(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const std::string magic = r.str(4);
  if (!r.ok()) throw MvolError(MvolErrorCode::Truncated, "file shorter than magic");
  if (magic != std::string_view(kMagic, 4)) throw MvolError(MvolErrorCode::BadMagic, "magic '" + magic + "'");
  const std::uint32_t version = r.u32();
  Dims3 dims{r.u32(), r.u32(), r.u32()};
  Spacing3 spacing{r.f32(), r.f32(), r.f32()};
  const std::uint8_t dtype = r.u8();
  const std::uint8_t domain = r.u8();
  r.skip(2);
  if (!r.ok()) throw MvolError(MvolErrorCode::Truncated, "header shorter than 36 bytes");
  if (version != kVersion) throw MvolError(MvolErrorCode::UnsupportedVersion, std::to_string(version));
  if (dtype != kDtypeF32) throw MvolError(MvolErrorCode::UnsupportedDtype, std::to_string(dtype));
  if (domain > 1) throw MvolError(MvolErrorCode::BadDomain, std::to_string(domain));
  if (dims.count() == 0) throw MvolError(MvolErrorCode::BadHeader, "zero dimension " + to_string(dims));

  const std::size_t want = dims.count() * sizeof(float);
  if (r.remaining() < want) {
    throw MvolError(MvolErrorCode::Truncated, "dims " + to_string(dims) + " need " + std::to_string(want) +
                                                  " payload bytes, found " + std::to_string(r.remaining()));
  }
  if (r.remaining() > want) {
    throw MvolError(MvolErrorCode::DimPayloadMismatch, "dims " + to_string(dims) + " need " +
                                                           std::to_string(want) + " payload bytes, found " +
                                                           std::to_string(r.remaining()));
  }
  std::vector<float> data(dims.count());
  for (float& x : data) x = r.f32();
  try {
    return Volume(dims, std::move(data), spacing, static_cast<IntensityDomain>(domain));
  } catch (const Error& e) {
    throw MvolError(MvolErrorCode::InvalidContent, e.what());
  }
}

void write_mvol(const Volume& v, const std::filesystem::path& path) {
  detail::spit(path, encode_mvol(v));
}

Volume read_mvol(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  if (!detail::slurp(path, bytes)) throw MvolError(MvolErrorCode::OpenFailed, path.string());
  return decode_mvol(bytes);
}

}  // namespace genesis
