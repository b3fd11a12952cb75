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

#include <charconv>
#include <set>
#include <sstream>

#include "genesis/detail/bytes.hpp"
#include "genesis/model.hpp"

namespace genesis {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'E', 'N'};
constexpr std::uint8_t kDtypeF32 = 1;

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s;
}

bool is_encoder_name(const std::string& name) {
  return name.rfind("enc", 0) == 0 || name.rfind("bottleneck.", 0) == 0;
}

}  // namespace

const char* to_string(CheckpointErrorCode code) {
  switch (code) {
    case CheckpointErrorCode::OpenFailed: return "open-failed";
    case CheckpointErrorCode::BadMagic: return "bad-magic";
    case CheckpointErrorCode::UnsupportedVersion: return "unsupported-version";
    case CheckpointErrorCode::UnsupportedDtype: return "unsupported-dtype";
    case CheckpointErrorCode::BadMetadata: return "bad-metadata";
    case CheckpointErrorCode::Truncated: return "truncated";
    case CheckpointErrorCode::TensorLengthMismatch: return "tensor-length-mismatch";
    case CheckpointErrorCode::TrailingBytes: return "trailing-bytes";
    case CheckpointErrorCode::DuplicateName: return "duplicate-name";
  }
  return "?";
}

CheckpointError::CheckpointError(CheckpointErrorCode code, const std::string& detail)
    : IoError(std::string("checkpoint ") + to_string(code) + ": " + detail), code_(code) {}

CheckpointMismatchError::CheckpointMismatchError(std::vector<std::string> missing, std::vector<std::string> mismatched)
    : Error("checkpoint does not fit the network" + (missing.empty() ? std::string() : "; missing: " + join(missing)) +
            (mismatched.empty() ? std::string() : "; shape mismatch: " + join(mismatched))),
      missing_(std::move(missing)),
      mismatched_(std::move(mismatched)) {}

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::string Checkpoint::meta(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return v;
  return fallback;
}

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : metadata)
    if (k == key) {
      v = value;
      return;
    }
  metadata.emplace_back(key, value);
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  for (const auto& t : tensors) out.push_back(t.name);
  return out;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::string meta;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.empty() || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw CheckpointError(CheckpointErrorCode::BadMetadata, "metadata entry '" + k + "' cannot be encoded");
    }
    meta += k + "=" + v + "\n";
  }
  detail::ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(ckpt.version);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const NamedTensor& t : ckpt.tensors) {
    if (t.name.empty() || t.name.size() > 0xffff) {
      throw CheckpointError(CheckpointErrorCode::BadMetadata, "tensor name length out of range");
    }
    if (t.shape.size() > 0xff || nn::numel(t.shape) != t.data.size()) {
      throw CheckpointError(CheckpointErrorCode::TensorLengthMismatch,
                            "tensor '" + t.name + "' payload does not match shape " + nn::shape_str(t.shape));
    }
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name);
    w.u8(kDtypeF32);
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data) w.f32(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  using Code = CheckpointErrorCode;
  detail::ByteReader r(bytes);
  const std::string magic = r.str(4);
  if (!r.ok()) throw CheckpointError(Code::Truncated, "file shorter than magic");
  if (magic != std::string_view(kMagic, 4)) throw CheckpointError(Code::BadMagic, "expected MGEN");
  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (!r.ok()) throw CheckpointError(Code::Truncated, "missing version");
  if (ckpt.version != kCheckpointVersion) {
    throw CheckpointError(Code::UnsupportedVersion, "version " + std::to_string(ckpt.version));
  }
  const std::uint32_t meta_len = r.u32();
  const std::string meta = r.str(meta_len);
  if (!r.ok()) throw CheckpointError(Code::Truncated, "metadata block");
  std::size_t pos = 0;
  while (pos < meta.size()) {
    const std::size_t nl = meta.find('\n', pos);
    if (nl == std::string::npos) throw CheckpointError(Code::BadMetadata, "unterminated metadata line");
    const std::string line = meta.substr(pos, nl - pos);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos || eq == 0) throw CheckpointError(Code::BadMetadata, "line '" + line + "'");
    ckpt.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    pos = nl + 1;
  }

  const std::uint32_t count = r.u32();
  if (!r.ok()) throw CheckpointError(Code::Truncated, "missing tensor count");
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const std::uint16_t name_len = r.u16();
    t.name = r.str(name_len);
    const std::uint8_t dtype = r.u8();
    const std::uint8_t rank = r.u8();
    if (!r.ok()) throw CheckpointError(Code::Truncated, "tensor header " + std::to_string(i));
    if (dtype != kDtypeF32) {
      throw CheckpointError(Code::UnsupportedDtype, "tensor '" + t.name + "' dtype " + std::to_string(dtype));
    }
    if (!seen.insert(t.name).second) throw CheckpointError(Code::DuplicateName, "tensor '" + t.name + "'");
    std::size_t n = 1;
    for (std::uint8_t a = 0; a < rank; ++a) {
      const std::uint32_t d = r.u32();
      if (!r.ok()) throw CheckpointError(Code::Truncated, "tensor '" + t.name + "' dims");
      t.shape.push_back(d);
      n = d == 0 ? 0 : (n > r.remaining() / d ? r.remaining() + 1 : n * d);
    }
    if (n * 4 > r.remaining()) {
      throw CheckpointError(Code::TensorLengthMismatch, "tensor '" + t.name + "' declares shape " +
                                                            nn::shape_str(t.shape) + " but only " +
                                                            std::to_string(r.remaining()) + " bytes remain");
    }
    t.data.resize(n);
    for (float& v : t.data) v = r.f32();
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) {
    throw CheckpointError(Code::TrailingBytes, std::to_string(r.remaining()) + " bytes after the last tensor");
  }
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  detail::spit(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  if (!detail::slurp(path, bytes)) {
    throw CheckpointError(CheckpointErrorCode::OpenFailed, "cannot open '" + path.string() + "'");
  }
  return decode_checkpoint(bytes);
}

Checkpoint make_checkpoint(const nn::Network<float>& net, std::vector<std::pair<std::string, std::string>> metadata) {
  Checkpoint c;
  c.metadata = std::move(metadata);
  for (const auto& p : net.store().parameters()) c.tensors.push_back({p->name, p->value.shape, p->value.data});
  for (const auto& [name, buf] : net.store().buffers()) c.tensors.push_back({name, buf->shape, buf->data});
  return c;
}

void save_checkpoint(const nn::Network<float>& net, std::vector<std::pair<std::string, std::string>> metadata,
                     const std::filesystem::path& path) {
  write_checkpoint(make_checkpoint(net, std::move(metadata)), path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return read_checkpoint(path); }

LoadReport load_into(nn::Network<float>& net, const Checkpoint& ckpt) {
  LoadReport report;
  std::vector<std::string> missing, mismatched;
  std::vector<std::pair<nn::Tensor<float>*, const NamedTensor*>> plan;
  std::set<std::string> used;

  auto consider = [&](const std::string& name, nn::Tensor<float>& target, bool head) {
    const NamedTensor* src = ckpt.find(name);
    if (src == nullptr) {
      (head ? report.kept_head : missing).push_back(name);
      return;
    }
    used.insert(name);
    if (src->shape != target.shape) {
      mismatched.push_back(name + " " + nn::shape_str(src->shape) + " vs " + nn::shape_str(target.shape));
      return;
    }
    plan.emplace_back(&target, src);
    report.loaded.push_back(name);
  };
  for (const auto& p : net.store().parameters()) consider(p->name, p->value, net.is_head_parameter(p->name));
  for (const auto& [name, buf] : net.store().buffers()) consider(name, *buf, net.is_head_parameter(name));

  if (!missing.empty() || !mismatched.empty()) throw CheckpointMismatchError(missing, mismatched);
  for (auto& [dst, src] : plan) dst->data = src->data;
  for (const auto& t : ckpt.tensors)
    if (!used.count(t.name)) report.ignored.push_back(t.name);
  return report;
}

Checkpoint extract_encoder(const Checkpoint& full) {
  Checkpoint out;
  out.version = full.version;
  out.metadata = full.metadata;
  bool bottleneck = false;
  for (const auto& t : full.tensors) {
    if (!is_encoder_name(t.name)) continue;
    bottleneck = bottleneck || t.name.rfind("bottleneck.", 0) == 0;
    out.tensors.push_back(t);
  }
  if (out.tensors.empty() || !bottleneck) {
    throw Error("extract_encoder: no encoder/bottleneck tensors found; not a U-Net checkpoint");
  }
  out.set_meta("content", "encoder");
  return out;
}

Checkpoint extract_encoder(const nn::Network<float>& net) { return extract_encoder(make_checkpoint(net)); }

std::vector<std::pair<std::string, std::string>> config_metadata(const UNetConfig& cfg) {
  return {{"model.in_channels", std::to_string(cfg.in_channels)},
          {"model.base_channels", std::to_string(cfg.base_channels)},
          {"model.depth", std::to_string(cfg.depth)},
          {"model.out_channels", std::to_string(cfg.out_channels)},
          {"model.planar", cfg.planar ? "true" : "false"},
          {"model.upsample", to_string(cfg.upsample)}};
}

UNetConfig config_from_metadata(const Checkpoint& ckpt) {
  UNetConfig cfg;
  auto num = [&](const std::string& key, std::size_t fallback) {
    const std::string v = ckpt.meta(key);
    if (v.empty()) return fallback;
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      throw CheckpointError(CheckpointErrorCode::BadMetadata, key + "=" + v);
    }
    return out;
  };
  cfg.in_channels = num("model.in_channels", cfg.in_channels);
  cfg.base_channels = num("model.base_channels", cfg.base_channels);
  cfg.depth = num("model.depth", cfg.depth);
  cfg.out_channels = num("model.out_channels", cfg.out_channels);
  cfg.planar = ckpt.meta("model.planar", "false") == "true";
  cfg.upsample = parse_upsample_mode(ckpt.meta("model.upsample", "nearest"));
  return cfg;
}

std::unique_ptr<EncoderClassifier<float>> attach_classification_head(const Checkpoint& encoder, const UNetConfig& cfg,
                                                                      std::size_t n_classes,
                                                                      std::vector<std::size_t> hidden,
                                                                      const nn::InitScheme& init) {
  auto net = std::make_unique<EncoderClassifier<float>>(cfg, n_classes, std::move(hidden));
  nn::init_weights(*net, init);
  load_into(*net, encoder);
  return net;
}

std::unique_ptr<UNet<float>> attach_segmentation_head(const Checkpoint& full, const UNetConfig& cfg,
                                                      const nn::InitScheme& init) {
  auto net = std::make_unique<UNet<float>>(cfg, UNet<float>::Head::Segmentation);
  nn::init_weights(*net, init);
  load_into(*net, full);
  return net;
}

}  // namespace genesis
