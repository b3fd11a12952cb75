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
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genesis/network.hpp"

namespace genesis {

enum class UpsampleMode : std::uint8_t { Nearest, Transposed };

struct UNetConfig {
  std::size_t in_channels = 1;
  std::size_t base_channels = 16;
  /// Number of pooling stages.
  std::size_t depth = 4;
  std::size_t out_channels = 1;
  /// 2D operation: kernels, pooling and upsampling leave the z axis alone.
  bool planar = false;
  UpsampleMode upsample = UpsampleMode::Nearest;

  /// Desk-scale preset: base 4, depth 2, 16x16x8 inputs.
  static UNetConfig toy();
  static constexpr Dims3 kToyInput{16, 16, 8};

  void validate() const;
  /// Throws ShapeError unless every pooled axis is divisible by 2^depth.
  void validate_input(Dims3 spatial) const;
  std::size_t stage_channels(std::size_t stage) const { return base_channels << stage; }

  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

const char* to_string(UpsampleMode m);
UpsampleMode parse_upsample_mode(const std::string& s);

/// Receptive field (in voxels, per axis x/y/z) of the restoration network.
Dims3 receptive_field(const UNetConfig& cfg);

/// Encoder stages plus bottleneck, registered under "enc<l>." and
/// "bottleneck." in the owning network's store.
template <typename Real>
class UNetEncoder {
 public:
  UNetEncoder() = default;
  UNetEncoder(nn::ParameterStore<Real>& store, const UNetConfig& cfg);

  /// Returns the bottleneck feature map; pre-pool activations of each stage
  /// are appended to `skips` when given.
  nn::Var operator()(nn::Tape<Real>& t, nn::Var x, nn::Mode mode, std::vector<nn::Var>* skips = nullptr) const;

  struct Block {
    nn::Conv3dLayer<Real> conv1;
    nn::BatchNormLayer<Real> bn1;
    nn::Conv3dLayer<Real> conv2;
    nn::BatchNormLayer<Real> bn2;
    nn::Var operator()(nn::Tape<Real>& t, nn::Var x, nn::Mode mode) const;
  };
  static Block make_block(nn::ParameterStore<Real>& store, const std::string& prefix, std::size_t in_ch,
                          std::size_t out_ch, bool planar);

 private:
  UNetConfig cfg_;
  std::vector<Block> stages_;
  Block bottleneck_;
};

/// Encoder-decoder with skip connections and a sigmoid 1x1x1 output layer.
/// The restoration variant names its output layer "out.conv"; the
/// segmentation variant uses a separate "seg_head.conv" so that transferred
/// checkpoints never populate it.
template <typename Real>
class UNet : public nn::Network<Real> {
 public:
  enum class Head { Restoration, Segmentation };

  explicit UNet(const UNetConfig& cfg, Head head = Head::Restoration);

  nn::Var forward(nn::Tape<Real>& t, nn::Var x) override;
  nn::Var encode(nn::Tape<Real>& t, nn::Var x) { return encoder_(t, x, this->mode_); }
  bool is_head_parameter(const std::string& name) const override;

  const UNetConfig& config() const { return cfg_; }
  Head head() const { return head_; }

 private:
  UNetConfig cfg_;
  Head head_;
  UNetEncoder<Real> encoder_;
  std::vector<nn::ConvTranspose3dLayer<Real>> up_;
  std::vector<typename UNetEncoder<Real>::Block> dec_;
  nn::Conv3dLayer<Real> out_;
};

/// Encoder, global average pooling and a stack of dense layers ending in a
/// sigmoid. Hidden dense layers use ReLU.
template <typename Real>
class EncoderClassifier : public nn::Network<Real> {
 public:
  EncoderClassifier(const UNetConfig& cfg, std::size_t n_classes = 1, std::vector<std::size_t> hidden = {1024});

  nn::Var forward(nn::Tape<Real>& t, nn::Var x) override;
  nn::Var encode(nn::Tape<Real>& t, nn::Var x) { return encoder_(t, x, encoder_mode()); }
  bool is_head_parameter(const std::string& name) const override;

  /// Fixed feature extractor: encoder parameters stop receiving gradients and
  /// its batch-norm layers run on their running statistics.
  void set_encoder_frozen(bool frozen);
  bool encoder_frozen() const { return frozen_; }

  const UNetConfig& config() const { return cfg_; }

 private:
  nn::Mode encoder_mode() const { return frozen_ ? nn::Mode::Eval : this->mode_; }

  UNetConfig cfg_;
  UNetEncoder<Real> encoder_;
  std::vector<nn::DenseLayer<Real>> fc_;
  bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// Checkpoints (little-endian):
//   "MGEN" | u32 version=1 | u32 meta_len | meta (key=value lines)
//   | u32 count | count x { u16 name_len | name | u8 dtype=1 | u8 rank
//   | u32 dims[rank] | f32 payload }
// Parameters come first in registry order, then batch-norm buffers.
// ---------------------------------------------------------------------------

struct NamedTensor {
  std::string name;
  nn::Shape shape;
  std::vector<float> data;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::uint32_t version = 1;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  std::string meta(const std::string& key, const std::string& fallback = {}) const;
  void set_meta(const std::string& key, const std::string& value);
  std::vector<std::string> names() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

enum class CheckpointErrorCode {
  OpenFailed,
  BadMagic,
  UnsupportedVersion,
  UnsupportedDtype,
  BadMetadata,
  Truncated,
  TensorLengthMismatch,
  TrailingBytes,
  DuplicateName,
};

const char* to_string(CheckpointErrorCode code);

class CheckpointError : public IoError {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& detail);
  CheckpointErrorCode code() const { return code_; }

 private:
  CheckpointErrorCode code_;
};

/// Raised when a checkpoint does not fit a network. Nothing is modified.
class CheckpointMismatchError : public Error {
 public:
  CheckpointMismatchError(std::vector<std::string> missing, std::vector<std::string> mismatched);
  const std::vector<std::string>& missing() const { return missing_; }
  const std::vector<std::string>& mismatched() const { return mismatched_; }

 private:
  std::vector<std::string> missing_;
  std::vector<std::string> mismatched_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Snapshot of every parameter and buffer of `net`.
Checkpoint make_checkpoint(const nn::Network<float>& net,
                           std::vector<std::pair<std::string, std::string>> metadata = {});
void save_checkpoint(const nn::Network<float>& net, std::vector<std::pair<std::string, std::string>> metadata,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct LoadReport {
  std::vector<std::string> loaded;
  /// Head parameters absent from the checkpoint; left as initialized.
  std::vector<std::string> kept_head;
  /// Checkpoint tensors the network has no use for.
  std::vector<std::string> ignored;
};

/// Copies matching tensors into `net`. Extra checkpoint tensors are ignored;
/// missing non-head tensors or shape disagreements raise
/// CheckpointMismatchError listing every offending name.
LoadReport load_into(nn::Network<float>& net, const Checkpoint& ckpt);

/// Encoder and bottleneck tensors of a restoration checkpoint or network.
Checkpoint extract_encoder(const Checkpoint& full);
Checkpoint extract_encoder(const nn::Network<float>& net);

/// Metadata describing `cfg`, and its inverse.
std::vector<std::pair<std::string, std::string>> config_metadata(const UNetConfig& cfg);
UNetConfig config_from_metadata(const Checkpoint& ckpt);

std::unique_ptr<EncoderClassifier<float>> attach_classification_head(const Checkpoint& encoder,
                                                                      const UNetConfig& cfg,
                                                                      std::size_t n_classes,
                                                                      std::vector<std::size_t> hidden,
                                                                      const nn::InitScheme& init);

std::unique_ptr<UNet<float>> attach_segmentation_head(const Checkpoint& full, const UNetConfig& cfg,
                                                      const nn::InitScheme& init);

}  // namespace genesis
