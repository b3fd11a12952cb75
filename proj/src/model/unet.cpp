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

#include "genesis/model.hpp"

namespace genesis {

using nn::Mode;
using nn::Tape;
using nn::Triple;
using nn::Var;

UNetConfig UNetConfig::toy() {
  UNetConfig c;
  c.base_channels = 4;
  c.depth = 2;
  return c;
}

void UNetConfig::validate() const {
  if (in_channels < 1) throw ConfigError("model.in_channels must be >= 1");
  if (base_channels < 1) throw ConfigError("model.base_channels must be >= 1");
  if (depth < 1) throw ConfigError("model.depth must be >= 1");
  if (depth > 8) throw ConfigError("model.depth must be <= 8");
  if (out_channels < 1) throw ConfigError("model.out_channels must be >= 1");
}

void UNetConfig::validate_input(Dims3 s) const {
  const std::size_t f = std::size_t{1} << depth;
  const bool ok = s.x % f == 0 && s.y % f == 0 && (planar ? s.z == 1 : s.z % f == 0) && s.count() > 0;
  if (!ok) {
    throw ShapeError("input " + to_string(s) + " is not divisible by 2^" + std::to_string(depth) +
                     (planar ? " in x/y (planar mode also needs z == 1)" : " along every axis"));
  }
}

const char* to_string(UpsampleMode m) { return m == UpsampleMode::Nearest ? "nearest" : "transposed"; }

UpsampleMode parse_upsample_mode(const std::string& s) {
  if (s == "nearest") return UpsampleMode::Nearest;
  if (s == "transposed") return UpsampleMode::Transposed;
  throw ConfigError("unknown upsample mode '" + s + "' (expected nearest or transposed)");
}

Dims3 receptive_field(const UNetConfig& cfg) {
  // Classic recursion: rf grows by (k-1)*jump per layer; pooling doubles the
  // jump and upsampling halves it.
  Dims3 out;
  for (int axis = 0; axis < 3; ++axis) {
    if (axis == 2 && cfg.planar) {
      out[axis] = 1;
      continue;
    }
    std::size_t rf = 1, jump = 1;
    auto conv = [&](std::size_t k) { rf += (k - 1) * jump; };
    for (std::size_t l = 0; l < cfg.depth; ++l) {
      conv(3);
      conv(3);
      conv(2);
      jump *= 2;
    }
    conv(3);
    conv(3);
    for (std::size_t l = 0; l < cfg.depth; ++l) {
      jump /= 2;
      conv(3);
      conv(3);
    }
    out[axis] = rf;
  }
  return out;
}

namespace {

Triple kernel3(bool planar) { return planar ? Triple{1, 3, 3} : Triple{3, 3, 3}; }
Triple pad3(bool planar) { return planar ? Triple{0, 1, 1} : Triple{1, 1, 1}; }
Triple pool2(bool planar) { return planar ? Triple{1, 2, 2} : Triple{2, 2, 2}; }

}  // namespace

template <typename Real>
typename UNetEncoder<Real>::Block UNetEncoder<Real>::make_block(nn::ParameterStore<Real>& store,
                                                                const std::string& prefix, std::size_t in_ch,
                                                                std::size_t out_ch, bool planar) {
  const nn::ConvGeometry g{{1, 1, 1}, pad3(planar)};
  return Block{nn::Conv3dLayer<Real>(store, prefix + ".conv1", in_ch, out_ch, kernel3(planar), g),
               nn::BatchNormLayer<Real>(store, prefix + ".bn1", out_ch),
               nn::Conv3dLayer<Real>(store, prefix + ".conv2", out_ch, out_ch, kernel3(planar), g),
               nn::BatchNormLayer<Real>(store, prefix + ".bn2", out_ch)};
}

template <typename Real>
Var UNetEncoder<Real>::Block::operator()(Tape<Real>& t, Var x, Mode mode) const {
  Var h = nn::relu(t, bn1(t, conv1(t, x), mode));
  return nn::relu(t, bn2(t, conv2(t, h), mode));
}

template <typename Real>
UNetEncoder<Real>::UNetEncoder(nn::ParameterStore<Real>& store, const UNetConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  std::size_t in = cfg.in_channels;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    stages_.push_back(make_block(store, "enc" + std::to_string(l), in, cfg.stage_channels(l), cfg.planar));
    in = cfg.stage_channels(l);
  }
  bottleneck_ = make_block(store, "bottleneck", in, cfg.stage_channels(cfg.depth), cfg.planar);
}

template <typename Real>
Var UNetEncoder<Real>::operator()(Tape<Real>& t, Var x, Mode mode, std::vector<Var>* skips) const {
  const auto& shape = t.value(x).shape;
  if (shape.size() != 5 || shape[1] != cfg_.in_channels) {
    throw ShapeError("network input must be [N," + std::to_string(cfg_.in_channels) + ",D,H,W], got " +
                     nn::shape_str(shape));
  }
  cfg_.validate_input(Dims3{shape[4], shape[3], shape[2]});
  Var h = x;
  for (const Block& b : stages_) {
    h = b(t, h, mode);
    if (skips) skips->push_back(h);
    h = nn::maxpool3d(t, h, pool2(cfg_.planar));
  }
  return bottleneck_(t, h, mode);
}

template <typename Real>
UNet<Real>::UNet(const UNetConfig& cfg, Head head) : cfg_(cfg), head_(head), encoder_(this->store_, cfg) {
  auto& store = this->store_;
  std::size_t below = cfg.stage_channels(cfg.depth);
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::size_t l = cfg.depth - 1 - i;
    const std::string prefix = "dec" + std::to_string(l);
    if (cfg.upsample == UpsampleMode::Transposed) {
      up_.emplace_back(store, prefix + ".up", below, below, pool2(cfg.planar), nn::ConvGeometry{pool2(cfg.planar), {}});
    }
    dec_.push_back(UNetEncoder<Real>::make_block(store, prefix, below + cfg.stage_channels(l), cfg.stage_channels(l),
                                                 cfg.planar));
    below = cfg.stage_channels(l);
  }
  const std::string out_name = head == Head::Restoration ? "out.conv" : "seg_head.conv";
  out_ = nn::Conv3dLayer<Real>(store, out_name, cfg.base_channels, cfg.out_channels, {1, 1, 1}, {});
}

template <typename Real>
Var UNet<Real>::forward(Tape<Real>& t, Var x) {
  std::vector<Var> skips;
  Var h = encoder_(t, x, this->mode_, &skips);
  for (std::size_t i = 0; i < dec_.size(); ++i) {
    h = cfg_.upsample == UpsampleMode::Transposed ? up_[i](t, h) : nn::upsample3d(t, h, pool2(cfg_.planar));
    h = nn::concat_channels(t, h, skips[skips.size() - 1 - i]);
    h = dec_[i](t, h, this->mode_);
  }
  return nn::sigmoid(t, out_(t, h));
}

template <typename Real>
bool UNet<Real>::is_head_parameter(const std::string& name) const {
  return head_ == Head::Segmentation && name.rfind("seg_head.", 0) == 0;
}

template <typename Real>
EncoderClassifier<Real>::EncoderClassifier(const UNetConfig& cfg, std::size_t n_classes,
                                           std::vector<std::size_t> hidden)
    : cfg_(cfg), encoder_(this->store_, cfg) {
  if (n_classes < 1) throw ConfigError("classifier needs at least one output");
  std::size_t in = cfg.stage_channels(cfg.depth);
  hidden.push_back(n_classes);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (hidden[i] < 1) throw ConfigError("classifier layer widths must be positive");
    fc_.emplace_back(this->store_, "fc" + std::to_string(i), in, hidden[i]);
    in = hidden[i];
  }
}

template <typename Real>
Var EncoderClassifier<Real>::forward(Tape<Real>& t, Var x) {
  Var h = nn::global_avg_pool(t, encoder_(t, x, encoder_mode()));
  for (std::size_t i = 0; i < fc_.size(); ++i) {
    h = fc_[i](t, h);
    if (i + 1 < fc_.size()) h = nn::relu(t, h);
  }
  return nn::sigmoid(t, h);
}

template <typename Real>
bool EncoderClassifier<Real>::is_head_parameter(const std::string& name) const {
  return name.rfind("fc", 0) == 0;
}

template <typename Real>
void EncoderClassifier<Real>::set_encoder_frozen(bool frozen) {
  frozen_ = frozen;
  for (const auto& p : this->store_.parameters())
    if (!is_head_parameter(p->name)) p->requires_grad = !frozen;
}

template class UNetEncoder<float>;
template class UNetEncoder<double>;
template class UNet<float>;
template class UNet<double>;
template class EncoderClassifier<float>;
template class EncoderClassifier<double>;

}  // namespace genesis
