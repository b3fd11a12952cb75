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
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include "genesis/common.hpp"

namespace genesis::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor. Rank-5 activations use N,C,D,H,W with W fastest,
/// which matches the x-fastest order of volumes (W=x, H=y, D=z).
template <typename Real>
struct Tensor {
  Shape shape;
  std::vector<Real> data;

  Tensor() = default;
  explicit Tensor(Shape s, Real fill = Real(0)) : shape(std::move(s)), data(numel(shape), fill) {}
  Tensor(Shape s, std::vector<Real> d);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  bool empty() const { return data.empty(); }
  Real& operator[](std::size_t i) { return data[i]; }
  const Real& operator[](std::size_t i) const { return data[i]; }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// A named trainable tensor with its gradient accumulator. Frozen parameters
/// (requires_grad == false) receive no gradient and are skipped by optimizers.
template <typename Real>
struct Parameter {
  enum class Role { Weight, Bias, Scale, Shift };

  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  Role role = Role::Weight;
  bool requires_grad = true;

  void zero_grad() { grad = Tensor<Real>(value.shape); }
};

enum class Mode { Train, Eval };

struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
};

/// Reverse-mode tape. Every op appends a node holding its output and a
/// backward closure; backward() walks the nodes in reverse insertion order,
/// which is a topological order by construction.
template <typename Real>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor<Real> value);
  /// A leaf whose gradient can be read back with grad() after backward().
  Var leaf(Tensor<Real> value);
  Var param(Parameter<Real>& p);
  Var record(Tensor<Real> value, std::initializer_list<Var> parents, BackwardFn backward);

  const Tensor<Real>& value(Var v) const { return nodes_.at(v.id).value; }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  /// Gradient buffer of a node, allocated as zeros on first access.
  Tensor<Real>& grad(Var v) { return grad(v.id); }
  Tensor<Real>& grad(std::size_t id);
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_.at(id).parents; }

  /// Seeds d(loss)/d(loss) = 1 and accumulates into every reachable
  /// parameter's grad. Throws for non-scalar losses.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  /// Piecewise ops (ReLU masks, max-pool winners) fold their discrete
  /// decisions in here. Two passes with equal signatures took the same
  /// branch everywhere, so a finite difference between them is meaningful.
  void note_branch(std::uint64_t h) { branch_ = (branch_ ^ h) * 0x100000001b3ULL + 0x9e3779b97f4a7c15ULL; }
  std::uint64_t branch_signature() const { return branch_; }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Parameter<Real>* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::uint64_t branch_ = 0;
};

// ---------------------------------------------------------------------------
// Operations. Spatial triples are ordered (D, H, W).
// ---------------------------------------------------------------------------

using Triple = std::array<std::size_t, 3>;

struct ConvGeometry {
  Triple stride{1, 1, 1};
  Triple padding{0, 0, 0};
};

/// Output extent of a convolution along one axis.
constexpr std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

/// x [N,C,D,H,W], weight [O,C,kd,kh,kw], bias [O] (bias may be a default Var).
template <typename Real>
Var conv3d(Tape<Real>& t, Var x, Var weight, Var bias, const ConvGeometry& g = {});

/// x [N,C,D,H,W], weight [C,O,kd,kh,kw]; output extent (in-1)*stride - 2*pad + k.
template <typename Real>
Var conv_transpose3d(Tape<Real>& t, Var x, Var weight, Var bias, const ConvGeometry& g = {});

template <typename Real>
struct BatchNormState {
  Tensor<Real>* running_mean = nullptr;
  Tensor<Real>* running_var = nullptr;
  Real eps = Real(1e-5);
  /// Weight of the current batch statistic in the running update.
  Real momentum = Real(0.1);
};

/// Per-channel normalization over (N, D, H, W). TRAIN uses batch statistics
/// and updates the running ones; EVAL uses the running statistics.
template <typename Real>
Var batchnorm(Tape<Real>& t, Var x, Var gamma, Var beta, const BatchNormState<Real>& state, Mode mode);

template <typename Real>
Var relu(Tape<Real>& t, Var x);

template <typename Real>
Var sigmoid(Tape<Real>& t, Var x);

template <typename Real>
Var maxpool3d(Tape<Real>& t, Var x, Triple kernel = {2, 2, 2});

/// Nearest-neighbour upsampling by an integer factor per axis.
template <typename Real>
Var upsample3d(Tape<Real>& t, Var x, Triple factor = {2, 2, 2});

template <typename Real>
Var concat_channels(Tape<Real>& t, Var a, Var b);

/// x [N,F], weight [O,F], bias [O].
template <typename Real>
Var dense(Tape<Real>& t, Var x, Var weight, Var bias);

/// [N,C,D,H,W] -> [N,C].
template <typename Real>
Var global_avg_pool(Tape<Real>& t, Var x);

template <typename Real>
Var add(Tape<Real>& t, Var a, Var b);

template <typename Real>
Var mul(Tape<Real>& t, Var a, Var b);

template <typename Real>
Var scale(Tape<Real>& t, Var x, Real factor);

/// Sum of all elements, as a scalar of shape [1].
template <typename Real>
Var sum(Tape<Real>& t, Var x);

/// Mean squared error; gradient 2(pred - target)/N.
template <typename Real>
Var mse_loss(Tape<Real>& t, Var pred, Var target);

/// Mean binary cross-entropy on probabilities, clamped away from 0 and 1.
template <typename Real>
Var bce_loss(Tape<Real>& t, Var prob, Var target);

/// Soft Dice loss 1 - (2*sum(p*y) + smooth) / (sum(p) + sum(y) + smooth),
/// pooled over every element.
template <typename Real>
Var dice_loss(Tape<Real>& t, Var prob, Var target, double smooth = 1.0);

}  // namespace genesis::nn
