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
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "genesis/tensor.hpp"

namespace genesis::nn {

/// Ordered registry of parameters and non-trainable buffers (batch-norm
/// running statistics). Pointers handed out stay valid for its lifetime.
template <typename Real>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter<Real>& add(const std::string& name, Shape shape, typename Parameter<Real>::Role role);
  Tensor<Real>& add_buffer(const std::string& name, Shape shape, Real fill);

  Parameter<Real>* find(const std::string& name);
  const Parameter<Real>* find(const std::string& name) const;
  Tensor<Real>* find_buffer(const std::string& name);
  const Tensor<Real>* find_buffer(const std::string& name) const;

  const std::vector<std::unique_ptr<Parameter<Real>>>& parameters() const { return params_; }
  const std::vector<std::pair<std::string, std::unique_ptr<Tensor<Real>>>>& buffers() const { return buffers_; }
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter<Real>>> params_;
  std::map<std::string, std::size_t> param_index_;
  std::vector<std::pair<std::string, std::unique_ptr<Tensor<Real>>>> buffers_;
  std::map<std::string, std::size_t> buffer_index_;
};

/// A model: parameter registry plus a forward pass recorded on a tape.
/// EVAL mode freezes batch-norm statistics.
template <typename Real>
class Network {
 public:
  virtual ~Network() = default;
  Network() = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  virtual Var forward(Tape<Real>& tape, Var input) = 0;

  /// Parameters that are freshly initialized when transferring weights
  /// (task heads). Loading a checkpoint may leave these absent.
  virtual bool is_head_parameter(const std::string& /*name*/) const { return false; }

  ParameterStore<Real>& store() { return store_; }
  const ParameterStore<Real>& store() const { return store_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  /// Convenience forward without keeping the tape.
  Tensor<Real> predict(const Tensor<Real>& input);

 protected:
  ParameterStore<Real> store_;
  Mode mode_ = Mode::Train;
};

// ---------------------------------------------------------------------------
// Layers: thin handles that register parameters under a name prefix.
// ---------------------------------------------------------------------------

template <typename Real>
class Conv3dLayer {
 public:
  Conv3dLayer() = default;
  Conv3dLayer(ParameterStore<Real>& store, const std::string& prefix, std::size_t in_ch, std::size_t out_ch,
              Triple kernel, ConvGeometry geometry);
  Var operator()(Tape<Real>& t, Var x) const;

 private:
  Parameter<Real>* weight_ = nullptr;
  Parameter<Real>* bias_ = nullptr;
  ConvGeometry geometry_;
};

template <typename Real>
class ConvTranspose3dLayer {
 public:
  ConvTranspose3dLayer() = default;
  ConvTranspose3dLayer(ParameterStore<Real>& store, const std::string& prefix, std::size_t in_ch,
                       std::size_t out_ch, Triple kernel, ConvGeometry geometry);
  Var operator()(Tape<Real>& t, Var x) const;

 private:
  Parameter<Real>* weight_ = nullptr;
  Parameter<Real>* bias_ = nullptr;
  ConvGeometry geometry_;
};

template <typename Real>
class BatchNormLayer {
 public:
  BatchNormLayer() = default;
  BatchNormLayer(ParameterStore<Real>& store, const std::string& prefix, std::size_t channels);
  Var operator()(Tape<Real>& t, Var x, Mode mode) const;

 private:
  Parameter<Real>* gamma_ = nullptr;
  Parameter<Real>* beta_ = nullptr;
  BatchNormState<Real> state_;
};

template <typename Real>
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(ParameterStore<Real>& store, const std::string& prefix, std::size_t in_features,
             std::size_t out_features);
  Var operator()(Tape<Real>& t, Var x) const;

 private:
  Parameter<Real>* weight_ = nullptr;
  Parameter<Real>* bias_ = nullptr;
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

enum class InitKind { Uniform, Xavier, Msra };

struct InitScheme {
  InitKind kind = InitKind::Msra;
  std::uint64_t seed = 0;
};

const char* to_string(InitKind k);
InitKind parse_init_kind(const std::string& name);

/// Fan-in / fan-out of a weight tensor: dense [O,F] -> (F, O); convolution
/// [O,C,k...] -> (C*prod(k), O*prod(k)).
std::pair<double, double> fans(const Shape& weight_shape);

/// Half-width of the uniform distribution a scheme draws weights from.
double init_bound(InitKind kind, const Shape& weight_shape);

/// Weights: UNIFORM U(-0.05, 0.05), XAVIER U(+-sqrt(6/(fan_in+fan_out))),
/// MSRA U(+-sqrt(6/fan_in)). Biases and shifts zero, scales one. Each
/// parameter's stream is derived from (seed, name), so initializing a
/// subset reproduces the same values as initializing everything.
template <typename Real>
void init_parameter(Parameter<Real>& p, const InitScheme& scheme);

template <typename Real>
void init_weights(Network<Real>& net, const InitScheme& scheme);

/// Initializes only the parameters for which net.is_head_parameter() holds.
template <typename Real>
void init_head(Network<Real>& net, const InitScheme& scheme);

// ---------------------------------------------------------------------------
// Finite-difference verification
// ---------------------------------------------------------------------------

struct GradCheckOptions {
  double step = 1e-4;
  /// Fraction of trainable scalars sampled.
  double fraction = 0.01;
  /// Lower bound on the number of sampled scalars (capped by the total).
  std::size_t min_checks = 16;
  /// Relative errors use max(|analytic|, |numeric|, abs_floor) as denominator.
  double abs_floor = 1e-6;
  /// Replace samples whose perturbation changes a piecewise branch.
  bool skip_kinks = true;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Samples replaced because the perturbation crossed a kink.
  std::size_t skipped_kinks = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

using LossBuilder = std::function<Var(Tape<double>&, Var prediction)>;

/// Central differences on a random subset of trainable scalars, compared
/// against one reverse-mode pass. Batch-norm buffers are restored afterwards.
/// Samples straddling a ReLU/max-pool kink are replaced by fresh ones.
GradCheckReport grad_check(Network<double>& net, const Tensor<double>& input, const LossBuilder& loss,
                           const GradCheckOptions& options = {});

}  // namespace genesis::nn
