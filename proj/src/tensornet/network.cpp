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

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "genesis/network.hpp"

namespace genesis::nn {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterStore
// ---------------------------------------------------------------------------

template <typename Real>
Parameter<Real>& ParameterStore<Real>::add(const std::string& name, Shape shape,
                                           typename Parameter<Real>::Role role) {
  if (param_index_.count(name) || buffer_index_.count(name)) {
    throw Error("duplicate parameter name '" + name + "'");
  }
  auto p = std::make_unique<Parameter<Real>>();
  p->name = name;
  const Real fill = role == Parameter<Real>::Role::Scale ? Real(1) : Real(0);
  p->value = Tensor<Real>(shape, fill);
  p->grad = Tensor<Real>(std::move(shape));
  p->role = role;
  param_index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

template <typename Real>
Tensor<Real>& ParameterStore<Real>::add_buffer(const std::string& name, Shape shape, Real fill) {
  if (param_index_.count(name) || buffer_index_.count(name)) {
    throw Error("duplicate buffer name '" + name + "'");
  }
  buffer_index_[name] = buffers_.size();
  buffers_.emplace_back(name, std::make_unique<Tensor<Real>>(std::move(shape), fill));
  return *buffers_.back().second;
}

template <typename Real>
Parameter<Real>* ParameterStore<Real>::find(const std::string& name) {
  auto it = param_index_.find(name);
  return it == param_index_.end() ? nullptr : params_[it->second].get();
}

template <typename Real>
const Parameter<Real>* ParameterStore<Real>::find(const std::string& name) const {
  auto it = param_index_.find(name);
  return it == param_index_.end() ? nullptr : params_[it->second].get();
}

template <typename Real>
Tensor<Real>* ParameterStore<Real>::find_buffer(const std::string& name) {
  auto it = buffer_index_.find(name);
  return it == buffer_index_.end() ? nullptr : buffers_[it->second].second.get();
}

template <typename Real>
const Tensor<Real>* ParameterStore<Real>::find_buffer(const std::string& name) const {
  auto it = buffer_index_.find(name);
  return it == buffer_index_.end() ? nullptr : buffers_[it->second].second.get();
}

template <typename Real>
std::vector<std::string> ParameterStore<Real>::parameter_names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->name);
  return out;
}

template <typename Real>
std::size_t ParameterStore<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template <typename Real>
void ParameterStore<Real>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template <typename Real>
Tensor<Real> Network<Real>::predict(const Tensor<Real>& input) {
  Tape<Real> t;
  Var x = t.constant(input);
  return t.value(forward(t, x));
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename Real>
Conv3dLayer<Real>::Conv3dLayer(ParameterStore<Real>& store, const std::string& prefix, std::size_t in_ch,
                               std::size_t out_ch, Triple kernel, ConvGeometry geometry)
    : geometry_(geometry) {
  weight_ = &store.add(prefix + ".weight", {out_ch, in_ch, kernel[0], kernel[1], kernel[2]},
                       Parameter<Real>::Role::Weight);
  bias_ = &store.add(prefix + ".bias", {out_ch}, Parameter<Real>::Role::Bias);
}

template <typename Real>
Var Conv3dLayer<Real>::operator()(Tape<Real>& t, Var x) const {
  return conv3d(t, x, t.param(*weight_), t.param(*bias_), geometry_);
}

template <typename Real>
ConvTranspose3dLayer<Real>::ConvTranspose3dLayer(ParameterStore<Real>& store, const std::string& prefix,
                                                 std::size_t in_ch, std::size_t out_ch, Triple kernel,
                                                 ConvGeometry geometry)
    : geometry_(geometry) {
  weight_ = &store.add(prefix + ".weight", {in_ch, out_ch, kernel[0], kernel[1], kernel[2]},
                       Parameter<Real>::Role::Weight);
  bias_ = &store.add(prefix + ".bias", {out_ch}, Parameter<Real>::Role::Bias);
}

template <typename Real>
Var ConvTranspose3dLayer<Real>::operator()(Tape<Real>& t, Var x) const {
  return conv_transpose3d(t, x, t.param(*weight_), t.param(*bias_), geometry_);
}

template <typename Real>
BatchNormLayer<Real>::BatchNormLayer(ParameterStore<Real>& store, const std::string& prefix, std::size_t channels) {
  gamma_ = &store.add(prefix + ".gamma", {channels}, Parameter<Real>::Role::Scale);
  beta_ = &store.add(prefix + ".beta", {channels}, Parameter<Real>::Role::Shift);
  state_.running_mean = &store.add_buffer(prefix + ".running_mean", {channels}, Real(0));
  state_.running_var = &store.add_buffer(prefix + ".running_var", {channels}, Real(1));
}

template <typename Real>
Var BatchNormLayer<Real>::operator()(Tape<Real>& t, Var x, Mode mode) const {
  return batchnorm(t, x, t.param(*gamma_), t.param(*beta_), state_, mode);
}

template <typename Real>
DenseLayer<Real>::DenseLayer(ParameterStore<Real>& store, const std::string& prefix, std::size_t in_features,
                             std::size_t out_features) {
  weight_ = &store.add(prefix + ".weight", {out_features, in_features}, Parameter<Real>::Role::Weight);
  bias_ = &store.add(prefix + ".bias", {out_features}, Parameter<Real>::Role::Bias);
}

template <typename Real>
Var DenseLayer<Real>::operator()(Tape<Real>& t, Var x) const {
  return dense(t, x, t.param(*weight_), t.param(*bias_));
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::Uniform: return "uniform";
    case InitKind::Xavier: return "xavier";
    case InitKind::Msra: return "msra";
  }
  return "?";
}

InitKind parse_init_kind(const std::string& name) {
  if (name == "uniform") return InitKind::Uniform;
  if (name == "xavier") return InitKind::Xavier;
  if (name == "msra") return InitKind::Msra;
  throw ConfigError("unknown initializer '" + name + "' (expected uniform, xavier or msra)");
}

std::pair<double, double> fans(const Shape& s) {
  if (s.empty()) return {1.0, 1.0};
  if (s.size() == 1) return {double(s[0]), double(s[0])};
  double receptive = 1.0;
  for (std::size_t i = 2; i < s.size(); ++i) receptive *= double(s[i]);
  return {double(s[1]) * receptive, double(s[0]) * receptive};
}

double init_bound(InitKind kind, const Shape& shape) {
  const auto [fan_in, fan_out] = fans(shape);
  switch (kind) {
    case InitKind::Uniform: return 0.05;
    case InitKind::Xavier: return std::sqrt(6.0 / (fan_in + fan_out));
    case InitKind::Msra: return std::sqrt(6.0 / fan_in);
  }
  return 0.0;
}

template <typename Real>
void init_parameter(Parameter<Real>& p, const InitScheme& scheme) {
  using Role = typename Parameter<Real>::Role;
  switch (p.role) {
    case Role::Bias:
    case Role::Shift:
      std::fill(p.value.data.begin(), p.value.data.end(), Real(0));
      return;
    case Role::Scale:
      std::fill(p.value.data.begin(), p.value.data.end(), Real(1));
      return;
    case Role::Weight:
      break;
  }
  const double bound = init_bound(scheme.kind, p.value.shape);
  Rng rng(derive_seed(scheme.seed, fnv1a(p.name)));
  for (Real& v : p.value.data) v = static_cast<Real>((2.0 * uniform01(rng) - 1.0) * bound);
}

template <typename Real>
void init_weights(Network<Real>& net, const InitScheme& scheme) {
  for (const auto& p : net.store().parameters()) init_parameter(*p, scheme);
}

template <typename Real>
void init_head(Network<Real>& net, const InitScheme& scheme) {
  for (const auto& p : net.store().parameters())
    if (net.is_head_parameter(p->name)) init_parameter(*p, scheme);
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

GradCheckReport grad_check(Network<double>& net, const Tensor<double>& input, const LossBuilder& loss,
                           const GradCheckOptions& opt) {
  auto& store = net.store();
  std::vector<Tensor<double>> saved;
  for (const auto& [name, buf] : store.buffers()) saved.push_back(*buf);
  auto restore = [&] {
    for (std::size_t i = 0; i < saved.size(); ++i) *store.buffers()[i].second = saved[i];
  };
  auto evaluate = [&](std::uint64_t& signature) {
    restore();
    Tape<double> t;
    Var y = net.forward(t, t.constant(input));
    const double value = t.value(loss(t, y)).data[0];
    signature = t.branch_signature();
    return value;
  };

  store.zero_grad();
  std::uint64_t base_signature = 0;
  {
    Tape<double> t;
    Var y = net.forward(t, t.constant(input));
    t.backward(loss(t, y));
    base_signature = t.branch_signature();
  }

  std::vector<Parameter<double>*> trainable;
  std::vector<std::size_t> starts;
  std::size_t total = 0;
  for (const auto& p : store.parameters()) {
    if (!p->requires_grad) continue;
    trainable.push_back(p.get());
    starts.push_back(total);
    total += p->value.size();
  }

  GradCheckReport report;
  if (total == 0) {
    restore();
    return report;
  }
  std::size_t n_checks = static_cast<std::size_t>(std::ceil(opt.fraction * double(total)));
  n_checks = std::min(total, std::max(n_checks, opt.min_checks));

  // Candidates are visited in a seeded random order. A candidate whose
  // perturbation flips a ReLU or max-pool decision sits on a kink, where a
  // central difference does not estimate the derivative; it is replaced.
  Rng rng(derive_seed(opt.seed, 0x67636b));
  std::set<std::size_t> tried;
  while (report.checked < n_checks && tried.size() < total) {
    std::size_t flat = 0;
    if (n_checks == total) {
      flat = tried.size();
    } else {
      do {
        flat = static_cast<std::size_t>(uniform_int(rng, 0, std::int64_t(total) - 1));
      } while (tried.count(flat));
    }
    tried.insert(flat);
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), flat) - starts.begin()) - 1;
    Parameter<double>& p = *trainable[k];
    const std::size_t idx = flat - starts[k];
    const double orig = p.value.data[idx];
    std::uint64_t sig_plus = 0, sig_minus = 0;
    p.value.data[idx] = orig + opt.step;
    const double fp = evaluate(sig_plus);
    p.value.data[idx] = orig - opt.step;
    const double fm = evaluate(sig_minus);
    p.value.data[idx] = orig;
    if (opt.skip_kinks && (sig_plus != base_signature || sig_minus != base_signature)) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * opt.step);
    const double analytic = p.grad.data[idx];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.abs_floor});
    double rel = std::abs(analytic - numeric) / denom;
    if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
    ++report.checked;
    if (report.checked == 1 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_parameter = p.name;
      report.worst_index = idx;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  restore();
  return report;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Network<float>;
template class Network<double>;
template class Conv3dLayer<float>;
template class Conv3dLayer<double>;
template class ConvTranspose3dLayer<float>;
template class ConvTranspose3dLayer<double>;
template class BatchNormLayer<float>;
template class BatchNormLayer<double>;
template class DenseLayer<float>;
template class DenseLayer<double>;
template void init_parameter<float>(Parameter<float>&, const InitScheme&);
template void init_parameter<double>(Parameter<double>&, const InitScheme&);
template void init_weights<float>(Network<float>&, const InitScheme&);
template void init_weights<double>(Network<double>&, const InitScheme&);
template void init_head<float>(Network<float>&, const InitScheme&);
template void init_head<double>(Network<double>&, const InitScheme&);

}  // namespace genesis::nn
