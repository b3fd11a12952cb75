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

#include <sstream>

#include "genesis/tensor.hpp"

namespace genesis::nn {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Real>
Tensor<Real>::Tensor(Shape s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != numel(shape)) {
    throw ShapeError("tensor payload of " + std::to_string(data.size()) + " values does not match shape " +
                     shape_str(shape));
  }
}

template <typename Real>
Var Tape<Real>::constant(Tensor<Real> value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
  return Var{nodes_.size() - 1};
}

template <typename Real>
Var Tape<Real>::leaf(Tensor<Real> value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, true});
  return Var{nodes_.size() - 1};
}

template <typename Real>
Var Tape<Real>::param(Parameter<Real>& p) {
  nodes_.push_back(Node{p.value, {}, {}, {}, &p, p.requires_grad});
  return Var{nodes_.size() - 1};
}

template <typename Real>
Var Tape<Real>::record(Tensor<Real> value, std::initializer_list<Var> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (Var p : parents) {
    if (p.id == Var::kNone) continue;
    if (p.id >= nodes_.size()) throw Error("tape: parent refers to a node not yet recorded");
    n.parents.push_back(p.id);
    n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename Real>
Tensor<Real>& Tape<Real>::grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.shape != n.value.shape) n.grad = Tensor<Real>(n.value.shape);
  return n.grad;
}

template <typename Real>
void Tape<Real>::backward(Var loss) {
  Node& root = nodes_.at(loss.id);
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(root.value.shape));
  }
  for (Node& n : nodes_) n.grad = Tensor<Real>();
  if (!root.needs_grad) return;
  grad(loss.id).data[0] = Real(1);

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      Parameter<Real>& p = *n.param;
      if (p.grad.shape != p.value.shape) p.zero_grad();
      for (std::size_t k = 0; k < p.grad.size(); ++k) p.grad.data[k] += nodes_[i].grad.data[k];
    }
  }
}

template struct Tensor<float>;
template struct Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace genesis::nn
