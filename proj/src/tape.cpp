// Copyright 2026 The assoc3d Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "assoc3d/tape.hpp"

#include <stdexcept>

namespace assoc3d::ad {

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("value() on an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(*this); }

void Tape::check_owner(const Var& v) const {
  if (v.tape_ != this) throw std::logic_error("Var belongs to a different tape");
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    check_owner(in);
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(const Var& v) const {
  check_owner(v);
  const Node& node = nodes_[v.id_];
  if (node.has_grad) return node.grad;
  return Tensor(node.value.shape(), 0.0);
}

void Tape::backward(const Var& root) {
  check_owner(root);
  Node& top = nodes_[root.id_];
  if (top.value.numel() != 1) throw ShapeError("backward() needs a scalar root");
  top.grad = Tensor(top.value.shape(), 1.0);
  top.has_grad = true;

  std::vector<const Tensor*> inputs;
  std::vector<Tensor*> input_grads;
  for (std::size_t id = root.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward) continue;
    inputs.clear();
    input_grads.clear();
    for (std::size_t in : node.inputs) {
      Node& src = nodes_[in];
      inputs.push_back(&src.value);
      if (src.requires_grad) {
        if (!src.has_grad) {
          src.grad = Tensor(src.value.shape(), 0.0);
          src.has_grad = true;
        }
        input_grads.push_back(&src.grad);
      } else {
        input_grads.push_back(nullptr);
      }
    }
    node.backward(BackwardContext{node.grad, node.value, inputs, input_grads});
  }
}

}  // namespace assoc3d::ad
