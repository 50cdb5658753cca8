// Copyright 2026 The STCCL Authors.
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

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "stccl/tensor.hpp"

namespace stccl {

// Reverse-mode tape node. Ops whose inputs are all constants produce
// constants: no parents, no closure, so forward-only evaluation carries no
// graph. Graphs are per-call-tree, never shared across threads.
class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Tensor& g);
  void accumulate_at(std::int64_t flat, double g);
  Tensor& ensure_grad();
};

using NodePtr = std::shared_ptr<Node>;

// Cheap value-semantics handle onto a node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var scalar(double value) { return constant(Tensor::scalar(value)); }
  static Var leaf(Tensor value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad() { return node_->ensure_grad(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Var detach() const { return constant(node_->value); }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Runs reverse accumulation from a scalar root (seeds d(root)/d(root) = 1).
void backward(const Var& root);
void zero_grad(std::vector<Var>& params);

namespace ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);  // (m,k) x (k,n)
// 2-D convolution over a single (Cin,H,W) image. `bias` may be undefined.
Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad);
Var gather(const Var& a, std::vector<std::int64_t> flat_indices);
Var concat(const std::vector<Var>& parts);  // flattens to 1-D
Var reshape(const Var& a, std::vector<int> shape);
// y = a / max(||a||, eps). Sets *degenerate when ||a|| < eps.
Var l2_normalize(const Var& a, double eps = 1e-12, bool* degenerate = nullptr);
Var logsumexp(const Var& a);
// logsumexp(a) - a[0], fused so the value stays strictly positive whenever
// any off-max term carries representable weight.
Var logsumexp_minus_first(const Var& a);
Var upsample2_nearest(const Var& x);               // (C,H,W) -> (C,2H,2W)
Var add_channel_bias(const Var& x, const Var& v);  // (C,H,W) + (C)
Var sum_list(const std::vector<Var>& scalars);
// mean over mask>0 entries of (a-b)^2; mask is a constant weight map.
Var masked_mse(const Var& a, const Var& b, const Tensor& mask);
Var block_means(const Var& x, int block);  // (C,H,W) -> (C,H/b,W/b)

}  // namespace ops

// Plain Adam over leaf parameters.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Var>& params);

  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace stccl
