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

#include "stccl/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "stccl/errors.hpp"

namespace stccl {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void Node::accumulate(const Tensor& g) {
  Tensor& dst = ensure_grad();
  const double* src = g.data();
  double* out = dst.data();
  const std::int64_t n = dst.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] += src[i];
}

void Node::accumulate_at(std::int64_t flat, double g) { ensure_grad()[flat] += g; }

Tensor& Node::ensure_grad() {
  if (grad.numel() != value.numel()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = false;
  return Var(std::move(n));
}

Var Var::leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

namespace {

NodePtr make_op(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  n->requires_grad = rg;
  if (rg) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw ArgumentError(std::string(op) + ": shape mismatch " + a.value().shape_string() + " vs " +
                        b.value().shape_string());
  }
}

}  // namespace

void backward(const Var& root) {
  if (!root.defined()) throw ArgumentError("backward on undefined Var");
  if (root.value().numel() != 1) throw ArgumentError("backward root must be scalar");
  if (!root.requires_grad()) return;

  // Iterative post-order topological sort.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, child] = stack.back();
    if (child < node->parents.size()) {
      Node* next = node->parents[child].get();
      ++child;
      if (next->requires_grad && !visited.count(next)) {
        visited.insert(next);
        stack.emplace_back(next, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.numel() == node->value.numel()) {
      node->backward_fn(*node);
    }
  }
}

void zero_grad(std::vector<Var>& params) {
  for (auto& p : params) {
    if (p.defined()) p.grad().fill(0.0);
  }
}

namespace ops {

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  const double* bd = b.value().data();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += bd[i];
  return Var(make_op(std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      if (self.parents[k]->requires_grad) self.parents[k]->accumulate(self.grad);
    }
  }));
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  const double* bd = b.value().data();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= bd[i];
  return Var(make_op(std::move(out), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
    }
  }));
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.value();
  const double* bd = b.value().data();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= bd[i];
  return Var(make_op(std::move(out), {a.node(), b.node()}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * av[i];
    }
  }));
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
  return Var(make_op(std::move(out), {a.node()}, [s](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor& g = self.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s * self.grad[i];
  }));
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += s;
  return Var(make_op(std::move(out), {a.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
  }));
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::max(out[i], 0.0);
  return Var(make_op(std::move(out), {a.node()}, [](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    const Tensor& x = self.parents[0]->value;
    Tensor& g = self.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      if (x[i] > 0.0) g[i] += self.grad[i];
    }
  }));
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    const double x = out[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return Var(make_op(std::move(out), {a.node()}, [](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor& g = self.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      const double y = self.value[i];
      g[i] += self.grad[i] * y * (1.0 - y);
    }
  }));
}

Var sum(const Var& a) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a.value().numel(); ++i) s += a.value()[i];
  return Var(make_op(Tensor::scalar(s), {a.node()}, [](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    const double g = self.grad[0];
    Tensor& pg = self.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < pg.numel(); ++i) pg[i] += g;
  }));
}

Var mean(const Var& a) {
  const std::int64_t n = a.value().numel();
  if (n == 0) throw ArgumentError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var dot(const Var& a, const Var& b) {
  check_same_shape(a, b, "dot");
  double s = 0.0;
  const double* ad = a.value().data();
  const double* bd = b.value().data();
  for (std::int64_t i = 0; i < a.value().numel(); ++i) s += ad[i] * bd[i];
  return Var(make_op(Tensor::scalar(s), {a.node(), b.node()}, [](Node& self) {
    const double g = self.grad[0];
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor& pg = self.parents[0]->ensure_grad();
      for (std::int64_t i = 0; i < pg.numel(); ++i) pg[i] += g * bv[i];
    }
    if (self.parents[1]->requires_grad) {
      Tensor& pg = self.parents[1]->ensure_grad();
      for (std::int64_t i = 0; i < pg.numel(); ++i) pg[i] += g * av[i];
    }
  }));
}

Var matmul(const Var& a, const Var& b) {
  if (a.value().ndim() != 2 || b.value().ndim() != 2 || a.value().dim(1) != b.value().dim(0)) {
    throw ArgumentError("matmul: incompatible shapes " + a.value().shape_string() + " x " +
                        b.value().shape_string());
  }
  const int m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  Tensor out({m, n});
  {
    ConstMatMap am(a.value().data(), m, k);
    ConstMatMap bm(b.value().data(), k, n);
    MatMap om(out.data(), m, n);
    om.noalias() = am * bm;
  }
  return Var(make_op(std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    ConstMatMap g(self.grad.data(), m, n);
    ConstMatMap am(self.parents[0]->value.data(), m, k);
    ConstMatMap bm(self.parents[1]->value.data(), k, n);
    if (self.parents[0]->requires_grad) {
      MatMap ga(self.parents[0]->ensure_grad().data(), m, k);
      ga.noalias() += g * bm.transpose();
    }
    if (self.parents[1]->requires_grad) {
      MatMap gb(self.parents[1]->ensure_grad().data(), k, n);
      gb.noalias() += am.transpose() * g;
    }
  }));
}

namespace {

void im2col(const Tensor& x, int kh, int kw, int stride, int pad, int hout, int wout,
            std::vector<double>& col) {
  const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int patch = kh * kw;
  const std::int64_t cols = static_cast<std::int64_t>(hout) * wout;
  col.assign(static_cast<std::size_t>(cin) * patch * cols, 0.0);
  for (int c = 0; c < cin; ++c) {
    const double* plane = x.data() + static_cast<std::int64_t>(c) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        double* row = col.data() + (static_cast<std::int64_t>(c) * patch + ki * kw + kj) * cols;
        for (int ho = 0; ho < hout; ++ho) {
          const int r = ho * stride - pad + ki;
          if (r < 0 || r >= h) continue;
          const double* src = plane + static_cast<std::int64_t>(r) * w;
          double* dst = row + static_cast<std::int64_t>(ho) * wout;
          for (int wo = 0; wo < wout; ++wo) {
            const int cidx = wo * stride - pad + kj;
            if (cidx >= 0 && cidx < w) dst[wo] = src[cidx];
          }
        }
      }
    }
  }
}

void col2im_accumulate(const std::vector<double>& col, int cin, int h, int w, int kh, int kw,
                       int stride, int pad, int hout, int wout, Tensor& dx) {
  const int patch = kh * kw;
  const std::int64_t cols = static_cast<std::int64_t>(hout) * wout;
  for (int c = 0; c < cin; ++c) {
    double* plane = dx.data() + static_cast<std::int64_t>(c) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const double* row =
            col.data() + (static_cast<std::int64_t>(c) * patch + ki * kw + kj) * cols;
        for (int ho = 0; ho < hout; ++ho) {
          const int r = ho * stride - pad + ki;
          if (r < 0 || r >= h) continue;
          double* dst = plane + static_cast<std::int64_t>(r) * w;
          const double* src = row + static_cast<std::int64_t>(ho) * wout;
          for (int wo = 0; wo < wout; ++wo) {
            const int cidx = wo * stride - pad + kj;
            if (cidx >= 0 && cidx < w) dst[cidx] += src[wo];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.ndim() != 3 || wv.ndim() != 4) throw ArgumentError("conv2d: expects (C,H,W), (O,C,kh,kw)");
  if (wv.dim(1) != xv.dim(0)) throw ArgumentError("conv2d: channel mismatch");
  if (stride < 1) throw ArgumentError("conv2d: stride must be >= 1");
  const int cin = xv.dim(0), h = xv.dim(1), wdim = xv.dim(2);
  const int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  const int hout = (h + 2 * pad - kh) / stride + 1;
  const int wout = (wdim + 2 * pad - kw) / stride + 1;
  if (hout < 1 || wout < 1) throw ArgumentError("conv2d: output would be empty");
  const int kdim = cin * kh * kw;
  const std::int64_t cols = static_cast<std::int64_t>(hout) * wout;

  std::vector<double> col;
  im2col(xv, kh, kw, stride, pad, hout, wout, col);
  Tensor out({cout, hout, wout});
  {
    ConstMatMap wm(wv.data(), cout, kdim);
    ConstMatMap cm(col.data(), kdim, cols);
    MatMap om(out.data(), cout, cols);
    om.noalias() = wm * cm;
  }
  if (bias.defined()) {
    const double* bd = bias.value().data();
    for (int c = 0; c < cout; ++c) {
      double* plane = out.data() + static_cast<std::int64_t>(c) * cols;
      for (std::int64_t i = 0; i < cols; ++i) plane[i] += bd[c];
    }
  }

  std::vector<NodePtr> parents{x.node(), w.node()};
  if (bias.defined()) parents.push_back(bias.node());
  const bool has_bias = bias.defined();
  return Var(make_op(
      std::move(out), std::move(parents),
      [cin, h, wdim, cout, kh, kw, stride, pad, hout, wout, kdim, cols, has_bias](Node& self) {
        ConstMatMap g(self.grad.data(), cout, cols);
        if (self.parents[1]->requires_grad || self.parents[0]->requires_grad) {
          // im2col recomputed; cheaper than caching it across large batches.
          std::vector<double> col;
          im2col(self.parents[0]->value, kh, kw, stride, pad, hout, wout, col);
          if (self.parents[1]->requires_grad) {
            MatMap gw(self.parents[1]->ensure_grad().data(), cout, kdim);
            ConstMatMap cm(col.data(), kdim, cols);
            gw.noalias() += g * cm.transpose();
          }
          if (self.parents[0]->requires_grad) {
            std::vector<double> dcol(static_cast<std::size_t>(kdim) * cols);
            MatMap dcm(dcol.data(), kdim, cols);
            ConstMatMap wm(self.parents[1]->value.data(), cout, kdim);
            dcm.noalias() = wm.transpose() * g;
            col2im_accumulate(dcol, cin, h, wdim, kh, kw, stride, pad, hout, wout,
                              self.parents[0]->ensure_grad());
          }
        }
        if (has_bias && self.parents[2]->requires_grad) {
          Tensor& gb = self.parents[2]->ensure_grad();
          for (int c = 0; c < cout; ++c) {
            double s = 0.0;
            const double* plane = self.grad.data() + static_cast<std::int64_t>(c) * cols;
            for (std::int64_t i = 0; i < cols; ++i) s += plane[i];
            gb[c] += s;
          }
        }
      }));
}

Var gather(const Var& a, std::vector<std::int64_t> flat_indices) {
  Tensor out({static_cast<int>(flat_indices.size())});
  const Tensor& av = a.value();
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    const std::int64_t idx = flat_indices[i];
    if (idx < 0 || idx >= av.numel()) throw IndexError("gather index out of range");
    out[static_cast<std::int64_t>(i)] = av[idx];
  }
  return Var(
      make_op(std::move(out), {a.node()}, [idx = std::move(flat_indices)](Node& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i) {
          g[idx[i]] += self.grad[static_cast<std::int64_t>(i)];
        }
      }));
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat of zero parts");
  std::int64_t total = 0;
  for (const auto& p : parts) total += p.value().numel();
  Tensor out({static_cast<int>(total)});
  std::int64_t offset = 0;
  std::vector<NodePtr> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data(), v.data() + v.numel(), out.data() + offset);
    offset += v.numel();
    parents.push_back(p.node());
  }
  return Var(make_op(std::move(out), std::move(parents), [](Node& self) {
    std::int64_t offset = 0;
    for (auto& p : self.parents) {
      const std::int64_t n = p->value.numel();
      if (p->requires_grad) {
        Tensor& g = p->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  }));
}

Var reshape(const Var& a, std::vector<int> shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return Var(make_op(std::move(out), {a.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
  }));
}

Var l2_normalize(const Var& a, double eps, bool* degenerate) {
  const Tensor& av = a.value();
  double sq = 0.0;
  for (std::int64_t i = 0; i < av.numel(); ++i) sq += av[i] * av[i];
  const double nrm = std::sqrt(sq);
  const bool degen = nrm < eps;
  if (degenerate) *degenerate = degen;
  const double denom = degen ? eps : nrm;
  Tensor out = av;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] /= denom;
  return Var(make_op(std::move(out), {a.node()}, [nrm, denom, degen](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor& g = self.parents[0]->ensure_grad();
    if (degen) {
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] / denom;
      return;
    }
    double ydotg = 0.0;
    for (std::int64_t i = 0; i < self.value.numel(); ++i) ydotg += self.value[i] * self.grad[i];
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      g[i] += (self.grad[i] - self.value[i] * ydotg) / nrm;
    }
  }));
}

Var logsumexp(const Var& a) {
  const Tensor& av = a.value();
  if (av.numel() == 0) throw ArgumentError("logsumexp of empty tensor");
  std::int64_t max_idx = 0;
  for (std::int64_t i = 1; i < av.numel(); ++i) {
    if (av[i] > av[max_idx]) max_idx = i;
  }
  const double m = av[max_idx];
  if (!std::isfinite(m)) throw NumericError("logsumexp: non-finite logits");
  // log1p of the off-max mass keeps lse - max strictly positive whenever
  // any other term carries representable weight.
  double rest = 0.0;
  for (std::int64_t i = 0; i < av.numel(); ++i) {
    if (i != max_idx) rest += std::exp(av[i] - m);
  }
  const double lse = m + std::log1p(rest);
  const double total = 1.0 + rest;
  return Var(make_op(Tensor::scalar(lse), {a.node()}, [m, total](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    const double g = self.grad[0];
    const Tensor& x = self.parents[0]->value;
    Tensor& pg = self.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < pg.numel(); ++i) {
      pg[i] += g * std::exp(x[i] - m) / total;
    }
  }));
}

Var logsumexp_minus_first(const Var& a) {
  const Tensor& av = a.value();
  if (av.numel() < 2) throw ArgumentError("logsumexp_minus_first needs at least 2 logits");
  std::int64_t max_idx = 0;
  for (std::int64_t i = 1; i < av.numel(); ++i) {
    if (av[i] > av[max_idx]) max_idx = i;
  }
  const double m = av[max_idx];
  if (!std::isfinite(m)) throw NumericError("logsumexp_minus_first: non-finite logits");
  double rest = 0.0;
  for (std::int64_t i = 0; i < av.numel(); ++i) {
    if (i != max_idx) rest += std::exp(av[i] - m);
  }
  const double value = (m - av[0]) + std::log1p(rest);
  const double total = 1.0 + rest;
  return Var(make_op(Tensor::scalar(value), {a.node()}, [m, total](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    const double g = self.grad[0];
    const Tensor& x = self.parents[0]->value;
    Tensor& pg = self.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < pg.numel(); ++i) {
      double d = std::exp(x[i] - m) / total;
      if (i == 0) d -= 1.0;
      pg[i] += g * d;
    }
  }));
}

Var upsample2_nearest(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 3) throw ArgumentError("upsample2_nearest expects (C,H,W)");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (int ci = 0; ci < c; ++ci) {
    for (int r = 0; r < 2 * h; ++r) {
      const double* src = xv.data() + (static_cast<std::int64_t>(ci) * h + r / 2) * w;
      double* dst = out.data() + (static_cast<std::int64_t>(ci) * 2 * h + r) * 2 * w;
      for (int cc = 0; cc < 2 * w; ++cc) dst[cc] = src[cc / 2];
    }
  }
  return Var(make_op(std::move(out), {x.node()}, [c, h, w](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      for (int r = 0; r < 2 * h; ++r) {
        const double* src = self.grad.data() + (static_cast<std::int64_t>(ci) * 2 * h + r) * 2 * w;
        double* dst = g.data() + (static_cast<std::int64_t>(ci) * h + r / 2) * w;
        for (int cc = 0; cc < 2 * w; ++cc) dst[cc / 2] += src[cc];
      }
    }
  }));
}

Var add_channel_bias(const Var& x, const Var& v) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 3 || v.value().ndim() != 1 || v.value().dim(0) != xv.dim(0)) {
    throw ArgumentError("add_channel_bias: expects (C,H,W) + (C)");
  }
  const int c = xv.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
  Tensor out = xv;
  for (int ci = 0; ci < c; ++ci) {
    double* dst = out.data() + ci * plane;
    const double b = v.value()[ci];
    for (std::int64_t i = 0; i < plane; ++i) dst[i] += b;
  }
  return Var(make_op(std::move(out), {x.node(), v.node()}, [c, plane](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->ensure_grad();
      for (int ci = 0; ci < c; ++ci) {
        double s = 0.0;
        const double* src = self.grad.data() + ci * plane;
        for (std::int64_t i = 0; i < plane; ++i) s += src[i];
        g[ci] += s;
      }
    }
  }));
}

Var sum_list(const std::vector<Var>& scalars) {
  if (scalars.empty()) return Var::scalar(0.0);
  double s = 0.0;
  std::vector<NodePtr> parents;
  parents.reserve(scalars.size());
  for (const auto& v : scalars) {
    if (v.value().numel() != 1) throw ArgumentError("sum_list expects scalars");
    s += v.value()[0];
    parents.push_back(v.node());
  }
  return Var(make_op(Tensor::scalar(s), std::move(parents), [](Node& self) {
    const double g = self.grad[0];
    for (auto& p : self.parents) {
      if (p->requires_grad) p->ensure_grad()[0] += g;
    }
  }));
}

Var masked_mse(const Var& a, const Var& b, const Tensor& mask) {
  check_same_shape(a, b, "masked_mse");
  if (!a.value().same_shape(mask)) throw ArgumentError("masked_mse: mask shape mismatch");
  double wsum = 0.0;
  double loss = 0.0;
  for (std::int64_t i = 0; i < mask.numel(); ++i) {
    const double w = mask[i];
    if (w <= 0.0) continue;
    const double d = a.value()[i] - b.value()[i];
    loss += w * d * d;
    wsum += w;
  }
  if (wsum <= 0.0) throw ArgumentError("masked_mse: empty mask");
  loss /= wsum;
  return Var(make_op(Tensor::scalar(loss), {a.node(), b.node()}, [mask, wsum](Node& self) {
    const double g = self.grad[0];
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    for (int k = 0; k < 2; ++k) {
      if (!self.parents[k]->requires_grad) continue;
      Tensor& pg = self.parents[k]->ensure_grad();
      const double sign = k == 0 ? 1.0 : -1.0;
      for (std::int64_t i = 0; i < pg.numel(); ++i) {
        const double w = mask[i];
        if (w <= 0.0) continue;
        pg[i] += sign * g * 2.0 * w * (av[i] - bv[i]) / wsum;
      }
    }
  }));
}

Var block_means(const Var& x, int block) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 3) throw ArgumentError("block_means expects (C,H,W)");
  if (block < 1 || xv.dim(1) % block != 0 || xv.dim(2) % block != 0) {
    throw ArgumentError("block_means: block must divide spatial dims");
  }
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int hb = h / block, wb = w / block;
  const double inv = 1.0 / (static_cast<double>(block) * block);
  Tensor out({c, hb, wb}, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    for (int r = 0; r < h; ++r) {
      const double* src = xv.data() + (static_cast<std::int64_t>(ci) * h + r) * w;
      double* dst = out.data() + (static_cast<std::int64_t>(ci) * hb + r / block) * wb;
      for (int cc = 0; cc < w; ++cc) dst[cc / block] += src[cc] * inv;
    }
  }
  return Var(make_op(std::move(out), {x.node()}, [c, h, w, hb, wb, block, inv](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor& g = self.parents[0]->ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      for (int r = 0; r < h; ++r) {
        double* dst = g.data() + (static_cast<std::int64_t>(ci) * h + r) * w;
        const double* src = self.grad.data() + (static_cast<std::int64_t>(ci) * hb + r / block) * wb;
        for (int cc = 0; cc < w; ++cc) dst[cc] += src[cc / block] * inv;
      }
    }
  }));
}

}  // namespace ops

void Adam::step(std::vector<Var>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = Tensor(params[i].value().shape(), 0.0);
      v_[i] = Tensor(params[i].value().shape(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var& p = params[i];
    if (!p.requires_grad()) continue;
    Tensor& g = p.grad();
    Tensor& value = p.node()->value;
    for (std::int64_t j = 0; j < value.numel(); ++j) {
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace stccl
