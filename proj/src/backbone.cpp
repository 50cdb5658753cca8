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

#include "stccl/backbone.hpp"

#include <cmath>

#include "stccl/errors.hpp"
#include "stccl/rng.hpp"

namespace stccl {

int BackboneSpec::cumulative_stride() const {
  int s = 1;
  for (int i = 0; i < stage_count(); ++i) s *= stage_stride;
  return s;
}

void BackboneSpec::validate() const {
  if (stage_count() != 4) throw ArgumentError("backbone spec must have 4 stages");
  for (int c : stage_channels) {
    if (c < 1) throw ArgumentError("stage channels must be >= 1");
  }
  if (stage_stride < 1) throw ArgumentError("stage stride must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ArgumentError("kernel must be odd and >= 1");
  if (in_channels < 1) throw ArgumentError("input channels must be >= 1");
  if (input_h < 2 || input_w < 2) throw ArgumentError("input size must be >= 2x2");
  if (input_h % cumulative_stride() != 0 || input_w % cumulative_stride() != 0) {
    throw ArgumentError("input dims must divide by the cumulative stride");
  }
}

std::vector<std::pair<int, int>> BackboneSpec::level_dims(int h, int w) const {
  if (h < 2 || w < 2 || h % cumulative_stride() != 0 || w % cumulative_stride() != 0) {
    throw ArgumentError("image dims must divide by the cumulative stride");
  }
  std::vector<std::pair<int, int>> dims;
  int ch = h, cw = w;
  for (int s = 0; s < stage_count(); ++s) {
    // kernel k, pad k/2, so the spatial map shrinks exactly by the stride.
    ch = (ch - 1) / stage_stride + 1;
    cw = (cw - 1) / stage_stride + 1;
    if (ch < 2 || cw < 2) throw ArgumentError("level dims fall below the 2x2 feature-map minimum");
    dims.emplace_back(ch, cw);
  }
  return dims;
}

std::int64_t BackboneParameters::parameter_count() const {
  std::int64_t n = 0;
  for (const Tensor& w : weights) n += w.numel();
  for (const Tensor& b : biases) n += b.numel();
  return n;
}

void BackboneParameters::validate() const {
  spec.validate();
  if (static_cast<int>(weights.size()) != spec.stage_count() ||
      static_cast<int>(biases.size()) != spec.stage_count()) {
    throw ArgumentError("backbone parameter stage count mismatch");
  }
  int cin = spec.in_channels;
  for (int s = 0; s < spec.stage_count(); ++s) {
    const Tensor& w = weights[static_cast<std::size_t>(s)];
    const int cout = spec.stage_channels[static_cast<std::size_t>(s)];
    if (w.ndim() != 4 || w.dim(0) != cout || w.dim(1) != cin || w.dim(2) != spec.kernel ||
        w.dim(3) != spec.kernel) {
      throw ArgumentError("backbone weight shape mismatch at stage " + std::to_string(s));
    }
    if (!w.all_finite()) throw ArgumentError("non-finite backbone weights");
    const Tensor& b = biases[static_cast<std::size_t>(s)];
    if (b.ndim() != 1 || b.dim(0) != cout) {
      throw ArgumentError("backbone bias shape mismatch at stage " + std::to_string(s));
    }
    if (!b.all_finite()) throw ArgumentError("non-finite backbone biases");
    cin = cout;
  }
}

BackboneParameters init_backbone(const BackboneSpec& spec, std::uint64_t seed) {
  spec.validate();
  BackboneParameters params;
  params.spec = spec;
  Rng rng(seed);
  int cin = spec.in_channels;
  for (int s = 0; s < spec.stage_count(); ++s) {
    const int cout = spec.stage_channels[static_cast<std::size_t>(s)];
    Tensor w({cout, cin, spec.kernel, spec.kernel});
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin) * spec.kernel * spec.kernel);
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
    params.weights.push_back(std::move(w));
    params.biases.emplace_back(Tensor({cout}, 0.0));
    cin = cout;
  }
  return params;
}

BackboneVars BackboneVars::from(const BackboneParameters& params, bool trainable) {
  params.validate();
  BackboneVars vars;
  vars.spec = params.spec;
  for (std::size_t s = 0; s < params.weights.size(); ++s) {
    vars.weights.push_back(trainable ? Var::leaf(params.weights[s])
                                     : Var::constant(params.weights[s]));
    vars.biases.push_back(trainable ? Var::leaf(params.biases[s])
                                    : Var::constant(params.biases[s]));
  }
  return vars;
}

std::vector<Var> BackboneVars::all() const {
  std::vector<Var> out;
  for (const Var& w : weights) out.push_back(w);
  for (const Var& b : biases) out.push_back(b);
  return out;
}

BackboneParameters BackboneVars::snapshot() const {
  BackboneParameters params;
  params.spec = spec;
  for (const Var& w : weights) params.weights.push_back(w.value());
  for (const Var& b : biases) params.biases.push_back(b.value());
  return params;
}

FeaturePyramid extract_pyramid(const BackboneVars& backbone, const Var& image,
                               EvalCounter* probe) {
  const Tensor& img = image.value();
  if (img.ndim() != 3 || img.dim(0) != backbone.spec.in_channels) {
    throw ArgumentError("extract_pyramid: image must be (" +
                        std::to_string(backbone.spec.in_channels) + ",H,W)");
  }
  if (!img.all_finite()) throw ArgumentError("extract_pyramid: non-finite input");
  backbone.spec.level_dims(img.dim(1), img.dim(2));  // shape contract check
  if (probe) ++probe->backbone_evals;

  FeaturePyramid pyramid;
  pyramid.source_h = img.dim(1);
  pyramid.source_w = img.dim(2);
  Var x = image;
  const int pad = backbone.spec.kernel / 2;
  for (int s = 0; s < backbone.spec.stage_count(); ++s) {
    x = ops::relu(ops::conv2d(x, backbone.weights[static_cast<std::size_t>(s)],
                              backbone.biases[static_cast<std::size_t>(s)],
                              backbone.spec.stage_stride, pad));
    FeatureMap map;
    map.data = x;
    map.level = s + 1;
    pyramid.levels.push_back(std::move(map));
  }
  return pyramid;
}

std::vector<FeaturePyramid> extract_pyramid(const BackboneParameters& params,
                                            const std::vector<Tensor>& images,
                                            EvalCounter* probe) {
  BackboneVars vars = BackboneVars::from(params, /*trainable=*/false);
  std::vector<FeaturePyramid> out;
  out.reserve(images.size());
  for (const Tensor& img : images) {
    out.push_back(extract_pyramid(vars, Var::constant(img), probe));
  }
  return out;
}

}  // namespace stccl
