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
#include <string>
#include <vector>

#include "stccl/correlation.hpp"

namespace stccl {

// Counts real feature extractions; used to prove that gated supervision
// calls never touch the backbone.
struct EvalCounter {
  std::uint64_t backbone_evals = 0;
};

// Four-stage convolutional extractor. Stands in for a pretrained face
// network behind the same pyramid contract; any extractor honoring the
// shape contract can replace it.
struct BackboneSpec {
  std::vector<int> stage_channels{16, 32, 64, 128};
  int stage_stride = 2;
  int kernel = 3;
  int in_channels = 3;
  int input_h = 64;
  int input_w = 64;
  bool trainable = true;

  int stage_count() const { return static_cast<int>(stage_channels.size()); }
  int cumulative_stride() const;
  void validate() const;
  // Level dims for an accepted input size.
  std::vector<std::pair<int, int>> level_dims(int h, int w) const;
};

struct BackboneParameters {
  BackboneSpec spec;
  std::vector<Tensor> weights;  // stage s: (C_s, C_{s-1}, k, k)
  std::vector<Tensor> biases;   // stage s: (C_s)

  std::int64_t parameter_count() const;
  void validate() const;
};

// Deterministic uniform fan-in init, zero biases.
BackboneParameters init_backbone(const BackboneSpec& spec, std::uint64_t seed);

// Var materialization of the parameters: leaves when training the
// backbone, constants when it only supervises.
struct BackboneVars {
  BackboneSpec spec;
  std::vector<Var> weights, biases;

  static BackboneVars from(const BackboneParameters& params, bool trainable);
  std::vector<Var> all() const;
  BackboneParameters snapshot() const;
};

// Differentiable w.r.t. both the image and the parameters.
FeaturePyramid extract_pyramid(const BackboneVars& backbone, const Var& image,
                               EvalCounter* probe = nullptr);

// Plain batch interface over tensors (forward only).
std::vector<FeaturePyramid> extract_pyramid(const BackboneParameters& params,
                                            const std::vector<Tensor>& images,
                                            EvalCounter* probe = nullptr);

}  // namespace stccl
