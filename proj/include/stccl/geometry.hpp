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

#include <array>
#include <vector>

#include "stccl/tensor.hpp"

namespace stccl {

// 2x3 affine map over (x, y) pixel coordinates (x = column, y = row).
struct AffineTransform {
  // row 0: [a b tx], row 1: [c d ty]
  std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double tx, double ty);
  static AffineTransform rotation_scale(double angle_rad, double scale, double cx, double cy);

  std::array<double, 2> apply(double x, double y) const;
  AffineTransform inverse() const;
  AffineTransform compose(const AffineTransform& inner) const;  // this ∘ inner
  double det() const { return m[0] * m[4] - m[1] * m[3]; }
  void validate() const;  // finite, |det| > 1e-8
};

enum class LandmarkSchema { kSynthetic9, kDetector68 };

struct LandmarkSet {
  std::vector<std::array<double, 2>> points;  // (x, y) pixels
  LandmarkSchema schema = LandmarkSchema::kSynthetic9;

  int expected_count() const { return schema == LandmarkSchema::kSynthetic9 ? 9 : 68; }
  void validate(int image_h, int image_w) const;
};

// Least-squares 2x3 transform minimizing sum ||T(src_p) - dst_p||^2.
AffineTransform estimate_affine(const LandmarkSet& src, const LandmarkSet& dst);

// Bilinear resampling into the destination frame of T; zero outside the
// source. warp(image, identity) returns the input bit-equal.
Tensor warp_image(const Tensor& image, const AffineTransform& transform, int out_h, int out_w);

}  // namespace stccl
