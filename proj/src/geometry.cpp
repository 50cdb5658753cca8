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

#include "stccl/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "stccl/errors.hpp"

namespace stccl {

AffineTransform AffineTransform::translation(double tx, double ty) {
  AffineTransform t;
  t.m = {1.0, 0.0, tx, 0.0, 1.0, ty};
  return t;
}

AffineTransform AffineTransform::rotation_scale(double angle_rad, double scale, double cx,
                                                double cy) {
  const double c = std::cos(angle_rad) * scale;
  const double s = std::sin(angle_rad) * scale;
  AffineTransform t;
  // rotate/scale about (cx, cy)
  t.m = {c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy};
  return t;
}

std::array<double, 2> AffineTransform::apply(double x, double y) const {
  return {m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5]};
}

AffineTransform AffineTransform::inverse() const {
  const double d = det();
  if (std::fabs(d) <= 1e-8) throw DegeneracyError("affine transform is not invertible");
  AffineTransform inv;
  inv.m[0] = m[4] / d;
  inv.m[1] = -m[1] / d;
  inv.m[3] = -m[3] / d;
  inv.m[4] = m[0] / d;
  inv.m[2] = -(inv.m[0] * m[2] + inv.m[1] * m[5]);
  inv.m[5] = -(inv.m[3] * m[2] + inv.m[4] * m[5]);
  return inv;
}

AffineTransform AffineTransform::compose(const AffineTransform& inner) const {
  AffineTransform out;
  out.m[0] = m[0] * inner.m[0] + m[1] * inner.m[3];
  out.m[1] = m[0] * inner.m[1] + m[1] * inner.m[4];
  out.m[2] = m[0] * inner.m[2] + m[1] * inner.m[5] + m[2];
  out.m[3] = m[3] * inner.m[0] + m[4] * inner.m[3];
  out.m[4] = m[3] * inner.m[1] + m[4] * inner.m[4];
  out.m[5] = m[3] * inner.m[2] + m[4] * inner.m[5] + m[5];
  return out;
}

void AffineTransform::validate() const {
  for (double v : m) {
    if (!std::isfinite(v)) throw ArgumentError("non-finite affine transform");
  }
  if (std::fabs(det()) <= 1e-8) throw DegeneracyError("degenerate affine transform");
}

void LandmarkSet::validate(int image_h, int image_w) const {
  if (static_cast<int>(points.size()) != expected_count()) {
    throw ArgumentError("landmark count does not match schema");
  }
  for (const auto& p : points) {
    if (!(p[0] >= 0.0 && p[0] <= image_w - 1.0 && p[1] >= 0.0 && p[1] <= image_h - 1.0)) {
      throw ArgumentError("landmark outside image bounds");
    }
  }
}

AffineTransform estimate_affine(const LandmarkSet& src, const LandmarkSet& dst) {
  if (src.schema != dst.schema || src.points.size() != dst.points.size()) {
    throw ArgumentError("estimate_affine: landmark schema/count mismatch");
  }
  const int n = static_cast<int>(src.points.size());
  if (n < 3) throw ArgumentError("estimate_affine: needs at least 3 points");

  Eigen::MatrixXd design(n, 3);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = src.points[static_cast<std::size_t>(i)][0];
    design(i, 1) = src.points[static_cast<std::size_t>(i)][1];
    design(i, 2) = 1.0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-9);
  if (qr.rank() < 3) throw DegeneracyError("estimate_affine: collinear landmarks");

  Eigen::VectorXd bx(n), by(n);
  for (int i = 0; i < n; ++i) {
    bx(i) = dst.points[static_cast<std::size_t>(i)][0];
    by(i) = dst.points[static_cast<std::size_t>(i)][1];
  }
  const Eigen::Vector3d px = qr.solve(bx);
  const Eigen::Vector3d py = qr.solve(by);
  AffineTransform t;
  t.m = {px(0), px(1), px(2), py(0), py(1), py(2)};
  t.validate();
  return t;
}

Tensor warp_image(const Tensor& image, const AffineTransform& transform, int out_h, int out_w) {
  if (image.ndim() != 3) throw ArgumentError("warp expects a (C,H,W) image");
  if (out_h < 1 || out_w < 1) throw ArgumentError("warp output shape must be positive");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const AffineTransform inv = transform.inverse();

  Tensor out({c, out_h, out_w}, 0.0);
  for (int r = 0; r < out_h; ++r) {
    for (int cc = 0; cc < out_w; ++cc) {
      const auto [sx, sy] = inv.apply(static_cast<double>(cc), static_cast<double>(r));
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0;
      const double fy = sy - y0;
      const double weights[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
      for (int ci = 0; ci < c; ++ci) {
        double acc = 0.0;
        for (int t = 0; t < 4; ++t) {
          if (xs[t] < 0 || xs[t] >= w || ys[t] < 0 || ys[t] >= h || weights[t] == 0.0) continue;
          acc += weights[t] * image.at({ci, ys[t], xs[t]});
        }
        out.at({ci, r, cc}) = acc;
      }
    }
  }
  return out;
}

}  // namespace stccl
