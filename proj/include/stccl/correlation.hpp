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
#include <optional>
#include <vector>

#include "stccl/autodiff.hpp"
#include "stccl/tensor.hpp"

namespace stccl {

// The two mechanisms that quantify how a pair of regions relates: the
// elementwise feature difference, or an entry (or window of entries) of the
// Gram matrix of region features.
enum class Mechanism { kVisualDisparity, kCorrelationMatrix };
enum class Domain { kSpatial, kTemporal };
// Correlation-matrix descriptor layout: the single matrix entry, or the
// window x window block around it (the shipped default).
enum class CmMode { kLiteral, kWindow };

const char* to_string(Mechanism m);
const char* to_string(Domain d);

// One level of a feature pyramid. `data` is (C,H,W); it may carry an
// autodiff graph (extraction output) or be a plain constant.
struct FeatureMap {
  Var data;
  int level = 1;

  int channels() const { return data.value().dim(0); }
  int height() const { return data.value().dim(1); }
  int width() const { return data.value().dim(2); }
  void validate() const;
};

struct FeaturePyramid {
  std::vector<FeatureMap> levels;
  int source_h = 0;
  int source_w = 0;

  int level_count() const { return static_cast<int>(levels.size()); }
  const FeatureMap& level(int l) const;  // 1-based, mirrors pyramid level tags
  void validate() const;
};

struct RegionIndex {
  int level = 1;
  int row = 0;
  int col = 0;
};

struct TemporalIndex {
  int frame = 0;
  int level = 1;
  int row = 0;
  int col = 0;
};

struct CorrelationDescriptor {
  Mechanism mechanism = Mechanism::kVisualDisparity;
  Domain domain = Domain::kSpatial;
  int level = 1;
  Var values;

  int length() const { return static_cast<int>(values.value().numel()); }
  void validate(int expected_length) const;
};

struct GramMatrix {
  Tensor data;  // (N,N)

  int size() const { return data.ndim() == 2 ? data.dim(0) : 0; }
  // Symmetry always; eigenvalue PSD check intended for small instances.
  void validate(bool check_psd = true) const;
};

struct SpatialPairSample {
  RegionIndex anchor;
  std::vector<RegionIndex> positives;  // the Chebyshev-1 ring, row-major order
  std::vector<RegionIndex> negatives;  // 8 cells at Chebyshev distance >= 2
};

struct TemporalPairSample {
  int anchor = 0;
  std::vector<int> positives;  // {anchor-1, anchor+1}
  std::vector<int> negatives;  // 8 frames at |delta| >= 2
};

struct CorrelationOptions {
  CmMode cm_mode = CmMode::kWindow;
  int window = 3;
};

// Feature vector of one cell, shape (C). Differentiable gather.
Var pixel_vector(const FeatureMap& map, int row, int col);

CorrelationDescriptor visual_disparity(const FeaturePyramid& pyramid, const RegionIndex& i,
                                       const RegionIndex& j);

// Spatial: F has one row per cell (H*W, C). Temporal: F stacks the feature
// vector at (row,col) across the sequence (T, C). Returns M = F F^T.
GramMatrix gram_matrix(const FeatureMap& map, Domain axis,
                       const std::vector<FeatureMap>* sequence = nullptr, int row = 0, int col = 0);

// Reads a descriptor out of an explicit Gram matrix. Window mode needs the
// source grid to reinterpret row i spatially; temporal window takes the
// block of M centered at (i,j). Out-of-range window cells are zero.
Tensor correlation_value(const GramMatrix& m, int i, int j, CmMode mode = CmMode::kLiteral,
                         int window = 3, std::optional<std::pair<int, int>> grid = std::nullopt);

CorrelationDescriptor correlate_spatial(Mechanism mechanism, const FeaturePyramid& pyramid,
                                        const RegionIndex& i, const RegionIndex& j,
                                        const CorrelationOptions& options = {});

CorrelationDescriptor correlate_temporal(Mechanism mechanism,
                                         const std::vector<FeaturePyramid>& sequence,
                                         const TemporalIndex& i, const TemporalIndex& j,
                                         const CorrelationOptions& options = {});

// Anchors are interior cells so each has a full 8-ring; negatives are 8
// distinct cells at Chebyshev distance >= 2. Deterministic per seed.
std::vector<SpatialPairSample> sample_spatial_pairs(int grid_h, int grid_w, int n_anchors,
                                                    std::uint64_t seed, int level = 1);

// Anchors from [1..T-2]; positives are the unit-adjacent frames; negatives
// 8 frames at |delta| >= 2, with replacement only when the pool is short.
std::vector<TemporalPairSample> sample_temporal_pairs(int frame_count, int sample_count,
                                                      std::uint64_t seed);

void validate_sample(const SpatialPairSample& sample, int grid_h, int grid_w);
void validate_sample(const TemporalPairSample& sample, int frame_count);

// Zero-norm input yields 0 with the degeneracy flag set instead of NaN.
double cosine_similarity(const Tensor& a, const Tensor& b, bool* degenerate = nullptr);

}  // namespace stccl
