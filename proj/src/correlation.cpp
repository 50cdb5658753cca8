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

#include "stccl/correlation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "stccl/errors.hpp"
#include "stccl/rng.hpp"

namespace stccl {

const char* to_string(Mechanism m) {
  return m == Mechanism::kVisualDisparity ? "vd" : "cm";
}

const char* to_string(Domain d) { return d == Domain::kSpatial ? "spatial" : "temporal"; }

void FeatureMap::validate() const {
  if (!data.defined() || data.value().ndim() != 3) {
    throw ArgumentError("feature map must be (C,H,W)");
  }
  if (channels() < 1) throw ArgumentError("feature map needs at least one channel");
  if (height() < 2 || width() < 2) throw ArgumentError("feature map spatial dims must be >= 2");
  if (!data.value().all_finite()) throw ArgumentError("feature map has non-finite entries");
}

const FeatureMap& FeaturePyramid::level(int l) const {
  if (l < 1 || l > level_count()) throw IndexError("pyramid level out of range");
  return levels[static_cast<std::size_t>(l - 1)];
}

void FeaturePyramid::validate() const {
  if (levels.empty()) throw ArgumentError("empty pyramid");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    levels[i].validate();
    if (i > 0 && (levels[i].height() > levels[i - 1].height() ||
                  levels[i].width() > levels[i - 1].width())) {
      throw ArgumentError("pyramid spatial dims must be non-increasing with level");
    }
  }
}

void CorrelationDescriptor::validate(int expected_length) const {
  if (length() != expected_length) {
    throw ArgumentError("descriptor length inconsistent with mechanism/level");
  }
  if (!values.value().all_finite()) throw NumericError("descriptor has non-finite values");
}

void GramMatrix::validate(bool check_psd) const {
  if (data.ndim() != 2 || data.dim(0) != data.dim(1)) {
    throw ArgumentError("gram matrix must be square");
  }
  const int n = data.dim(0);
  const double scale = std::max(data.max_abs(), 1e-300);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::fabs(data.at({i, j}) - data.at({j, i})) > 1e-6 * scale) {
        throw NumericError("gram matrix asymmetric beyond tolerance");
      }
    }
  }
  if (check_psd) {
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) m(i, j) = data.at({i, j});
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    const double min_eig = solver.eigenvalues().minCoeff();
    const double max_eig = std::max(solver.eigenvalues().maxCoeff(), 0.0);
    if (min_eig < -1e-6 * std::max(max_eig, 1e-300)) {
      throw NumericError("gram matrix not positive semidefinite within tolerance");
    }
  }
}

Var pixel_vector(const FeatureMap& map, int row, int col) {
  const int c = map.channels(), h = map.height(), w = map.width();
  if (row < 0 || row >= h || col < 0 || col >= w) {
    throw IndexError("region index out of bounds at level " + std::to_string(map.level));
  }
  std::vector<std::int64_t> idx(static_cast<std::size_t>(c));
  for (int ci = 0; ci < c; ++ci) {
    idx[static_cast<std::size_t>(ci)] =
        (static_cast<std::int64_t>(ci) * h + row) * w + col;
  }
  return ops::gather(map.data, std::move(idx));
}

CorrelationDescriptor visual_disparity(const FeaturePyramid& pyramid, const RegionIndex& i,
                                       const RegionIndex& j) {
  if (i.level != j.level) throw IndexError("visual_disparity: level mismatch");
  const FeatureMap& map = pyramid.level(i.level);
  Var vi = pixel_vector(map, i.row, i.col);
  Var vj = pixel_vector(map, j.row, j.col);
  CorrelationDescriptor d;
  d.mechanism = Mechanism::kVisualDisparity;
  d.domain = Domain::kSpatial;
  d.level = i.level;
  d.values = ops::sub(vi, vj);
  return d;
}

namespace {

// Exact-symmetry Gram: each (i,j) and (j,i) share one dot product.
GramMatrix gram_from_rows(const std::vector<std::vector<double>>& rows) {
  const int n = static_cast<int>(rows.size());
  GramMatrix g;
  g.data = Tensor({n, n});
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < rows[static_cast<std::size_t>(i)].size(); ++c) {
        s += rows[static_cast<std::size_t>(i)][c] * rows[static_cast<std::size_t>(j)][c];
      }
      g.data.at({i, j}) = s;
      g.data.at({j, i}) = s;
    }
  }
  return g;
}

}  // namespace

GramMatrix gram_matrix(const FeatureMap& map, Domain axis,
                       const std::vector<FeatureMap>* sequence, int row, int col) {
  if (axis == Domain::kSpatial) {
    // Accepts any (C,H,W) grid, including degenerate 1-row F matrices; the
    // stricter pyramid-level invariants live on FeaturePyramid.
    if (!map.data.defined() || map.data.value().ndim() != 3 || map.channels() < 1) {
      throw ArgumentError("gram_matrix: feature map must be (C,H,W)");
    }
    const int c = map.channels(), h = map.height(), w = map.width();
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(h) * w,
                                          std::vector<double>(static_cast<std::size_t>(c)));
    const Tensor& t = map.data.value();
    for (int r = 0; r < h; ++r) {
      for (int cc = 0; cc < w; ++cc) {
        auto& dst = rows[static_cast<std::size_t>(r) * w + cc];
        for (int ci = 0; ci < c; ++ci) dst[static_cast<std::size_t>(ci)] = t.at({ci, r, cc});
      }
    }
    return gram_from_rows(rows);
  }
  if (sequence == nullptr || sequence->empty()) {
    throw ArgumentError("gram_matrix: temporal axis needs a non-empty sequence");
  }
  const int c = sequence->front().channels();
  std::vector<std::vector<double>> rows;
  rows.reserve(sequence->size());
  for (const FeatureMap& frame : *sequence) {
    if (frame.channels() != c) throw ArgumentError("gram_matrix: channel mismatch in sequence");
    if (row < 0 || row >= frame.height() || col < 0 || col >= frame.width()) {
      throw IndexError("gram_matrix: location out of bounds");
    }
    std::vector<double> v(static_cast<std::size_t>(c));
    for (int ci = 0; ci < c; ++ci) v[static_cast<std::size_t>(ci)] = frame.data.value().at({ci, row, col});
    rows.push_back(std::move(v));
  }
  return gram_from_rows(rows);
}

Tensor correlation_value(const GramMatrix& m, int i, int j, CmMode mode, int window,
                         std::optional<std::pair<int, int>> grid) {
  const int n = m.size();
  if (i < 0 || i >= n || j < 0 || j >= n) throw IndexError("correlation_value: index out of range");
  if (mode == CmMode::kLiteral) {
    return Tensor::from({1}, {m.data.at({i, j})});
  }
  const int half = window / 2;
  Tensor out({window * window}, 0.0);
  if (grid.has_value()) {
    const auto [h, w] = *grid;
    if (h * w != n) throw ArgumentError("correlation_value: grid does not match matrix size");
    const int jr = j / w, jc = j % w;
    int t = 0;
    for (int dr = -half; dr <= half; ++dr) {
      for (int dc = -half; dc <= half; ++dc, ++t) {
        const int r = jr + dr, c = jc + dc;
        if (r >= 0 && r < h && c >= 0 && c < w) out[t] = m.data.at({i, r * w + c});
      }
    }
  } else {
    int t = 0;
    for (int di = -half; di <= half; ++di) {
      for (int dj = -half; dj <= half; ++dj, ++t) {
        const int a = i + di, b = j + dj;
        if (a >= 0 && a < n && b >= 0 && b < n) out[t] = m.data.at({a, b});
      }
    }
  }
  return out;
}

namespace {

Var dot_or_zero(const FeatureMap& map, int r1, int c1, int r2, int c2) {
  return ops::dot(pixel_vector(map, r1, c1), pixel_vector(map, r2, c2));
}

}  // namespace

CorrelationDescriptor correlate_spatial(Mechanism mechanism, const FeaturePyramid& pyramid,
                                        const RegionIndex& i, const RegionIndex& j,
                                        const CorrelationOptions& options) {
  if (i.level != j.level) throw ArgumentError("correlate: spatial indices at different levels");
  if (mechanism == Mechanism::kVisualDisparity) return visual_disparity(pyramid, i, j);

  const FeatureMap& map = pyramid.level(i.level);
  const int h = map.height(), w = map.width();
  if (i.row < 0 || i.row >= h || i.col < 0 || i.col >= w || j.row < 0 || j.row >= h || j.col < 0 ||
      j.col >= w) {
    throw IndexError("correlate: region out of bounds");
  }
  CorrelationDescriptor d;
  d.mechanism = Mechanism::kCorrelationMatrix;
  d.domain = Domain::kSpatial;
  d.level = i.level;
  if (options.cm_mode == CmMode::kLiteral) {
    d.values = dot_or_zero(map, i.row, i.col, j.row, j.col);
    d.values = ops::reshape(d.values, {1});
    return d;
  }
  const int half = options.window / 2;
  std::vector<Var> entries;
  entries.reserve(static_cast<std::size_t>(options.window) * options.window);
  for (int dr = -half; dr <= half; ++dr) {
    for (int dc = -half; dc <= half; ++dc) {
      const int r = j.row + dr, c = j.col + dc;
      if (r >= 0 && r < h && c >= 0 && c < w) {
        entries.push_back(dot_or_zero(map, i.row, i.col, r, c));
      } else {
        entries.push_back(Var::scalar(0.0));
      }
    }
  }
  d.values = ops::concat(entries);
  return d;
}

CorrelationDescriptor correlate_temporal(Mechanism mechanism,
                                         const std::vector<FeaturePyramid>& sequence,
                                         const TemporalIndex& i, const TemporalIndex& j,
                                         const CorrelationOptions& options) {
  if (sequence.empty()) throw ArgumentError("correlate: empty sequence");
  if (i.level != j.level || i.row != j.row || i.col != j.col) {
    throw ArgumentError("correlate: temporal indices must share one location");
  }
  const int t = static_cast<int>(sequence.size());
  if (i.frame < 0 || i.frame >= t || j.frame < 0 || j.frame >= t) {
    throw IndexError("correlate: frame index out of range");
  }
  auto frame_vec = [&](int frame) {
    return pixel_vector(sequence[static_cast<std::size_t>(frame)].level(i.level), i.row, i.col);
  };

  CorrelationDescriptor d;
  d.mechanism = mechanism;
  d.domain = Domain::kTemporal;
  d.level = i.level;
  if (mechanism == Mechanism::kVisualDisparity) {
    d.values = ops::sub(frame_vec(i.frame), frame_vec(j.frame));
    return d;
  }
  if (options.cm_mode == CmMode::kLiteral) {
    d.values = ops::reshape(ops::dot(frame_vec(i.frame), frame_vec(j.frame)), {1});
    return d;
  }
  const int half = options.window / 2;
  std::vector<Var> entries;
  entries.reserve(static_cast<std::size_t>(options.window) * options.window);
  for (int di = -half; di <= half; ++di) {
    for (int dj = -half; dj <= half; ++dj) {
      const int a = i.frame + di, b = j.frame + dj;
      if (a >= 0 && a < t && b >= 0 && b < t) {
        entries.push_back(ops::dot(frame_vec(a), frame_vec(b)));
      } else {
        entries.push_back(Var::scalar(0.0));
      }
    }
  }
  d.values = ops::concat(entries);
  return d;
}

std::vector<SpatialPairSample> sample_spatial_pairs(int grid_h, int grid_w, int n_anchors,
                                                    std::uint64_t seed, int level) {
  if (grid_h < 3 || grid_w < 3) throw ArgumentError("spatial sampling needs a grid of at least 3x3");
  if (n_anchors < 1) throw ArgumentError("n_anchors must be >= 1");

  std::vector<std::pair<int, int>> interior;
  for (int r = 1; r < grid_h - 1; ++r) {
    for (int c = 1; c < grid_w - 1; ++c) interior.emplace_back(r, c);
  }
  Rng rng(seed);
  rng.shuffle(interior);
  const std::size_t take = std::min<std::size_t>(interior.size(), static_cast<std::size_t>(n_anchors));

  std::vector<SpatialPairSample> samples;
  samples.reserve(take);
  for (std::size_t s = 0; s < take; ++s) {
    const auto [ar, ac] = interior[s];
    SpatialPairSample sample;
    sample.anchor = RegionIndex{level, ar, ac};
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        sample.positives.push_back(RegionIndex{level, ar + dr, ac + dc});
      }
    }
    std::vector<std::pair<int, int>> pool;
    for (int r = 0; r < grid_h; ++r) {
      for (int c = 0; c < grid_w; ++c) {
        if (std::max(std::abs(r - ar), std::abs(c - ac)) >= 2) pool.emplace_back(r, c);
      }
    }
    if (pool.size() < 8) {
      throw ArgumentError("fewer than 8 eligible negatives on a " + std::to_string(grid_h) + "x" +
                          std::to_string(grid_w) + " grid");
    }
    rng.shuffle(pool);
    for (int k = 0; k < 8; ++k) {
      sample.negatives.push_back(RegionIndex{level, pool[static_cast<std::size_t>(k)].first,
                                             pool[static_cast<std::size_t>(k)].second});
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<TemporalPairSample> sample_temporal_pairs(int frame_count, int sample_count,
                                                      std::uint64_t seed) {
  if (frame_count < 4) throw ArgumentError("temporal sampling needs at least 4 frames");
  if (sample_count < 1) throw ArgumentError("sample_count must be >= 1");

  Rng rng(seed);
  std::vector<TemporalPairSample> samples;
  samples.reserve(static_cast<std::size_t>(sample_count));
  for (int s = 0; s < sample_count; ++s) {
    TemporalPairSample sample;
    sample.anchor = 1 + static_cast<int>(rng.uniform_int(frame_count - 2));
    sample.positives = {sample.anchor - 1, sample.anchor + 1};
    std::vector<int> pool;
    for (int f = 0; f < frame_count; ++f) {
      if (std::abs(f - sample.anchor) >= 2) pool.push_back(f);
    }
    if (static_cast<int>(pool.size()) >= 8) {
      rng.shuffle(pool);
      sample.negatives.assign(pool.begin(), pool.begin() + 8);
    } else {
      for (int k = 0; k < 8; ++k) {
        sample.negatives.push_back(pool[static_cast<std::size_t>(rng.uniform_int(
            static_cast<std::int64_t>(pool.size())))]);
      }
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

void validate_sample(const SpatialPairSample& sample, int grid_h, int grid_w) {
  auto in_bounds = [&](const RegionIndex& r) {
    return r.row >= 0 && r.row < grid_h && r.col >= 0 && r.col < grid_w;
  };
  if (!in_bounds(sample.anchor)) throw ArgumentError("sample anchor out of bounds");
  if (sample.positives.size() != 8) throw ArgumentError("spatial sample needs 8 positives");
  if (sample.negatives.size() != 8) throw ArgumentError("spatial sample needs 8 negatives");
  auto key = [&](const RegionIndex& r) { return r.row * grid_w + r.col; };
  std::vector<int> seen;
  for (const auto& p : sample.positives) {
    if (!in_bounds(p)) throw ArgumentError("positive out of bounds");
    const int cheb =
        std::max(std::abs(p.row - sample.anchor.row), std::abs(p.col - sample.anchor.col));
    if (cheb != 1) throw ArgumentError("positive not in the Chebyshev-1 ring");
    seen.push_back(key(p));
  }
  for (const auto& n : sample.negatives) {
    if (!in_bounds(n)) throw ArgumentError("negative out of bounds");
    const int cheb =
        std::max(std::abs(n.row - sample.anchor.row), std::abs(n.col - sample.anchor.col));
    if (cheb < 2) throw ArgumentError("negative inside the positive neighborhood");
    seen.push_back(key(n));
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw ArgumentError("duplicate region in spatial sample");
  }
}

void validate_sample(const TemporalPairSample& sample, int frame_count) {
  if (sample.anchor < 1 || sample.anchor > frame_count - 2) {
    throw ArgumentError("temporal anchor outside [1, T-2]");
  }
  if (sample.positives != std::vector<int>{sample.anchor - 1, sample.anchor + 1}) {
    throw ArgumentError("temporal positives must be the unit-adjacent frames");
  }
  if (sample.negatives.size() != 8) throw ArgumentError("temporal sample needs 8 negatives");
  for (int n : sample.negatives) {
    if (n < 0 || n >= frame_count) throw ArgumentError("negative frame out of range");
    if (std::abs(n - sample.anchor) < 2) throw ArgumentError("negative frame too close to anchor");
  }
  // Duplicates are legal only in the forced with-replacement regime.
  if (frame_count - 3 >= 8) {
    std::vector<int> sorted = sample.negatives;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ArgumentError("duplicate negative frame");
    }
  }
}

double cosine_similarity(const Tensor& a, const Tensor& b, bool* degenerate) {
  if (!a.same_shape(b)) throw ArgumentError("cosine_similarity: shape mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const bool degen = na < 1e-24 || nb < 1e-24;
  if (degenerate) *degenerate = degen;
  if (degen) return 0.0;
  const double value = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(value, -1.0, 1.0);
}

}  // namespace stccl
