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
#include <cstdint>
#include <string>
#include <vector>

#include "stccl/metric.hpp"

namespace stccl {

inline constexpr int kHistogramBins = 64;

struct CellStats {
  long long n_pos = 0;
  long long n_neg = 0;
  long long n_degenerate = 0;
  double sum_pos = 0.0, sum_neg = 0.0;
  double sumsq_pos = 0.0, sumsq_neg = 0.0;
  std::array<long long, kHistogramBins> hist_pos{};
  std::array<long long, kHistogramBins> hist_neg{};

  void add_pos(double value);
  void add_neg(double value);
  void merge(const CellStats& other);
  double mean_pos() const { return n_pos ? sum_pos / n_pos : 0.0; }
  double mean_neg() const { return n_neg ? sum_neg / n_neg : 0.0; }
  double std_pos() const;
  double std_neg() const;
  double gap() const { return mean_pos() - mean_neg(); }
};

struct SimilarityStats {
  Mechanism mechanism = Mechanism::kVisualDisparity;
  bool trained = false;  // projected embeddings vs raw descriptors
  std::array<std::array<CellStats, 4>, 2> cells;  // [domain][level-1]

  CellStats& cell(Domain domain, int level);
  const CellStats& cell(Domain domain, int level) const;
  void validate() const;
};

struct AnalysisConfig {
  int sample_budget = 10000;  // positive-pair draws per cell
  std::uint64_t seed = 5;
  int n_anchors = 4;
  int temporal_locations = 4;
  int temporal_window = 8;
  // Descriptors whose RMS falls below this are counted as degenerate:
  // static regions produce either exact zeros or pixel-quantization noise,
  // and neither carries a meaningful correlation direction.
  double degenerate_rms = 1e-3;
};

// Draws positive/negative correlation pairs over the aligned dataset and
// accumulates cosine-similarity statistics per (domain, level) cell.
// use_projection selects the trained metric path (projected embeddings);
// otherwise raw descriptors from the checkpoint's backbone are compared.
SimilarityStats similarity_stats(const PairedDataset& data, const MetricCheckpoint& checkpoint,
                                 bool use_projection, const AnalysisConfig& config);

std::string report_json(const std::vector<SimilarityStats>& stats);
std::string report_csv(const std::vector<SimilarityStats>& stats);
std::vector<SimilarityStats> parse_report_json(const std::string& text);
std::vector<SimilarityStats> parse_report_csv(const std::string& text);

// Gnuplot-friendly histogram columns: bin_center pos neg, one block per cell.
std::string histogram_dat(const std::vector<SimilarityStats>& stats);

}  // namespace stccl
