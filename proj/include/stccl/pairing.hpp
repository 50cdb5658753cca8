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

#include <string>
#include <utility>
#include <vector>

#include "stccl/tensor.hpp"

namespace stccl {

struct MelParams {
  int n_mels = 80;
  double window_sec = 0.025;
  double hop_sec = 0.010;
  double power_floor = 1e-10;
};

struct MelSpectrogram {
  Tensor data;  // (n_mels, n_frames), log power
  int sample_rate = 0;
  int hop_samples = 0;
  int window_samples = 0;
  int n_mels = 0;

  int frames() const { return data.ndim() == 2 ? data.dim(1) : 0; }
};

// Log-mel over centered, reflect-padded Hann frames.
MelSpectrogram mel_spectrogram(const std::vector<double>& audio, int sample_rate,
                               const MelParams& params = {});

// Center frequency (Hz) of one triangular mel band.
double mel_band_center_hz(int band, int n_mels, double sample_rate);

struct WarpPath {
  std::vector<std::pair<int, int>> points;
  std::vector<double> point_costs;
  double total_cost = 0.0;

  void validate(int len_a, int len_b) const;
};

// Globally optimal monotone alignment under the three-move step rule; ties
// prefer the diagonal, then (1,0).
WarpPath dtw_from_costs(const Tensor& cost);  // (len_a, len_b) per-cell costs
WarpPath dtw_align(const MelSpectrogram& a, const MelSpectrogram& b);

// Maps spectrogram index pairs to video frame pairs; keeps the lowest-cost
// match per frame_a.
std::vector<std::pair<int, int>> frame_pairs_from_path(const WarpPath& path, double fps_a,
                                                       double fps_b, double audio_hop_sec);

struct PairManifestEntry {
  std::string speaker;
  std::string utterance;
  std::string emotion_a;
  std::string emotion_b;
  int frame_a = 0;
  int frame_b = 0;
  double cost = 0.0;
};
using PairManifest = std::vector<PairManifestEntry>;

void save_manifest(const PairManifest& manifest, const std::string& path);  // JSON lines
PairManifest load_manifest(const std::string& path);

}  // namespace stccl
