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
#include <optional>
#include <string>
#include <vector>

#include "stccl/geometry.hpp"
#include "stccl/tensor.hpp"

namespace stccl {

// Emotion affects everything except the mouth opening height, which is a
// function of the speech trajectory alone.
struct EmotionStyle {
  std::string name = "neutral";
  double brow_offset_px = 0.0;  // +down, scaled to an 80px face
  double brow_angle_deg = 0.0;
  double eye_openness = 1.0;  // in [0,1]
  std::array<double, 3> tint{0.0, 0.0, 0.0};
  double mouth_width_scale = 1.0;  // in [0.8, 1.2]
};

EmotionStyle emotion_style(const std::string& name);
const std::vector<std::string>& corpus_emotions();  // neutral, happy, angry

struct CorpusSpec {
  int n_speakers = 4;
  int n_utterances = 8;
  int frames_per_utterance = 16;
  int image_size = 80;
  double fps = 25.0;
  double head_jitter_px = 2.0;
  bool time_warp = false;
  std::uint64_t seed = 123;

  void validate() const;  // T >= 8, size >= 32
};

// a(t) in [0,1]; a pure function of (seed, speaker, utterance) — identical
// across emotions of one utterance.
std::vector<double> speech_trajectory(std::uint64_t seed, int speaker, int utterance, int frames,
                                      double fps);

// Recorded monotone resampling positions u(t) in [0, T-1].
std::vector<double> time_warp_map(std::uint64_t seed, int speaker, int utterance, int frames);
std::vector<double> resample_trajectory(const std::vector<double>& trajectory,
                                        const std::vector<double>& positions);

AffineTransform head_jitter(std::uint64_t seed, int speaker, const std::string& emotion,
                            int utterance, int frame, double max_px, int image_size);

Tensor render_frame(int speaker, const EmotionStyle& style, double a_t,
                    const AffineTransform& jitter, int image_size);

// synthetic-9 schema: 4 eye corners, nose tip, 2 mouth corners, chin,
// brow-center; anatomy-stable points mapped through the jitter.
LandmarkSet frame_landmarks(int speaker, const AffineTransform& jitter, int image_size);

struct MouthRoi {
  int r0 = 0, r1 = 0, c0 = 0, c1 = 0;  // half-open [r0,r1) x [c0,c1)
  int area() const { return (r1 - r0) * (c1 - c0); }
};
MouthRoi mouth_roi(int image_size);
Tensor mouth_roi_mask(int image_size);  // (1,H,W), 1 inside the ROI

// Dark-pixel area inside the fixed mouth ROI, normalized by ROI size.
double measure_mouth_openness(const Tensor& frame);

// Frequency-modulated tone following the trajectory; feeds the mel/DTW path.
std::vector<double> synthesize_audio(const std::vector<double>& trajectory, double fps,
                                     int sample_rate = 16000);

// Writes corpus/<speaker>/<emotion>/<utt>/frame_%04d.png + meta.json +
// audio.wav (+ corpus.json at the root). Returns the corpus fingerprint.
std::string generate_corpus(const CorpusSpec& spec, const std::string& out_dir);

// FNV-1a over every file (sorted relative paths), as hex.
std::string corpus_fingerprint(const std::string& root);

}  // namespace stccl
