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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stccl/corpus.hpp"
#include "stccl/geometry.hpp"
#include "stccl/metric.hpp"
#include "stccl/pairing.hpp"

namespace stccl {

struct SequenceMeta {
  double fps = 25.0;
  int frames = 0;
  std::vector<double> trajectory;
  std::vector<LandmarkSet> landmarks;
  EmotionStyle style;
  std::vector<AffineTransform> jitter;
  std::optional<std::vector<double>> warp;
};

// Read-only view of an on-disk corpus; frames load lazily from PNG.
class CorpusIndex {
 public:
  static CorpusIndex load(const std::string& root);

  const std::string& root() const { return root_; }
  int image_size() const { return image_size_; }
  int frames_per_utterance() const { return frames_; }
  double fps() const { return fps_; }
  bool time_warp() const { return time_warp_; }
  const std::vector<std::string>& speakers() const { return speakers_; }
  const std::vector<std::string>& emotions() const { return emotions_; }
  const std::vector<std::string>& utterances() const { return utterances_; }

  const SequenceMeta& meta(const std::string& speaker, const std::string& emotion,
                           const std::string& utterance) const;
  Tensor frame(const std::string& speaker, const std::string& emotion,
               const std::string& utterance, int t) const;
  std::vector<Tensor> sequence(const std::string& speaker, const std::string& emotion,
                               const std::string& utterance) const;
  std::string audio_path(const std::string& speaker, const std::string& emotion,
                         const std::string& utterance) const;

 private:
  std::string root_;
  int image_size_ = 0;
  int frames_ = 0;
  double fps_ = 25.0;
  bool time_warp_ = false;
  std::vector<std::string> speakers_, emotions_, utterances_;
  std::map<std::string, SequenceMeta> meta_;
};

// DTW over the audio of every (neutral, other-emotion) rendition of each
// utterance, mapped to video-frame pairs.
PairManifest build_pair_manifest(const CorpusIndex& corpus);

// Materializes aligned frame pairs; the non-anchor stream is pose-warped
// onto the anchor via the landmark affine fit.
PairedDataset build_aligned_pairs(const CorpusIndex& corpus, const PairManifest& manifest,
                                  bool pose_align = true);

}  // namespace stccl
