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

#include "stccl/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "stccl/errors.hpp"
#include "stccl/image_io.hpp"
#include "stccl/wav_io.hpp"

namespace stccl {

namespace fs = std::filesystem;

namespace {

std::string seq_key(const std::string& speaker, const std::string& emotion,
                    const std::string& utterance) {
  return speaker + "/" + emotion + "/" + utterance;
}

SequenceMeta parse_meta(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing meta.json: " + path.string(), "corpus_format");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError("malformed meta.json: " + path.string(), "corpus_format");

  SequenceMeta meta;
  try {
    meta.fps = j.at("fps").get<double>();
    meta.frames = j.at("T").get<int>();
    meta.trajectory = j.at("trajectory").get<std::vector<double>>();
    for (const auto& frame_lms : j.at("landmarks")) {
      LandmarkSet set;
      set.schema = LandmarkSchema::kSynthetic9;
      for (const auto& p : frame_lms) {
        set.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      }
      meta.landmarks.push_back(std::move(set));
    }
    const auto& style = j.at("style");
    meta.style.name = style.at("name").get<std::string>();
    meta.style.brow_offset_px = style.at("brow_offset").get<double>();
    meta.style.brow_angle_deg = style.at("brow_angle").get<double>();
    meta.style.eye_openness = style.at("eye_openness").get<double>();
    meta.style.tint = style.at("tint").get<std::array<double, 3>>();
    meta.style.mouth_width_scale = style.at("mouth_width_scale").get<double>();
    for (const auto& m : j.at("jitter")) {
      AffineTransform t;
      t.m = {m.at(0).at(0).get<double>(), m.at(0).at(1).get<double>(), m.at(0).at(2).get<double>(),
             m.at(1).at(0).get<double>(), m.at(1).at(1).get<double>(), m.at(1).at(2).get<double>()};
      meta.jitter.push_back(t);
    }
    if (!j.at("warp").is_null()) {
      meta.warp = j.at("warp").get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("meta.json field error in " + path.string() + ": " + e.what(), "corpus_format");
  }
  if (static_cast<int>(meta.trajectory.size()) != meta.frames ||
      static_cast<int>(meta.landmarks.size()) != meta.frames ||
      static_cast<int>(meta.jitter.size()) != meta.frames) {
    throw IoError("meta.json lengths inconsistent: " + path.string(), "corpus_format");
  }
  return meta;
}

}  // namespace

CorpusIndex CorpusIndex::load(const std::string& root) {
  CorpusIndex index;
  index.root_ = root;
  const fs::path root_path(root);
  std::ifstream in(root_path / "corpus.json", std::ios::binary);
  if (!in) throw IoError("missing corpus.json under " + root, "corpus_format");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError("malformed corpus.json", "corpus_format");

  int n_speakers = 0, n_utterances = 0;
  try {
    n_speakers = j.at("speakers").get<int>();
    n_utterances = j.at("utterances").get<int>();
    index.frames_ = j.at("frames").get<int>();
    index.image_size_ = j.at("image_size").get<int>();
    index.fps_ = j.at("fps").get<double>();
    index.time_warp_ = j.at("time_warp").get<bool>();
    index.emotions_ = j.at("emotions").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corpus.json field error: ") + e.what(), "corpus_format");
  }
  for (int s = 0; s < n_speakers; ++s) {
    char id[8];
    std::snprintf(id, sizeof id, "s%02d", s);
    index.speakers_.emplace_back(id);
  }
  for (int u = 0; u < n_utterances; ++u) {
    char id[8];
    std::snprintf(id, sizeof id, "u%02d", u);
    index.utterances_.emplace_back(id);
  }

  for (const std::string& speaker : index.speakers_) {
    for (const std::string& emotion : index.emotions_) {
      for (const std::string& utt : index.utterances_) {
        const fs::path dir = root_path / speaker / emotion / utt;
        index.meta_[seq_key(speaker, emotion, utt)] = parse_meta(dir / "meta.json");
      }
    }
  }
  return index;
}

const SequenceMeta& CorpusIndex::meta(const std::string& speaker, const std::string& emotion,
                                      const std::string& utterance) const {
  auto it = meta_.find(seq_key(speaker, emotion, utterance));
  if (it == meta_.end()) throw IoError("unknown sequence: " + seq_key(speaker, emotion, utterance),
                                       "corpus_format");
  return it->second;
}

Tensor CorpusIndex::frame(const std::string& speaker, const std::string& emotion,
                          const std::string& utterance, int t) const {
  const SequenceMeta& m = meta(speaker, emotion, utterance);
  if (t < 0 || t >= m.frames) throw IndexError("frame index out of range");
  char name[24];
  std::snprintf(name, sizeof name, "frame_%04d.png", t);
  return read_png((fs::path(root_) / speaker / emotion / utterance / name).string());
}

std::vector<Tensor> CorpusIndex::sequence(const std::string& speaker, const std::string& emotion,
                                          const std::string& utterance) const {
  const SequenceMeta& m = meta(speaker, emotion, utterance);
  std::vector<Tensor> frames;
  frames.reserve(static_cast<std::size_t>(m.frames));
  for (int t = 0; t < m.frames; ++t) frames.push_back(frame(speaker, emotion, utterance, t));
  return frames;
}

std::string CorpusIndex::audio_path(const std::string& speaker, const std::string& emotion,
                                    const std::string& utterance) const {
  return (fs::path(root_) / speaker / emotion / utterance / "audio.wav").string();
}

PairManifest build_pair_manifest(const CorpusIndex& corpus) {
  PairManifest manifest;
  const std::string anchor_emotion = "neutral";
  if (std::find(corpus.emotions().begin(), corpus.emotions().end(), anchor_emotion) ==
      corpus.emotions().end()) {
    throw IoError("corpus has no neutral stream", "corpus_format");
  }
  const MelParams mel_params;
  for (const std::string& speaker : corpus.speakers()) {
    for (const std::string& utt : corpus.utterances()) {
      const WavData wav_a = read_wav(corpus.audio_path(speaker, anchor_emotion, utt));
      const MelSpectrogram mel_a = mel_spectrogram(wav_a.samples, wav_a.sample_rate, mel_params);
      for (const std::string& emotion : corpus.emotions()) {
        if (emotion == anchor_emotion) continue;
        const WavData wav_b = read_wav(corpus.audio_path(speaker, emotion, utt));
        const MelSpectrogram mel_b = mel_spectrogram(wav_b.samples, wav_b.sample_rate, mel_params);
        const WarpPath path = dtw_align(mel_a, mel_b);

        const double hop_sec = static_cast<double>(mel_a.hop_samples) / mel_a.sample_rate;
        // Lowest-cost match per frame_a, like frame_pairs_from_path, but
        // keeping the matched cost for the manifest.
        std::map<int, std::pair<double, int>> best;
        for (std::size_t p = 0; p < path.points.size(); ++p) {
          const int fa = static_cast<int>(std::lround(path.points[p].first * hop_sec * corpus.fps()));
          const int fb = static_cast<int>(std::lround(path.points[p].second * hop_sec * corpus.fps()));
          if (fa < 0 || fa >= corpus.frames_per_utterance() || fb < 0 ||
              fb >= corpus.frames_per_utterance()) {
            continue;
          }
          const double c = path.point_costs[p];
          auto it = best.find(fa);
          if (it == best.end() || c < it->second.first) best[fa] = {c, fb};
        }
        for (const auto& [fa, cb] : best) {
          PairManifestEntry e;
          e.speaker = speaker;
          e.utterance = utt;
          e.emotion_a = anchor_emotion;
          e.emotion_b = emotion;
          e.frame_a = fa;
          e.frame_b = cb.second;
          e.cost = cb.first;
          manifest.push_back(std::move(e));
        }
      }
    }
  }
  return manifest;
}

PairedDataset build_aligned_pairs(const CorpusIndex& corpus, const PairManifest& manifest,
                                  bool pose_align) {
  // Group manifest rows per sequence pair, ordered by frame_a.
  std::map<std::string, std::vector<const PairManifestEntry*>> groups;
  for (const PairManifestEntry& e : manifest) {
    groups[e.speaker + "/" + e.utterance + "/" + e.emotion_a + "-" + e.emotion_b].push_back(&e);
  }

  PairedDataset dataset;
  const int size = corpus.image_size();
  for (auto& [id, rows] : groups) {
    std::vector<const PairManifestEntry*> sorted = rows;
    std::sort(sorted.begin(), sorted.end(),
              [](const PairManifestEntry* a, const PairManifestEntry* b) {
                return a->frame_a < b->frame_a;
              });
    AlignedSequencePair pair;
    pair.id = id;
    const PairManifestEntry& first = *sorted.front();
    const SequenceMeta& meta_a = corpus.meta(first.speaker, first.emotion_a, first.utterance);
    const SequenceMeta& meta_b = corpus.meta(first.speaker, first.emotion_b, first.utterance);
    for (const PairManifestEntry* e : sorted) {
      Tensor x = corpus.frame(e->speaker, e->emotion_a, e->utterance, e->frame_a);
      Tensor y = corpus.frame(e->speaker, e->emotion_b, e->utterance, e->frame_b);
      if (pose_align) {
        const AffineTransform t =
            estimate_affine(meta_b.landmarks[static_cast<std::size_t>(e->frame_b)],
                            meta_a.landmarks[static_cast<std::size_t>(e->frame_a)]);
        y = warp_image(y, t, size, size);
      }
      pair.x_frames.push_back(std::move(x));
      pair.y_frames.push_back(std::move(y));
    }
    dataset.push_back(std::move(pair));
  }
  return dataset;
}

}  // namespace stccl
