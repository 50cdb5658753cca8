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

#include "stccl/pairing.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>

#include <json.hpp>

#include "stccl/errors.hpp"

namespace stccl {

namespace {

std::mutex fftw_plan_mutex;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

double reflect_sample(const std::vector<double>& audio, std::int64_t idx) {
  const std::int64_t n = static_cast<std::int64_t>(audio.size());
  if (n == 1) return audio[0];
  while (idx < 0 || idx >= n) {
    if (idx < 0) idx = -idx;
    if (idx >= n) idx = 2 * n - 2 - idx;
  }
  return audio[static_cast<std::size_t>(idx)];
}

}  // namespace

double mel_band_center_hz(int band, int n_mels, double sample_rate) {
  if (band < 0 || band >= n_mels) throw IndexError("mel band out of range");
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  const double step = mel_max / (n_mels + 1);
  return mel_to_hz(step * (band + 1));
}

MelSpectrogram mel_spectrogram(const std::vector<double>& audio, int sample_rate,
                               const MelParams& params) {
  if (audio.empty()) throw ArgumentError("mel_spectrogram: empty audio");
  if (sample_rate < 1) throw ArgumentError("mel_spectrogram: bad sample rate");
  if (params.n_mels < 1) throw ArgumentError("mel_spectrogram: n_mels must be >= 1");

  const int win = std::max(2, static_cast<int>(std::lround(params.window_sec * sample_rate)));
  const int hop = std::max(1, static_cast<int>(std::lround(params.hop_sec * sample_rate)));
  const int nfft = next_pow2(win);
  const int bins = nfft / 2 + 1;
  const int n_frames = 1 + static_cast<int>(audio.size()) / hop;

  std::vector<double> window(static_cast<std::size_t>(win));
  for (int t = 0; t < win; ++t) {
    window[static_cast<std::size_t>(t)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * t / win);
  }

  // Triangular filterbank on the HTK mel scale over [0, sr/2].
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(params.n_mels) + 2);
  for (int i = 0; i < params.n_mels + 2; ++i) {
    edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_max * i / (params.n_mels + 1));
  }
  std::vector<std::vector<double>> filters(static_cast<std::size_t>(params.n_mels),
                                           std::vector<double>(static_cast<std::size_t>(bins), 0.0));
  for (int b = 0; b < params.n_mels; ++b) {
    const double lo = edges[static_cast<std::size_t>(b)];
    const double mid = edges[static_cast<std::size_t>(b) + 1];
    const double hi = edges[static_cast<std::size_t>(b) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / nfft;
      double v = 0.0;
      if (f > lo && f < mid) v = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi) v = (hi - f) / (hi - mid);
      filters[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)] = v;
    }
  }

  double* in;
  fftw_complex* out;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    in = fftw_alloc_real(static_cast<std::size_t>(nfft));
    out = fftw_alloc_complex(static_cast<std::size_t>(bins));
    plan = fftw_plan_dft_r2c_1d(nfft, in, out, FFTW_ESTIMATE);
  }

  MelSpectrogram mel;
  mel.data = Tensor({params.n_mels, n_frames});
  mel.sample_rate = sample_rate;
  mel.hop_samples = hop;
  mel.window_samples = win;
  mel.n_mels = params.n_mels;

  std::vector<double> power(static_cast<std::size_t>(bins));
  for (int frame = 0; frame < n_frames; ++frame) {
    const std::int64_t center = static_cast<std::int64_t>(frame) * hop;
    for (int t = 0; t < win; ++t) {
      in[t] = reflect_sample(audio, center - win / 2 + t) * window[static_cast<std::size_t>(t)];
    }
    for (int t = win; t < nfft; ++t) in[t] = 0.0;
    fftw_execute(plan);
    for (int k = 0; k < bins; ++k) {
      power[static_cast<std::size_t>(k)] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    }
    for (int b = 0; b < params.n_mels; ++b) {
      double e = 0.0;
      const auto& filt = filters[static_cast<std::size_t>(b)];
      for (int k = 0; k < bins; ++k) e += filt[static_cast<std::size_t>(k)] * power[static_cast<std::size_t>(k)];
      mel.data.at({b, frame}) = std::log(std::max(e, params.power_floor));
    }
  }

  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  return mel;
}

void WarpPath::validate(int len_a, int len_b) const {
  if (points.empty()) throw ArgumentError("empty warp path");
  if (points.front() != std::make_pair(0, 0)) throw ArgumentError("warp path must start at (0,0)");
  if (points.back() != std::make_pair(len_a - 1, len_b - 1)) {
    throw ArgumentError("warp path must end at (len_a-1, len_b-1)");
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    const int da = points[i].first - points[i - 1].first;
    const int db = points[i].second - points[i - 1].second;
    const bool legal = (da == 1 && db == 0) || (da == 0 && db == 1) || (da == 1 && db == 1);
    if (!legal) throw ArgumentError("illegal warp path step");
  }
  if (total_cost < 0.0) throw ArgumentError("negative warp cost");
}

WarpPath dtw_from_costs(const Tensor& cost) {
  if (cost.ndim() != 2 || cost.dim(0) < 1 || cost.dim(1) < 1) {
    throw ArgumentError("dtw: cost matrix must be non-empty 2-D");
  }
  const int na = cost.dim(0), nb = cost.dim(1);
  Tensor acc({na, nb});
  std::vector<std::uint8_t> move(static_cast<std::size_t>(na) * nb, 0);  // 0 diag, 1 (1,0), 2 (0,1)

  acc.at({0, 0}) = cost.at({0, 0});
  for (int i = 1; i < na; ++i) {
    acc.at({i, 0}) = acc.at({i - 1, 0}) + cost.at({i, 0});
    move[static_cast<std::size_t>(i) * nb] = 1;
  }
  for (int j = 1; j < nb; ++j) {
    acc.at({0, j}) = acc.at({0, j - 1}) + cost.at({0, j});
    move[static_cast<std::size_t>(j)] = 2;
  }
  for (int i = 1; i < na; ++i) {
    for (int j = 1; j < nb; ++j) {
      const double diag = acc.at({i - 1, j - 1});
      const double vert = acc.at({i - 1, j});
      const double horz = acc.at({i, j - 1});
      double best = diag;
      std::uint8_t m = 0;
      if (vert < best) {
        best = vert;
        m = 1;
      }
      if (horz < best) {
        best = horz;
        m = 2;
      }
      acc.at({i, j}) = best + cost.at({i, j});
      move[static_cast<std::size_t>(i) * nb + j] = m;
    }
  }

  WarpPath path;
  path.total_cost = acc.at({na - 1, nb - 1});
  int i = na - 1, j = nb - 1;
  std::vector<std::pair<int, int>> rev;
  while (true) {
    rev.emplace_back(i, j);
    if (i == 0 && j == 0) break;
    switch (move[static_cast<std::size_t>(i) * nb + j]) {
      case 0: --i; --j; break;
      case 1: --i; break;
      default: --j; break;
    }
  }
  path.points.assign(rev.rbegin(), rev.rend());
  path.point_costs.reserve(path.points.size());
  for (const auto& [a, b] : path.points) path.point_costs.push_back(cost.at({a, b}));
  return path;
}

WarpPath dtw_align(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.n_mels != b.n_mels) throw ArgumentError("dtw_align: mel band count mismatch");
  const int na = a.frames(), nb = b.frames();
  if (na < 1 || nb < 1) throw ArgumentError("dtw_align: empty spectrogram");
  Tensor cost({na, nb});
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      double sq = 0.0;
      for (int m = 0; m < a.n_mels; ++m) {
        const double d = a.data.at({m, i}) - b.data.at({m, j});
        sq += d * d;
      }
      cost.at({i, j}) = std::sqrt(sq);
    }
  }
  return dtw_from_costs(cost);
}

std::vector<std::pair<int, int>> frame_pairs_from_path(const WarpPath& path, double fps_a,
                                                       double fps_b, double audio_hop_sec) {
  if (!(fps_a > 0.0) || !(fps_b > 0.0)) throw ArgumentError("frame rates must be positive");
  if (!(audio_hop_sec > 0.0)) throw ArgumentError("audio hop must be positive");

  std::map<int, std::pair<double, int>> best;  // frame_a -> (cost, frame_b)
  for (std::size_t p = 0; p < path.points.size(); ++p) {
    const auto& [ia, ib] = path.points[p];
    const int frame_a = static_cast<int>(std::lround(ia * audio_hop_sec * fps_a));
    const int frame_b = static_cast<int>(std::lround(ib * audio_hop_sec * fps_b));
    const double c = p < path.point_costs.size() ? path.point_costs[p] : 0.0;
    auto it = best.find(frame_a);
    if (it == best.end() || c < it->second.first) {
      best[frame_a] = {c, frame_b};
    }
  }
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(best.size());
  for (const auto& [fa, cb] : best) pairs.emplace_back(fa, cb.second);
  return pairs;
}

void save_manifest(const PairManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path);
  for (const PairManifestEntry& e : manifest) {
    nlohmann::ordered_json j;
    j["speaker"] = e.speaker;
    j["utterance"] = e.utterance;
    j["emotion_a"] = e.emotion_a;
    j["emotion_b"] = e.emotion_b;
    j["frame_a"] = e.frame_a;
    j["frame_b"] = e.frame_b;
    j["cost"] = e.cost;
    out << j.dump() << "\n";
  }
}

PairManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest: " + path);
  PairManifest manifest;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IoError("malformed manifest line", "corpus_format");
    PairManifestEntry e;
    e.speaker = j.at("speaker").get<std::string>();
    e.utterance = j.at("utterance").get<std::string>();
    e.emotion_a = j.at("emotion_a").get<std::string>();
    e.emotion_b = j.at("emotion_b").get<std::string>();
    e.frame_a = j.at("frame_a").get<int>();
    e.frame_b = j.at("frame_b").get<int>();
    e.cost = j.at("cost").get<double>();
    manifest.push_back(std::move(e));
  }
  return manifest;
}

}  // namespace stccl
