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

#include "stccl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "stccl/errors.hpp"
#include "stccl/image_io.hpp"
#include "stccl/rng.hpp"
#include "stccl/wav_io.hpp"

namespace stccl {

namespace fs = std::filesystem;

EmotionStyle emotion_style(const std::string& name) {
  EmotionStyle s;
  s.name = name;
  if (name == "neutral") return s;
  if (name == "happy") {
    s.brow_offset_px = -3.0;
    s.brow_angle_deg = -16.0;
    s.eye_openness = 0.7;
    s.tint = {0.10, 0.03, -0.04};
    s.mouth_width_scale = 1.1;
    return s;
  }
  if (name == "angry") {
    s.brow_offset_px = 3.5;
    s.brow_angle_deg = 18.0;
    s.eye_openness = 0.55;
    s.tint = {0.06, -0.05, -0.05};
    s.mouth_width_scale = 0.9;
    return s;
  }
  throw ArgumentError("unknown emotion: " + name);
}

const std::vector<std::string>& corpus_emotions() {
  static const std::vector<std::string> kEmotions{"neutral", "happy", "angry"};
  return kEmotions;
}

void CorpusSpec::validate() const {
  if (n_speakers < 1 || n_utterances < 1) throw ArgumentError("corpus needs speakers and utterances");
  if (frames_per_utterance < 8) throw ArgumentError("corpus needs T >= 8");
  if (image_size < 32) throw ArgumentError("corpus image size must be >= 32");
  if (!(fps > 0.0)) throw ArgumentError("fps must be positive");
  if (head_jitter_px < 0.0 || head_jitter_px > 3.0) {
    throw ArgumentError("head jitter must be in [0, 3] px");
  }
}

std::vector<double> speech_trajectory(std::uint64_t seed, int speaker, int utterance, int frames,
                                      double fps) {
  Rng rng(Rng::mix(seed, 0x74726a00ULL + static_cast<std::uint64_t>(speaker) * 1009 +
                             static_cast<std::uint64_t>(utterance)));
  const double f1 = rng.uniform(1.5, 3.5);
  const double f2 = rng.uniform(4.0, 7.0);
  const double p1 = rng.uniform(0.0, 2.0 * M_PI);
  const double p2 = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<double> a(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    const double sec = t / fps;
    a[static_cast<std::size_t>(t)] = 0.5 + 0.3 * std::sin(2.0 * M_PI * f1 * sec + p1) +
                                     0.2 * std::sin(2.0 * M_PI * f2 * sec + p2);
  }
  return a;
}

std::vector<double> time_warp_map(std::uint64_t seed, int speaker, int utterance, int frames) {
  Rng rng(Rng::mix(seed, 0x77617270ULL + static_cast<std::uint64_t>(speaker) * 1009 +
                             static_cast<std::uint64_t>(utterance)));
  std::vector<double> increments(static_cast<std::size_t>(frames) - 1);
  double total = 0.0;
  for (double& g : increments) {
    g = 0.4 + rng.uniform();  // in [0.4, 1.4): strictly monotone, bounded slope
    total += g;
  }
  std::vector<double> u(static_cast<std::size_t>(frames), 0.0);
  double acc = 0.0;
  for (int t = 1; t < frames; ++t) {
    acc += increments[static_cast<std::size_t>(t - 1)];
    u[static_cast<std::size_t>(t)] = acc / total * (frames - 1);
  }
  return u;
}

std::vector<double> resample_trajectory(const std::vector<double>& trajectory,
                                        const std::vector<double>& positions) {
  const int n = static_cast<int>(trajectory.size());
  if (n < 2) throw ArgumentError("resample needs at least 2 samples");
  std::vector<double> out;
  out.reserve(positions.size());
  for (double p : positions) {
    const double clamped = std::clamp(p, 0.0, static_cast<double>(n - 1));
    const int i0 = static_cast<int>(std::floor(clamped));
    const int i1 = std::min(i0 + 1, n - 1);
    const double f = clamped - i0;
    out.push_back((1.0 - f) * trajectory[static_cast<std::size_t>(i0)] +
                  f * trajectory[static_cast<std::size_t>(i1)]);
  }
  return out;
}

AffineTransform head_jitter(std::uint64_t seed, int speaker, const std::string& emotion,
                            int utterance, int frame, double max_px, int image_size) {
  std::uint64_t salt = 0x6a697400ULL + static_cast<std::uint64_t>(speaker) * 131071 +
                       static_cast<std::uint64_t>(utterance) * 8191 +
                       static_cast<std::uint64_t>(frame);
  for (char c : emotion) salt = salt * 31 + static_cast<std::uint64_t>(c);
  Rng rng(Rng::mix(seed, salt));
  const double dx = rng.uniform(-max_px, max_px);
  const double dy = rng.uniform(-max_px, max_px);
  const double angle = rng.uniform(-1.0, 1.0) * (max_px / 3.0) * (M_PI / 150.0);
  const double c = image_size / 2.0;
  return AffineTransform::translation(dx, dy).compose(
      AffineTransform::rotation_scale(angle, 1.0, c, c));
}

namespace {

struct FaceGeometry {
  double face_cx, face_cy, face_rx, face_ry;
  double eye_y, eye_dx, eye_rx, eye_ry;
  double brow_y, brow_len, brow_thick;
  double nose_x, nose_y, nose_r;
  double mouth_cx, mouth_cy, mouth_rx_base, mouth_ry_max;
  std::array<double, 3> skin;
};

FaceGeometry face_geometry(int speaker, int image_size) {
  const double s = static_cast<double>(image_size);
  auto unit = [&](std::uint64_t salt) {
    return 2.0 * (static_cast<double>(Rng::mix(0x66616365ULL, static_cast<std::uint64_t>(speaker) * 97 + salt) >> 11) *
                  0x1.0p-53) -
           1.0;
  };
  FaceGeometry g;
  g.face_cx = 0.50 * s;
  g.face_cy = 0.52 * s;
  g.face_rx = (0.34 + 0.015 * unit(1)) * s;
  g.face_ry = (0.42 + 0.015 * unit(2)) * s;
  g.eye_y = 0.40 * s;
  g.eye_dx = (0.14 + 0.010 * unit(3)) * s;
  g.eye_rx = 0.035 * s;
  g.eye_ry = 0.030 * s;
  g.brow_y = 0.315 * s;
  g.brow_len = 0.055 * s;
  g.brow_thick = 0.012 * s;
  g.nose_x = 0.50 * s;
  g.nose_y = 0.55 * s;
  g.nose_r = 0.022 * s;
  g.mouth_cx = 0.50 * s;
  g.mouth_cy = 0.68 * s;
  g.mouth_rx_base = 0.11 * s;
  g.mouth_ry_max = 0.075 * s;
  g.skin = {0.85 + 0.02 * unit(4), 0.70 + 0.02 * unit(5), 0.58 + 0.02 * unit(6)};
  return g;
}

bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  if (rx <= 0.0 || ry <= 0.0) return false;
  const double dx = (x - cx) / rx;
  const double dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

bool in_bar(double x, double y, double cx, double cy, double half_len, double half_thick,
            double angle_rad) {
  const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
  const double u = ca * (x - cx) + sa * (y - cy);
  const double v = -sa * (x - cx) + ca * (y - cy);
  return std::fabs(u) <= half_len && std::fabs(v) <= half_thick;
}

}  // namespace

Tensor render_frame(int speaker, const EmotionStyle& style, double a_t,
                    const AffineTransform& jitter, int image_size) {
  if (a_t < 0.0 || a_t > 1.0) throw ArgumentError("trajectory value must be in [0,1]");
  const FaceGeometry g = face_geometry(speaker, image_size);
  const double px_scale = image_size / 80.0;
  const AffineTransform inv = jitter.inverse();

  const std::array<double, 3> background{0.12, 0.13, 0.16};
  const std::array<double, 3> eye_color{0.10, 0.08, 0.12};
  const std::array<double, 3> brow_color{0.25, 0.15, 0.10};
  const std::array<double, 3> mouth_color{0.08, 0.02, 0.03};
  const std::array<double, 3> nose_color{g.skin[0] - 0.10, g.skin[1] - 0.10, g.skin[2] - 0.08};

  const double brow_dy = style.brow_offset_px * px_scale;
  const double brow_angle = style.brow_angle_deg * M_PI / 180.0;
  const double mouth_rx = g.mouth_rx_base * style.mouth_width_scale;
  const double mouth_ry = g.mouth_ry_max * a_t;
  const double eye_ry = g.eye_ry * std::max(style.eye_openness, 0.15);

  // Emotion-keyed static shading over the skin: expressions change local
  // appearance across much of the face while the articulation dynamics
  // stay tied to a(t). Never applied near the mouth, so the mouth-area
  // measure only sees the trajectory.
  const int emotion_kind = style.name == "happy" ? 1 : style.name == "angry" ? 2 : 0;
  const double sx = px_scale;
  auto skin_shade = [&](double x, double y) {
    const double mdx = x - g.mouth_cx, mdy = y - g.mouth_cy;
    if (mdx * mdx + mdy * mdy < (20.0 * sx) * (20.0 * sx)) return 0.0;
    if (emotion_kind == 1) {
      return 0.10 * std::sin(2.0 * M_PI * x / (26.0 * sx) + 1.3) *
             std::sin(2.0 * M_PI * y / (22.0 * sx) + 0.4);
    }
    if (emotion_kind == 2) {
      return 0.10 * std::sin(2.0 * M_PI * (x + y) / (19.0 * sx) + 2.1);
    }
    return 0.0;
  };

  // Priority compositing of hard shapes, antialiased by a fixed 3x3
  // subpixel grid; keeps edges isotropic so the mouth-area measure stays
  // insensitive to tint shifts.
  std::array<double, 3> shaded_skin;
  auto sample = [&](double x, double y) -> const std::array<double, 3>& {
    if (mouth_ry > 0.0 && in_ellipse(x, y, g.mouth_cx, g.mouth_cy, mouth_rx, mouth_ry)) {
      return mouth_color;
    }
    for (int side = -1; side <= 1; side += 2) {
      const double ex = g.face_cx + side * g.eye_dx;
      if (in_bar(x, y, ex, g.brow_y + brow_dy, g.brow_len, g.brow_thick, side * brow_angle)) {
        return brow_color;
      }
      if (in_ellipse(x, y, ex, g.eye_y, g.eye_rx, eye_ry)) return eye_color;
    }
    if (in_ellipse(x, y, g.nose_x, g.nose_y, g.nose_r, g.nose_r * 1.4)) return nose_color;
    if (in_ellipse(x, y, g.face_cx, g.face_cy, g.face_rx, g.face_ry)) {
      const double shade = skin_shade(x, y);
      if (shade == 0.0) return g.skin;
      for (int ch = 0; ch < 3; ++ch) {
        shaded_skin[static_cast<std::size_t>(ch)] = g.skin[static_cast<std::size_t>(ch)] + shade;
      }
      return shaded_skin;
    }
    return background;
  };

  Tensor frame({3, image_size, image_size});
  for (int r = 0; r < image_size; ++r) {
    for (int c = 0; c < image_size; ++c) {
      std::array<double, 3> color{0.0, 0.0, 0.0};
      for (int sr = 0; sr < 3; ++sr) {
        for (int sc = 0; sc < 3; ++sc) {
          const auto [x, y] = inv.apply(c + (sc - 1) / 3.0, r + (sr - 1) / 3.0);
          const auto& s = sample(x, y);
          for (int ch = 0; ch < 3; ++ch) color[static_cast<std::size_t>(ch)] += s[static_cast<std::size_t>(ch)];
        }
      }
      for (int ch = 0; ch < 3; ++ch) {
        frame.at({ch, r, c}) = std::clamp(
            color[static_cast<std::size_t>(ch)] / 9.0 + style.tint[static_cast<std::size_t>(ch)],
            0.0, 1.0);
      }
    }
  }
  return frame;
}

LandmarkSet frame_landmarks(int speaker, const AffineTransform& jitter, int image_size) {
  const FaceGeometry g = face_geometry(speaker, image_size);
  const double eye_w = 0.05 * image_size;
  std::vector<std::array<double, 2>> canonical{
      {g.face_cx - g.eye_dx - eye_w, g.eye_y}, {g.face_cx - g.eye_dx + eye_w, g.eye_y},
      {g.face_cx + g.eye_dx - eye_w, g.eye_y}, {g.face_cx + g.eye_dx + eye_w, g.eye_y},
      {g.nose_x, g.nose_y},
      {g.mouth_cx - g.mouth_rx_base, g.mouth_cy},
      {g.mouth_cx + g.mouth_rx_base, g.mouth_cy},
      {g.face_cx, g.face_cy + 0.98 * g.face_ry},
      {g.face_cx, g.brow_y}};
  LandmarkSet set;
  set.schema = LandmarkSchema::kSynthetic9;
  for (const auto& p : canonical) {
    const auto q = jitter.apply(p[0], p[1]);
    set.points.push_back({q[0], q[1]});
  }
  set.validate(image_size, image_size);
  return set;
}

MouthRoi mouth_roi(int image_size) {
  const FaceGeometry g = face_geometry(0, image_size);
  const int margin = std::max(3, image_size / 20);
  const int half_w = static_cast<int>(std::lround(g.mouth_rx_base * 1.2)) + margin;
  const int half_h = static_cast<int>(std::lround(g.mouth_ry_max)) + margin;
  const int cy = static_cast<int>(std::lround(g.mouth_cy));
  const int cx = static_cast<int>(std::lround(g.mouth_cx));
  MouthRoi roi;
  roi.r0 = std::max(0, cy - half_h);
  roi.r1 = std::min(image_size, cy + half_h + 1);
  roi.c0 = std::max(0, cx - half_w);
  roi.c1 = std::min(image_size, cx + half_w + 1);
  return roi;
}

Tensor mouth_roi_mask(int image_size) {
  const MouthRoi roi = mouth_roi(image_size);
  Tensor mask({1, image_size, image_size}, 0.0);
  for (int r = roi.r0; r < roi.r1; ++r) {
    for (int c = roi.c0; c < roi.c1; ++c) mask.at({0, r, c}) = 1.0;
  }
  return mask;
}

double measure_mouth_openness(const Tensor& frame) {
  if (frame.ndim() != 3 || frame.dim(0) != 3 || frame.dim(1) != frame.dim(2)) {
    throw ArgumentError("measure_mouth_openness expects a square (3,H,W) frame");
  }
  const int size = frame.dim(1);
  const MouthRoi roi = mouth_roi(size);
  int dark = 0;
  for (int r = roi.r0; r < roi.r1; ++r) {
    for (int c = roi.c0; c < roi.c1; ++c) {
      const double lum = (frame.at({0, r, c}) + frame.at({1, r, c}) + frame.at({2, r, c})) / 3.0;
      if (lum < 0.30) ++dark;
    }
  }
  return static_cast<double>(dark) / roi.area();
}

std::vector<double> synthesize_audio(const std::vector<double>& trajectory, double fps,
                                     int sample_rate) {
  if (trajectory.empty()) throw ArgumentError("empty trajectory");
  if (!(fps > 0.0) || sample_rate < 1) throw ArgumentError("bad audio parameters");
  const int frames = static_cast<int>(trajectory.size());
  const int n = static_cast<int>(std::lround(frames / fps * sample_rate));
  std::vector<double> samples(static_cast<std::size_t>(n));
  double phase = 0.0;
  for (int i = 0; i < n; ++i) {
    const int frame = std::min(frames - 1, static_cast<int>(i / static_cast<double>(sample_rate) * fps));
    const double freq = 220.0 + 660.0 * trajectory[static_cast<std::size_t>(frame)];
    phase += 2.0 * M_PI * freq / sample_rate;
    samples[static_cast<std::size_t>(i)] = 0.35 * std::sin(phase) + 0.12 * std::sin(2.0 * phase);
  }
  return samples;
}

namespace {

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read: " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

nlohmann::ordered_json style_json(const EmotionStyle& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["brow_offset"] = s.brow_offset_px;
  j["brow_angle"] = s.brow_angle_deg;
  j["eye_openness"] = s.eye_openness;
  j["tint"] = s.tint;
  j["mouth_width_scale"] = s.mouth_width_scale;
  return j;
}

}  // namespace

std::string generate_corpus(const CorpusSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output dir: " + out_dir);
  {
    std::ofstream probe(fs::path(out_dir) / ".write_probe", std::ios::binary);
    if (!probe) throw IoError("output dir not writable: " + out_dir);
  }
  fs::remove(fs::path(out_dir) / ".write_probe", ec);

  nlohmann::ordered_json root_meta;
  root_meta["speakers"] = spec.n_speakers;
  root_meta["utterances"] = spec.n_utterances;
  root_meta["frames"] = spec.frames_per_utterance;
  root_meta["image_size"] = spec.image_size;
  root_meta["fps"] = spec.fps;
  root_meta["head_jitter_px"] = spec.head_jitter_px;
  root_meta["time_warp"] = spec.time_warp;
  root_meta["seed"] = spec.seed;
  root_meta["emotions"] = corpus_emotions();
  {
    std::ofstream out(fs::path(out_dir) / "corpus.json", std::ios::binary);
    if (!out) throw IoError("cannot write corpus.json");
    out << root_meta.dump(2) << "\n";
  }

  const int t_count = spec.frames_per_utterance;
  for (int s = 0; s < spec.n_speakers; ++s) {
    char speaker_id[8];
    std::snprintf(speaker_id, sizeof speaker_id, "s%02d", s);
    for (const std::string& emotion : corpus_emotions()) {
      const EmotionStyle style = emotion_style(emotion);
      for (int u = 0; u < spec.n_utterances; ++u) {
        char utt_id[8];
        std::snprintf(utt_id, sizeof utt_id, "u%02d", u);
        const fs::path dir = fs::path(out_dir) / speaker_id / emotion / utt_id;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create: " + dir.string());

        std::vector<double> traj = speech_trajectory(spec.seed, s, u, t_count, spec.fps);
        std::optional<std::vector<double>> warp;
        if (spec.time_warp && emotion == "angry") {
          warp = time_warp_map(spec.seed, s, u, t_count);
          traj = resample_trajectory(traj, *warp);
        }

        nlohmann::ordered_json meta;
        meta["fps"] = spec.fps;
        meta["T"] = t_count;
        meta["trajectory"] = traj;
        nlohmann::ordered_json landmarks_json = nlohmann::ordered_json::array();
        nlohmann::ordered_json jitter_json = nlohmann::ordered_json::array();

        for (int t = 0; t < t_count; ++t) {
          const AffineTransform jitter = head_jitter(spec.seed, s, emotion, u, t,
                                                     spec.head_jitter_px, spec.image_size);
          const Tensor frame =
              render_frame(s, style, traj[static_cast<std::size_t>(t)], jitter, spec.image_size);
          char name[24];
          std::snprintf(name, sizeof name, "frame_%04d.png", t);
          write_png((dir / name).string(), frame);

          const LandmarkSet lm = frame_landmarks(s, jitter, spec.image_size);
          nlohmann::ordered_json lm_json = nlohmann::ordered_json::array();
          for (const auto& p : lm.points) lm_json.push_back({p[0], p[1]});
          landmarks_json.push_back(lm_json);
          jitter_json.push_back({{jitter.m[0], jitter.m[1], jitter.m[2]},
                                 {jitter.m[3], jitter.m[4], jitter.m[5]}});
        }
        meta["landmarks"] = landmarks_json;
        meta["style"] = style_json(style);
        meta["jitter"] = jitter_json;
        if (warp) {
          meta["warp"] = *warp;
        } else {
          meta["warp"] = nullptr;
        }
        {
          std::ofstream out(dir / "meta.json", std::ios::binary);
          if (!out) throw IoError("cannot write meta.json");
          out << meta.dump() << "\n";
        }
        write_wav((dir / "audio.wav").string(), synthesize_audio(traj, spec.fps), 16000);
      }
    }
  }
  return corpus_fingerprint(out_dir);
}

std::string corpus_fingerprint(const std::string& root) {
  if (!fs::is_directory(root)) throw IoError("not a corpus directory: " + root);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::vector<std::string> rel;
  rel.reserve(files.size());
  for (const auto& p : files) rel.push_back(fs::relative(p, root).generic_string());
  std::sort(rel.begin(), rel.end());

  std::uint64_t hash = 1469598103934665603ULL;
  for (const std::string& r : rel) {
    hash = fnv1a(r, hash);
    hash = fnv1a(read_file_bytes(fs::path(root) / r), hash);
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace stccl
