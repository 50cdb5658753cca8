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

#include "stccl/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "stccl/errors.hpp"

namespace stccl {

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& buf, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  std::memcpy(&v, p, 4);
  return v;
}

std::uint16_t get_u16(const char* p) {
  std::uint16_t v = 0;
  std::memcpy(&v, p, 2);
  return v;
}

}  // namespace

void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate) {
  if (samples.empty()) throw ArgumentError("write_wav: empty audio");
  if (sample_rate < 1) throw ArgumentError("write_wav: bad sample rate");

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::string buf;
  buf.reserve(44 + data_bytes);
  buf += "RIFF";
  put_u32(buf, 36 + data_bytes);
  buf += "WAVEfmt ";
  put_u32(buf, 16);
  put_u16(buf, 1);  // PCM
  put_u16(buf, 1);  // mono
  put_u32(buf, static_cast<std::uint32_t>(sample_rate));
  put_u32(buf, static_cast<std::uint32_t>(sample_rate * 2));
  put_u16(buf, 2);
  put_u16(buf, 16);
  buf += "data";
  put_u32(buf, data_bytes);
  for (double s : samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const std::int16_t q = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    put_u16(buf, static_cast<std::uint16_t>(q));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write wav: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write: " + path);
}

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read wav: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 44 || buf.compare(0, 4, "RIFF") != 0 || buf.compare(8, 4, "WAVE") != 0) {
    throw IoError("not a RIFF/WAVE file: " + path, "corpus_format");
  }

  WavData wav;
  std::size_t pos = 12;
  bool have_fmt = false;
  while (pos + 8 <= buf.size()) {
    const std::string chunk = buf.substr(pos, 4);
    const std::uint32_t size = get_u32(buf.data() + pos + 4);
    pos += 8;
    if (pos + size > buf.size()) throw IoError("truncated wav chunk: " + path, "corpus_format");
    if (chunk == "fmt ") {
      if (size < 16) throw IoError("short fmt chunk", "corpus_format");
      const std::uint16_t format = get_u16(buf.data() + pos);
      const std::uint16_t channels = get_u16(buf.data() + pos + 2);
      const std::uint16_t bits = get_u16(buf.data() + pos + 14);
      if (format != 1 || channels != 1 || bits != 16) {
        throw IoError("wav must be mono PCM16: " + path, "corpus_format");
      }
      wav.sample_rate = static_cast<int>(get_u32(buf.data() + pos + 4));
      have_fmt = true;
    } else if (chunk == "data") {
      if (!have_fmt) throw IoError("wav data before fmt", "corpus_format");
      wav.samples.reserve(size / 2);
      for (std::uint32_t i = 0; i + 1 < size; i += 2) {
        const std::int16_t q = static_cast<std::int16_t>(get_u16(buf.data() + pos + i));
        wav.samples.push_back(q / 32767.0);
      }
      return wav;
    }
    pos += size + (size % 2);
  }
  throw IoError("wav has no data chunk: " + path, "corpus_format");
}

}  // namespace stccl
