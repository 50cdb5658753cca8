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

#include "stccl/container.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "stccl/errors.hpp"

namespace stccl {

namespace {

constexpr char kMagic[5] = {'S', 'T', 'C', 'C', '1'};

void append_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

template <typename T>
void append_le(std::string& buf, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

}  // namespace

void TensorContainer::set(const std::string& name, Tensor t, Dtype dtype) {
  if (name.empty()) throw ArgumentError("tensor name must be non-empty");
  tensors[name] = std::move(t);
  dtypes[name] = dtype;
}

const Tensor& TensorContainer::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ArgumentError("container has no tensor: " + name);
  return it->second;
}

void TensorContainer::save(const std::string& path) const {
  nlohmann::ordered_json header;
  nlohmann::ordered_json tensor_table = nlohmann::ordered_json::object();
  std::string payload;
  for (const auto& [name, tensor] : tensors) {
    auto dt = dtypes.count(name) ? dtypes.at(name) : Dtype::kF64;
    nlohmann::ordered_json entry;
    entry["dtype"] = dt == Dtype::kF32 ? "f32" : "f64";
    entry["shape"] = tensor.shape();
    entry["byte_offset"] = payload.size();
    tensor_table[name] = entry;
    if (dt == Dtype::kF32) {
      for (std::int64_t i = 0; i < tensor.numel(); ++i) {
        append_le(payload, static_cast<float>(tensor[i]));
      }
    } else {
      for (std::int64_t i = 0; i < tensor.numel(); ++i) append_le(payload, tensor[i]);
    }
  }
  header["tensors"] = tensor_table;
  header["meta"] = meta;
  const std::string header_text = header.dump();

  std::string buf;
  buf.append(kMagic, sizeof kMagic);
  append_u64(buf, header_text.size());
  buf += header_text;
  buf += payload;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write container: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short container write: " + path);
}

TensorContainer TensorContainer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read container: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof kMagic + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError("not an STCC1 container: " + path, "corpus_format");
  }
  const std::uint64_t header_len = read_u64(buf.data() + sizeof kMagic);
  const std::size_t header_start = sizeof kMagic + 8;
  if (header_start + header_len > buf.size()) throw IoError("truncated container header");
  nlohmann::ordered_json header =
      nlohmann::ordered_json::parse(buf.substr(header_start, header_len), nullptr, false);
  if (header.is_discarded()) throw IoError("malformed container header");

  const std::size_t payload_start = header_start + header_len;
  const std::size_t payload_size = buf.size() - payload_start;

  TensorContainer container;
  if (header.contains("meta")) container.meta = header.at("meta");
  std::uint64_t expected_offset = 0;
  for (const auto& [name, entry] : header.at("tensors").items()) {
    const std::string dtype = entry.at("dtype").get<std::string>();
    if (dtype != "f32" && dtype != "f64") throw IoError("unknown dtype in container: " + dtype);
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    const std::uint64_t offset = entry.at("byte_offset").get<std::uint64_t>();
    const std::int64_t count = shape_numel(shape);
    const std::size_t width = dtype == "f32" ? 4 : 8;
    // Name-sorted offsets must tile the payload without overlap.
    if (offset != expected_offset) throw IoError("container offsets overlap or leave gaps");
    expected_offset = offset + static_cast<std::uint64_t>(count) * width;
    if (expected_offset > payload_size) throw IoError("container tensor out of bounds");

    Tensor t(shape);
    const char* src = buf.data() + payload_start + offset;
    if (dtype == "f32") {
      for (std::int64_t i = 0; i < count; ++i) {
        float v;
        std::memcpy(&v, src + i * 4, 4);
        t[i] = static_cast<double>(v);
      }
      container.dtypes[name] = Dtype::kF32;
    } else {
      for (std::int64_t i = 0; i < count; ++i) {
        double v;
        std::memcpy(&v, src + i * 8, 8);
        t[i] = v;
      }
      container.dtypes[name] = Dtype::kF64;
    }
    container.tensors[name] = std::move(t);
  }
  if (expected_offset != payload_size) throw IoError("container payload size mismatch");
  return container;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read: " + path);
  std::uint64_t hash = 1469598103934665603ULL;
  char chunk[4096];
  while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(chunk[i]);
      hash *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace stccl
