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

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "stccl/tensor.hpp"

namespace stccl {

// Named-tensor file: magic "STCC1", u64 LE header length, JSON header
// {"tensors": {name: {dtype, shape, byte_offset}}, "meta": {...}}, then a
// little-endian contiguous payload. Offsets are payload-relative.
enum class Dtype { kF32, kF64 };

struct TensorContainer {
  std::map<std::string, Tensor> tensors;  // name-sorted by construction
  std::map<std::string, Dtype> dtypes;    // absent -> f64
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();

  void set(const std::string& name, Tensor t, Dtype dtype = Dtype::kF64);
  const Tensor& get(const std::string& name) const;

  void save(const std::string& path) const;
  static TensorContainer load(const std::string& path);
};

// FNV-1a 64 of a file's bytes, as hex. Fingerprint, not cryptography.
std::string file_hash_hex(const std::string& path);

}  // namespace stccl
