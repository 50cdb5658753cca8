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

#include <json.hpp>

#include "stccl/backbone.hpp"
#include "stccl/corpus.hpp"
#include "stccl/demo.hpp"
#include "stccl/integration.hpp"
#include "stccl/metric.hpp"

namespace stccl {

struct IntegrationConfig {
  int gate_threshold = 500;
  int total_steps = 1000;
  std::string schedule = "cosine";  // or "linear"
  void validate() const;
};

// Whole-pipeline configuration, sectioned {corpus, backbone, metric, caas,
// integration, experiment}. Parsing is strict: unknown keys anywhere, or
// out-of-range values, fail before any work starts.
struct RunConfig {
  CorpusSpec corpus;
  BackboneSpec backbone;
  MetricTrainConfig metric;
  IntegrationConfig integration;
  ExperimentConfig experiment;

  // Desk-scale defaults (the paper-scale profile swaps the training recipe
  // to 224x224 input, batch 16, lr 1e-4, 50 epochs).
  static RunConfig desk();
  static RunConfig paper();

  static RunConfig from_json(const nlohmann::json& j, RunConfig base = desk());
  static RunConfig load(const std::string& path, RunConfig base = desk());
  nlohmann::ordered_json to_json() const;
  void validate() const;
};

}  // namespace stccl
