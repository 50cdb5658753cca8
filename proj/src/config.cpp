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

#include "stccl/config.hpp"

#include <fstream>
#include <set>

#include "stccl/errors.hpp"

namespace stccl {

void IntegrationConfig::validate() const {
  GateConfig gate{gate_threshold, total_steps};
  gate.validate();
  if (schedule != "cosine" && schedule != "linear") {
    throw ConfigError("integration.schedule must be cosine or linear");
  }
}

RunConfig RunConfig::desk() {
  RunConfig cfg;
  cfg.corpus.image_size = 80;
  cfg.backbone.input_h = 80;
  cfg.backbone.input_w = 80;
  cfg.metric.epochs = 10;
  cfg.metric.batch_size = 8;
  cfg.metric.learning_rate = 1e-4;
  cfg.metric.n_anchors = 3;
  cfg.metric.temporal_locations = 3;
  cfg.metric.temporal_window = 8;
  return cfg;
}

RunConfig RunConfig::paper() {
  RunConfig cfg = desk();
  cfg.corpus.image_size = 224;
  // 224 is not divisible by 8-blocks of the demo nor needed there; the
  // paper profile concerns metric training scale.
  cfg.backbone.input_h = 224;
  cfg.backbone.input_w = 224;
  cfg.metric.epochs = 50;
  cfg.metric.batch_size = 16;
  cfg.metric.learning_rate = 1e-4;
  return cfg;
}

namespace {

class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  ~StrictObject() = default;

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key " + path_ + "." + key);
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Mechanism parse_mechanism(const std::string& name) {
  if (name == "vd") return Mechanism::kVisualDisparity;
  if (name == "cm") return Mechanism::kCorrelationMatrix;
  throw ConfigError("metric.mechanism must be vd or cm");
}

CmMode parse_cm_mode(const std::string& name) {
  if (name == "window") return CmMode::kWindow;
  if (name == "literal") return CmMode::kLiteral;
  throw ConfigError("metric.cm_mode must be window or literal");
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, RunConfig base) {
  RunConfig cfg = std::move(base);
  StrictObject root(j, "config");

  nlohmann::json section;
  root.read("corpus", section);
  if (!section.is_null()) {
    StrictObject o(section, "corpus");
    o.read("speakers", cfg.corpus.n_speakers);
    o.read("utterances", cfg.corpus.n_utterances);
    o.read("frames", cfg.corpus.frames_per_utterance);
    bool size_given = section.contains("image_size");
    o.read("image_size", cfg.corpus.image_size);
    o.read("fps", cfg.corpus.fps);
    o.read("head_jitter_px", cfg.corpus.head_jitter_px);
    o.read("time_warp", cfg.corpus.time_warp);
    o.read("seed", cfg.corpus.seed);
    o.finish();
    if (size_given) {
      cfg.backbone.input_h = cfg.corpus.image_size;
      cfg.backbone.input_w = cfg.corpus.image_size;
    }
  }

  section = nlohmann::json();
  root.read("backbone", section);
  if (!section.is_null()) {
    StrictObject o(section, "backbone");
    o.read("channels", cfg.backbone.stage_channels);
    o.read("stride", cfg.backbone.stage_stride);
    o.read("kernel", cfg.backbone.kernel);
    o.read("in_channels", cfg.backbone.in_channels);
    std::vector<int> input{cfg.backbone.input_h, cfg.backbone.input_w};
    o.read("input", input);
    if (input.size() != 2) throw ConfigError("backbone.input must be [h, w]");
    cfg.backbone.input_h = input[0];
    cfg.backbone.input_w = input[1];
    o.read("trainable", cfg.backbone.trainable);
    o.finish();
  }

  section = nlohmann::json();
  root.read("metric", section);
  if (!section.is_null()) {
    StrictObject o(section, "metric");
    std::string mechanism = to_string(cfg.metric.mechanism);
    std::string cm_mode = cfg.metric.correlation.cm_mode == CmMode::kWindow ? "window" : "literal";
    o.read("mechanism", mechanism);
    o.read("cm_mode", cm_mode);
    cfg.metric.mechanism = parse_mechanism(mechanism);
    cfg.metric.correlation.cm_mode = parse_cm_mode(cm_mode);
    o.read("window", cfg.metric.correlation.window);
    o.read("temperature", cfg.metric.contrastive.temperature);
    o.read("negatives", cfg.metric.contrastive.negatives);
    o.read("normalize", cfg.metric.contrastive.normalize_embeddings);
    o.read("hidden", cfg.metric.head.hidden);
    o.read("output", cfg.metric.head.output);
    o.read("epochs", cfg.metric.epochs);
    o.read("batch", cfg.metric.batch_size);
    o.read("learning_rate", cfg.metric.learning_rate);
    o.read("n_anchors", cfg.metric.n_anchors);
    o.read("temporal_locations", cfg.metric.temporal_locations);
    o.read("temporal_window", cfg.metric.temporal_window);
    o.read("train_backbone", cfg.metric.train_backbone);
    o.read("seed", cfg.metric.seed);
    o.finish();
  }

  section = nlohmann::json();
  root.read("caas", section);
  if (!section.is_null()) {
    StrictObject o(section, "caas");
    o.read("lambda", cfg.metric.caas.lambda);
    o.read("r", cfg.metric.caas.r);
    o.read("enabled", cfg.metric.caas.enabled);
    o.finish();
  }

  section = nlohmann::json();
  root.read("integration", section);
  if (!section.is_null()) {
    StrictObject o(section, "integration");
    o.read("gate_threshold", cfg.integration.gate_threshold);
    o.read("total_steps", cfg.integration.total_steps);
    o.read("schedule", cfg.integration.schedule);
    o.finish();
  }

  section = nlohmann::json();
  root.read("experiment", section);
  if (!section.is_null()) {
    StrictObject o(section, "experiment");
    std::string variant = to_string(cfg.experiment.variant);
    o.read("variant", variant);
    cfg.experiment.variant = parse_variant(variant);
    o.read("seeds", cfg.experiment.seeds);
    o.read("epochs", cfg.experiment.epochs);
    o.read("window", cfg.experiment.window);
    o.read("windows_per_item", cfg.experiment.windows_per_item);
    o.read("batch", cfg.experiment.batch_size);
    o.read("learning_rate", cfg.experiment.learning_rate);
    o.read("lambda_stccl", cfg.experiment.lambda_stccl);
    o.read("style_weight", cfg.experiment.style_weight);
    o.read("identity_weight", cfg.experiment.identity_weight);
    o.read("train_fraction", cfg.experiment.train_fraction);
    o.read("split_seed", cfg.experiment.split_seed);
    o.read("n_anchors", cfg.experiment.n_anchors);
    o.read("temporal_locations", cfg.experiment.temporal_locations);
    o.finish();
  }
  root.finish();

  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("malformed config JSON: " + path);
  return from_json(j, std::move(base));
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["corpus"] = {{"speakers", corpus.n_speakers},
                 {"utterances", corpus.n_utterances},
                 {"frames", corpus.frames_per_utterance},
                 {"image_size", corpus.image_size},
                 {"fps", corpus.fps},
                 {"head_jitter_px", corpus.head_jitter_px},
                 {"time_warp", corpus.time_warp},
                 {"seed", corpus.seed}};
  j["backbone"] = {{"channels", backbone.stage_channels},
                   {"stride", backbone.stage_stride},
                   {"kernel", backbone.kernel},
                   {"in_channels", backbone.in_channels},
                   {"input", {backbone.input_h, backbone.input_w}},
                   {"trainable", backbone.trainable}};
  j["metric"] = {{"mechanism", to_string(metric.mechanism)},
                 {"cm_mode", metric.correlation.cm_mode == CmMode::kWindow ? "window" : "literal"},
                 {"window", metric.correlation.window},
                 {"temperature", metric.contrastive.temperature},
                 {"negatives", metric.contrastive.negatives},
                 {"normalize", metric.contrastive.normalize_embeddings},
                 {"hidden", metric.head.hidden},
                 {"output", metric.head.output},
                 {"epochs", metric.epochs},
                 {"batch", metric.batch_size},
                 {"learning_rate", metric.learning_rate},
                 {"n_anchors", metric.n_anchors},
                 {"temporal_locations", metric.temporal_locations},
                 {"temporal_window", metric.temporal_window},
                 {"train_backbone", metric.train_backbone},
                 {"seed", metric.seed}};
  j["caas"] = {{"lambda", metric.caas.lambda}, {"r", metric.caas.r}, {"enabled", metric.caas.enabled}};
  j["integration"] = {{"gate_threshold", integration.gate_threshold},
                      {"total_steps", integration.total_steps},
                      {"schedule", integration.schedule}};
  j["experiment"] = {{"variant", to_string(experiment.variant)},
                     {"seeds", experiment.seeds},
                     {"epochs", experiment.epochs},
                     {"window", experiment.window},
                     {"windows_per_item", experiment.windows_per_item},
                     {"batch", experiment.batch_size},
                     {"learning_rate", experiment.learning_rate},
                     {"lambda_stccl", experiment.lambda_stccl},
                     {"style_weight", experiment.style_weight},
                     {"identity_weight", experiment.identity_weight},
                     {"train_fraction", experiment.train_fraction},
                     {"split_seed", experiment.split_seed},
                     {"n_anchors", experiment.n_anchors},
                     {"temporal_locations", experiment.temporal_locations}};
  return j;
}

void RunConfig::validate() const {
  corpus.validate();
  backbone.validate();
  metric.validate();
  integration.validate();
  experiment.validate();
}

}  // namespace stccl
