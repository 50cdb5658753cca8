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

#include "stccl/checkpoint_io.hpp"

#include "stccl/container.hpp"
#include "stccl/errors.hpp"

namespace stccl {

namespace {

const char* domain_tag(int d) { return d == 0 ? "spatial" : "temporal"; }

}  // namespace

void save_checkpoint(const MetricCheckpoint& checkpoint, const std::string& path) {
  checkpoint.validate();
  TensorContainer container;
  for (std::size_t s = 0; s < checkpoint.backbone.weights.size(); ++s) {
    const std::string prefix = "backbone/stage" + std::to_string(s) + "/";
    container.set(prefix + "weight", checkpoint.backbone.weights[s]);
    container.set(prefix + "bias", checkpoint.backbone.biases[s]);
  }
  for (int d = 0; d < 2; ++d) {
    for (std::size_t l = 0; l < checkpoint.heads[d].size(); ++l) {
      const ProjectionHead& h = checkpoint.heads[d][l];
      const std::string prefix =
          std::string("head/") + domain_tag(d) + "/l" + std::to_string(l + 1) + "/";
      container.set(prefix + "w1", h.w1);
      container.set(prefix + "b1", h.b1);
      container.set(prefix + "w2", h.w2);
      container.set(prefix + "b2", h.b2);
    }
  }

  nlohmann::ordered_json meta;
  meta["kind"] = "stccl-metric";
  meta["mechanism"] = to_string(checkpoint.mechanism);
  meta["cm_mode"] = checkpoint.correlation.cm_mode == CmMode::kWindow ? "window" : "literal";
  meta["window"] = checkpoint.correlation.window;
  meta["contrastive"] = {{"temperature", checkpoint.contrastive.temperature},
                         {"negatives", checkpoint.contrastive.negatives},
                         {"normalize", checkpoint.contrastive.normalize_embeddings}};
  meta["caas"] = {{"lambda", checkpoint.caas.lambda},
                  {"r", checkpoint.caas.r},
                  {"enabled", checkpoint.caas.enabled}};
  meta["head"] = {{"hidden", checkpoint.head_config.hidden},
                  {"output", checkpoint.head_config.output}};
  const BackboneSpec& spec = checkpoint.backbone.spec;
  meta["backbone"] = {{"channels", spec.stage_channels}, {"stride", spec.stage_stride},
                      {"kernel", spec.kernel},           {"in_channels", spec.in_channels},
                      {"input", {spec.input_h, spec.input_w}},
                      {"trainable", spec.trainable}};
  meta["training"] = {{"epochs", checkpoint.meta.epochs},
                      {"seed", checkpoint.meta.seed},
                      {"corpus_fingerprint", checkpoint.meta.corpus_fingerprint}};
  container.meta = meta;
  container.save(path);
}

MetricCheckpoint load_checkpoint(const std::string& path) {
  TensorContainer container = TensorContainer::load(path);
  const nlohmann::ordered_json& meta = container.meta;
  if (!meta.contains("kind") || meta.at("kind") != "stccl-metric") {
    throw IoError("not a metric checkpoint: " + path, "corpus_format");
  }

  MetricCheckpoint ckpt;
  try {
    ckpt.mechanism = meta.at("mechanism").get<std::string>() == "vd"
                         ? Mechanism::kVisualDisparity
                         : Mechanism::kCorrelationMatrix;
    ckpt.correlation.cm_mode =
        meta.at("cm_mode").get<std::string>() == "window" ? CmMode::kWindow : CmMode::kLiteral;
    ckpt.correlation.window = meta.at("window").get<int>();
    ckpt.contrastive.temperature = meta.at("contrastive").at("temperature").get<double>();
    ckpt.contrastive.negatives = meta.at("contrastive").at("negatives").get<int>();
    ckpt.contrastive.normalize_embeddings = meta.at("contrastive").at("normalize").get<bool>();
    ckpt.caas.lambda = meta.at("caas").at("lambda").get<double>();
    ckpt.caas.r = meta.at("caas").at("r").get<double>();
    ckpt.caas.enabled = meta.at("caas").at("enabled").get<bool>();
    ckpt.head_config.hidden = meta.at("head").at("hidden").get<int>();
    ckpt.head_config.output = meta.at("head").at("output").get<int>();
    BackboneSpec& spec = ckpt.backbone.spec;
    spec.stage_channels = meta.at("backbone").at("channels").get<std::vector<int>>();
    spec.stage_stride = meta.at("backbone").at("stride").get<int>();
    spec.kernel = meta.at("backbone").at("kernel").get<int>();
    spec.in_channels = meta.at("backbone").at("in_channels").get<int>();
    spec.input_h = meta.at("backbone").at("input").at(0).get<int>();
    spec.input_w = meta.at("backbone").at("input").at(1).get<int>();
    spec.trainable = meta.at("backbone").at("trainable").get<bool>();
    ckpt.meta.epochs = meta.at("training").at("epochs").get<int>();
    ckpt.meta.seed = meta.at("training").at("seed").get<std::uint64_t>();
    ckpt.meta.corpus_fingerprint = meta.at("training").at("corpus_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint meta error: " + std::string(e.what()), "corpus_format");
  }

  for (std::size_t s = 0; s < ckpt.backbone.spec.stage_channels.size(); ++s) {
    const std::string prefix = "backbone/stage" + std::to_string(s) + "/";
    ckpt.backbone.weights.push_back(container.get(prefix + "weight"));
    ckpt.backbone.biases.push_back(container.get(prefix + "bias"));
  }
  for (int d = 0; d < 2; ++d) {
    for (std::size_t l = 0; l < ckpt.backbone.spec.stage_channels.size(); ++l) {
      const std::string prefix =
          std::string("head/") + domain_tag(d) + "/l" + std::to_string(l + 1) + "/";
      ProjectionHead head;
      head.w1 = container.get(prefix + "w1");
      head.b1 = container.get(prefix + "b1");
      head.w2 = container.get(prefix + "w2");
      head.b2 = container.get(prefix + "b2");
      ckpt.heads[d].push_back(std::move(head));
    }
  }
  ckpt.validate();
  return ckpt;
}

}  // namespace stccl
