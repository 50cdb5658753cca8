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

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stccl/checkpoint_io.hpp"
#include "stccl/config.hpp"
#include "stccl/container.hpp"
#include "stccl/errors.hpp"
#include "stccl/rng.hpp"

using namespace stccl;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("container write-read-write is byte identical") {
  TempDir dir("stccl_container");
  Rng rng(1);
  TensorContainer c;
  Tensor a({3, 4});
  for (std::int64_t i = 0; i < a.numel(); ++i) a[i] = rng.normal();
  Tensor b({7});
  for (std::int64_t i = 0; i < b.numel(); ++i) b[i] = rng.uniform(-2.0, 2.0);
  c.set("weights/a", a);
  c.set("bias/b", b, Dtype::kF32);
  c.meta["kind"] = "test";
  c.meta["nested"] = {{"x", 1}, {"y", 2.5}};

  const std::string p1 = (dir.path / "one.stcc").string();
  const std::string p2 = (dir.path / "two.stcc").string();
  c.save(p1);
  TensorContainer loaded = TensorContainer::load(p1);
  loaded.save(p2);
  CHECK(read_file(p1) == read_file(p2));

  // f64 exact, f32 through float precision
  const Tensor& ra = loaded.get("weights/a");
  for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(ra[i] == a[i]);
  const Tensor& rb = loaded.get("bias/b");
  for (std::int64_t i = 0; i < b.numel(); ++i) {
    CHECK(rb[i] == static_cast<double>(static_cast<float>(b[i])));
  }
  CHECK(loaded.meta.at("kind") == "test");
  CHECK_THROWS_AS(loaded.get("missing"), ArgumentError);

  // magic check
  std::ofstream bad((dir.path / "bad.stcc").string(), std::ios::binary);
  bad << "NOTSTCC1 garbage";
  bad.close();
  CHECK_THROWS_AS(TensorContainer::load((dir.path / "bad.stcc").string()), IoError);
}

TEST_CASE("checkpoint io round trip preserves everything") {
  TempDir dir("stccl_ckpt");
  BackboneSpec spec;
  spec.stage_channels = {2, 3, 4, 5};
  spec.stage_stride = 1;
  spec.input_h = spec.input_w = 8;
  HeadConfig head;
  head.hidden = 8;
  head.output = 6;
  CorrelationOptions copts;
  copts.cm_mode = CmMode::kWindow;
  MetricCheckpoint ckpt = make_untrained_checkpoint(spec, Mechanism::kCorrelationMatrix, copts,
                                                    ContrastiveConfig{}, CAASConfig{}, head, 11);
  ckpt.meta.epochs = 7;
  ckpt.meta.corpus_fingerprint = "feedfacecafebeef";

  const std::string path = (dir.path / "metric.stcc").string();
  save_checkpoint(ckpt, path);
  MetricCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.mechanism == Mechanism::kCorrelationMatrix);
  CHECK(loaded.correlation.cm_mode == CmMode::kWindow);
  CHECK(loaded.meta.epochs == 7);
  CHECK(loaded.meta.corpus_fingerprint == "feedfacecafebeef");
  CHECK(loaded.contrastive.temperature == 0.07);
  for (std::size_t s = 0; s < ckpt.backbone.weights.size(); ++s) {
    for (std::int64_t i = 0; i < ckpt.backbone.weights[s].numel(); ++i) {
      CHECK(loaded.backbone.weights[s][i] == ckpt.backbone.weights[s][i]);
    }
  }
  for (int d = 0; d < 2; ++d) {
    for (std::size_t l = 0; l < 4; ++l) {
      for (std::int64_t i = 0; i < ckpt.heads[d][l].w2.numel(); ++i) {
        CHECK(loaded.heads[d][l].w2[i] == ckpt.heads[d][l].w2[i]);
      }
    }
  }

  // identical save -> identical hash
  const std::string path2 = (dir.path / "metric2.stcc").string();
  save_checkpoint(loaded, path2);
  CHECK(file_hash_hex(path) == file_hash_hex(path2));
}

TEST_CASE("run config defaults validate and round trip") {
  RunConfig cfg = RunConfig::desk();
  cfg.validate();
  CHECK(cfg.corpus.image_size == 80);
  CHECK(cfg.metric.contrastive.temperature == 0.07);
  CHECK(cfg.metric.caas.lambda == 2.0);

  RunConfig paper = RunConfig::paper();
  CHECK(paper.metric.epochs == 50);
  CHECK(paper.metric.batch_size == 16);
  CHECK(paper.backbone.input_h == 224);

  nlohmann::ordered_json j = cfg.to_json();
  RunConfig back = RunConfig::from_json(j);
  CHECK(back.corpus.n_speakers == cfg.corpus.n_speakers);
  CHECK(back.metric.learning_rate == cfg.metric.learning_rate);
  CHECK(back.experiment.lambda_stccl == cfg.experiment.lambda_stccl);
}

TEST_CASE("config rejects unknown keys and bad values before any work") {
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"corpus": {"speekers": 4}})")),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"unknown_section": {}})")),
                  ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_json(nlohmann::json::parse(R"({"metric": {"temperature": "hot"}})")),
      ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_json(nlohmann::json::parse(R"({"metric": {"temperature": -1.0}})")),
      ArgumentError);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"corpus": {"frames": 2}})")),
                  ArgumentError);
  CHECK_THROWS_AS(
      RunConfig::from_json(nlohmann::json::parse(R"({"experiment": {"variant": "bogus"}})")),
      ArgumentError);
  // valid override passes
  RunConfig ok = RunConfig::from_json(
      nlohmann::json::parse(R"({"metric": {"mechanism": "cm", "epochs": 3}, "caas": {"enabled": false}})"));
  CHECK(ok.metric.mechanism == Mechanism::kCorrelationMatrix);
  CHECK(ok.metric.epochs == 3);
  CHECK_FALSE(ok.metric.caas.enabled);
}
