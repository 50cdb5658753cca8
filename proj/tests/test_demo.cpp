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

#include <cmath>
#include <filesystem>

#include "stccl/corpus.hpp"
#include "stccl/demo.hpp"
#include "stccl/errors.hpp"

using namespace stccl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

CorpusIndex tiny_corpus(const TempDir& dir, std::uint64_t seed = 31) {
  CorpusSpec spec;
  spec.n_speakers = 1;
  spec.n_utterances = 3;
  spec.frames_per_utterance = 16;
  spec.image_size = 80;
  spec.seed = seed;
  generate_corpus(spec, dir.path.string());
  return CorpusIndex::load(dir.path.string());
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (Variant v : all_variants()) CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("nope"), ArgumentError);
}

TEST_CASE("utterance split is deterministic and never empty") {
  Split a = split_utterances(8, 0.9, 11);
  Split b = split_utterances(8, 0.9, 11);
  CHECK(a.train_utts == b.train_utts);
  CHECK(a.test_utts == b.test_utts);
  CHECK(!a.test_utts.empty());
  CHECK(!a.train_utts.empty());
  CHECK(a.train_utts.size() + a.test_utts.size() == 8);
  CHECK_THROWS_AS(split_utterances(1, 0.9, 1), ArgumentError);
}

TEST_CASE("translator forward: shape, range, determinism") {
  TranslatorConfig cfg;
  cfg.image_size = 80;
  ToyTranslator translator(cfg, 5);
  Tensor img({3, 80, 80}, 0.5);
  Tensor out = translator.translate(img, 1);
  REQUIRE(out.same_shape(img));
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out[i] > 0.0);
    CHECK(out[i] < 1.0);
  }
  Tensor out2 = translator.translate(img, 1);
  for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == out2[i]);

  // style embedding changes the output per emotion
  Tensor other = translator.translate(img, 2);
  double diff = 0.0;
  for (std::int64_t i = 0; i < out.numel(); ++i) diff += std::fabs(out[i] - other[i]);
  CHECK(diff > 0.0);
  CHECK_THROWS_AS(translator.translate(img, 9), IndexError);
}

TEST_CASE("style targets mask out mouth blocks") {
  TempDir dir("stccl_demo_targets");
  CorpusIndex corpus = tiny_corpus(dir);
  StyleTargets targets = compute_style_targets(corpus, {0, 1}, 10);
  REQUIRE(targets.per_emotion.size() == corpus.emotions().size());
  const MouthRoi roi = mouth_roi(80);
  bool saw_masked = false, saw_open = false;
  for (int br = 0; br < 8; ++br) {
    for (int bc = 0; bc < 8; ++bc) {
      const bool overlaps = br * 10 < roi.r1 && (br + 1) * 10 > roi.r0 && bc * 10 < roi.c1 &&
                            (bc + 1) * 10 > roi.c0;
      if (targets.block_mask.at({0, br, bc}) == 0.0) {
        CHECK(overlaps);
        saw_masked = true;
      } else {
        CHECK_FALSE(overlaps);
        saw_open = true;
      }
    }
  }
  CHECK(saw_masked);
  CHECK(saw_open);
}

TEST_CASE("eval_translator closed forms: identity and constant predictors") {
  TempDir dir("stccl_demo_eval");
  CorpusIndex corpus = tiny_corpus(dir);
  StyleTargets targets = compute_style_targets(corpus, {0, 1}, 10);
  const std::vector<int> test_utts{2};

  // identity: mouth trajectory error is exactly zero, style error is high
  EvalMetrics identity = eval_translator(
      [](const Tensor& img, int) { return img; }, corpus, test_utts, targets);
  CHECK(identity.mouth_traj_err == 0.0);
  CHECK(identity.style_err > 0.0);

  // constant mean emotional frame: style error drops, mouth error appears
  std::vector<Tensor> means;
  for (const std::string& emotion : corpus.emotions()) {
    Tensor mean({3, 80, 80}, 0.0);
    long long n = 0;
    for (int u : {0, 1}) {
      const std::string utt = corpus.utterances()[static_cast<std::size_t>(u)];
      for (int t = 0; t < 16; ++t) {
        Tensor f = corpus.frame("s00", emotion, utt, t);
        for (std::int64_t i = 0; i < mean.numel(); ++i) mean[i] += f[i];
        ++n;
      }
    }
    for (std::int64_t i = 0; i < mean.numel(); ++i) mean[i] /= static_cast<double>(n);
    means.push_back(std::move(mean));
  }
  EvalMetrics constant = eval_translator(
      [&](const Tensor&, int e) { return means[static_cast<std::size_t>(e)]; }, corpus, test_utts,
      targets);
  CHECK(constant.style_err < identity.style_err);
  CHECK(constant.mouth_traj_err > identity.mouth_traj_err);

  // metrics deterministic given translator and split
  EvalMetrics again = eval_translator(
      [&](const Tensor&, int e) { return means[static_cast<std::size_t>(e)]; }, corpus, test_utts,
      targets);
  CHECK(again.mouth_traj_err == constant.mouth_traj_err);
  CHECK(again.paired_mae == constant.paired_mae);
  CHECK(again.style_err == constant.style_err);

  CHECK_THROWS_AS(eval_translator([](const Tensor& img, int) { return img; }, corpus, {}, targets),
                  ArgumentError);
}

TEST_CASE("lambda_stccl = 0 reproduces the baseline trace bit-for-bit") {
  TempDir dir("stccl_demo_lambda0");
  CorpusIndex corpus = tiny_corpus(dir);

  BackboneSpec spec;
  spec.input_h = spec.input_w = 80;
  HeadConfig head;
  head.hidden = 16;
  head.output = 8;
  MetricCheckpoint ckpt = make_untrained_checkpoint(spec, Mechanism::kVisualDisparity,
                                                    CorrelationOptions{}, ContrastiveConfig{},
                                                    CAASConfig{}, head, 3);

  ExperimentConfig base;
  base.variant = Variant::kBaseline;
  base.epochs = 2;
  base.window = 6;
  base.train_fraction = 0.7;
  base.seeds = {1};
  ExperimentConfig lambda0 = base;
  lambda0.variant = Variant::kStccl;
  lambda0.lambda_stccl = 0.0;

  ToyTranslator a = train_translator(corpus, base, nullptr, 1);
  ToyTranslator b = train_translator(corpus, lambda0, &ckpt, 1);
  Tensor img = corpus.frame("s00", "neutral", "u00", 0);
  Tensor out_a = a.translate(img, 1);
  Tensor out_b = b.translate(img, 1);
  for (std::int64_t i = 0; i < out_a.numel(); ++i) CHECK(out_a[i] == out_b[i]);

  // missing checkpoint for a supervised variant
  ExperimentConfig bad = base;
  bad.variant = Variant::kStcclCaas;
  CHECK_THROWS_AS(train_translator(corpus, bad, nullptr, 1), ArgumentError);
}

TEST_CASE("training loop descends and stays finite on the baseline objective") {
  TempDir dir("stccl_demo_train");
  CorpusIndex corpus = tiny_corpus(dir);
  ExperimentConfig cfg;
  cfg.variant = Variant::kBaseline;
  cfg.epochs = 4;
  cfg.window = 6;
  cfg.train_fraction = 0.7;
  std::vector<TrainLogRow> log;
  ToyTranslator translator = train_translator(corpus, cfg, nullptr, 2, &log);
  REQUIRE(log.size() == 4);
  for (const TrainLogRow& row : log) CHECK(std::isfinite(row.total));
  CHECK(log.back().total < log.front().total);
}

TEST_CASE("results csv round trip and trend evaluation") {
  std::vector<ExperimentRow> rows;
  auto add = [&rows](Variant v, std::uint64_t seed, double mouth, double mae) {
    ExperimentRow r;
    r.variant = to_string(v);
    r.seed = seed;
    r.metrics = {mouth, mae, 0.1};
    rows.push_back(r);
  };
  for (std::uint64_t s : {1, 2, 3}) {
    add(Variant::kBaseline, s, 0.100 + 0.001 * s, 0.050);
    add(Variant::kSccl, s, 0.080, 0.050);
    add(Variant::kTccl, s, 0.075, 0.050);
    add(Variant::kStccl, s, 0.070, 0.051);
    add(Variant::kStcclCaas, s, 0.065, 0.052);
  }
  const std::string csv = results_csv(rows);
  auto parsed = parse_results_csv(csv);
  REQUIRE(parsed.size() == rows.size());
  CHECK(parsed[3].variant == "+sccl");
  CHECK(parsed[3].metrics.mouth_traj_err == rows[3].metrics.mouth_traj_err);

  TrendReport report = evaluate_trends(rows);
  CHECK(report.improvement_ok);
  CHECK(report.ablation_ok);
  CHECK(report.caas_ok);

  // degrade the caas variant: the caas trend flips
  for (ExperimentRow& r : rows) {
    if (r.variant == "+stccl+caas") r.metrics.mouth_traj_err = 0.09;
  }
  CHECK_FALSE(evaluate_trends(rows).caas_ok);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}
