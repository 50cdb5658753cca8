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

#include "stccl/analysis.hpp"
#include "stccl/corpus.hpp"
#include "stccl/dataset.hpp"
#include "stccl/errors.hpp"

using namespace stccl;
namespace fs = std::filesystem;

namespace {

MetricCheckpoint toy_checkpoint(Mechanism mechanism, std::uint64_t seed = 3) {
  BackboneSpec spec;
  spec.stage_channels = {2, 3, 4, 5};
  spec.stage_stride = 1;
  spec.in_channels = 3;
  spec.input_h = 10;
  spec.input_w = 10;
  HeadConfig head;
  head.hidden = 8;
  head.output = 6;
  return make_untrained_checkpoint(spec, mechanism, CorrelationOptions{}, ContrastiveConfig{},
                                   CAASConfig{}, head, seed);
}

PairedDataset random_pairs(int n_pairs, int frames, int size, std::uint64_t seed,
                           bool self_paired) {
  Rng rng(seed);
  PairedDataset data;
  for (int p = 0; p < n_pairs; ++p) {
    AlignedSequencePair pair;
    pair.id = "p" + std::to_string(p);
    for (int t = 0; t < frames; ++t) {
      Tensor x({3, size, size});
      for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(0.0, 1.0);
      Tensor y = x;
      if (!self_paired) {
        for (std::int64_t i = 0; i < y.numel(); ++i) {
          y[i] = std::clamp(y[i] + rng.uniform(-0.1, 0.1), 0.0, 1.0);
        }
      }
      pair.x_frames.push_back(std::move(x));
      pair.y_frames.push_back(std::move(y));
    }
    data.push_back(std::move(pair));
  }
  return data;
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

TEST_CASE("self-paired data: positive similarity is exactly one") {
  for (Mechanism mechanism : {Mechanism::kVisualDisparity, Mechanism::kCorrelationMatrix}) {
    MetricCheckpoint ckpt = toy_checkpoint(mechanism);
    AnalysisConfig cfg;
    cfg.sample_budget = 200;
    cfg.n_anchors = 2;
    cfg.temporal_locations = 2;
    cfg.temporal_window = 8;
    SimilarityStats stats =
        similarity_stats(random_pairs(2, 8, 10, 1, /*self_paired=*/true), ckpt, false, cfg);
    for (int d = 0; d < 2; ++d) {
      for (int level = 1; level <= 4; ++level) {
        const CellStats& c = stats.cell(d == 0 ? Domain::kSpatial : Domain::kTemporal, level);
        CHECK(c.mean_pos() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(c.mean_neg() < 1.0);
      }
    }
  }
}

TEST_CASE("budget zero and empty data are rejected") {
  MetricCheckpoint ckpt = toy_checkpoint(Mechanism::kVisualDisparity);
  AnalysisConfig cfg;
  cfg.sample_budget = 0;
  CHECK_THROWS_AS(similarity_stats(random_pairs(1, 8, 10, 1, true), ckpt, false, cfg),
                  ArgumentError);
  cfg.sample_budget = 10;
  CHECK_THROWS_AS(similarity_stats({}, ckpt, false, cfg), ArgumentError);
}

TEST_CASE("stats are deterministic per seed and stable across seeds") {
  MetricCheckpoint ckpt = toy_checkpoint(Mechanism::kVisualDisparity);
  PairedDataset data = random_pairs(3, 8, 10, 2, /*self_paired=*/false);
  AnalysisConfig cfg;
  cfg.sample_budget = 800;
  cfg.n_anchors = 2;
  cfg.temporal_locations = 2;
  cfg.temporal_window = 8;

  cfg.seed = 5;
  SimilarityStats a = similarity_stats(data, ckpt, false, cfg);
  SimilarityStats b = similarity_stats(data, ckpt, false, cfg);
  cfg.seed = 6;
  SimilarityStats c = similarity_stats(data, ckpt, false, cfg);
  for (int d = 0; d < 2; ++d) {
    for (int level = 1; level <= 4; ++level) {
      const Domain domain = d == 0 ? Domain::kSpatial : Domain::kTemporal;
      CHECK(a.cell(domain, level).mean_pos() == b.cell(domain, level).mean_pos());
      CHECK(std::fabs(a.cell(domain, level).mean_pos() - c.cell(domain, level).mean_pos()) < 0.05);
      CHECK(std::fabs(a.cell(domain, level).mean_neg() - c.cell(domain, level).mean_neg()) < 0.05);
    }
  }
}

TEST_CASE("projected statistics flow through the heads") {
  MetricCheckpoint ckpt = toy_checkpoint(Mechanism::kVisualDisparity);
  PairedDataset data = random_pairs(2, 8, 10, 3, /*self_paired=*/true);
  AnalysisConfig cfg;
  cfg.sample_budget = 150;
  cfg.n_anchors = 2;
  cfg.temporal_locations = 2;
  cfg.temporal_window = 8;
  SimilarityStats projected = similarity_stats(data, ckpt, /*use_projection=*/true, cfg);
  CHECK(projected.trained);
  // identical streams keep phi(pos) = 1 after any shared projection
  for (int level = 1; level <= 4; ++level) {
    CHECK(projected.cell(Domain::kSpatial, level).mean_pos() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("untrained synthetic micro-corpus separates positives from negatives") {
  TempDir dir("stccl_analysis_micro");
  CorpusSpec spec;
  spec.n_speakers = 1;
  spec.n_utterances = 2;
  spec.frames_per_utterance = 16;
  spec.image_size = 80;
  spec.seed = 9;
  generate_corpus(spec, dir.path.string());
  CorpusIndex corpus = CorpusIndex::load(dir.path.string());
  PairedDataset data = build_aligned_pairs(corpus, build_pair_manifest(corpus));

  BackboneSpec backbone;
  backbone.input_h = backbone.input_w = 80;
  HeadConfig head;
  MetricCheckpoint ckpt =
      make_untrained_checkpoint(backbone, Mechanism::kVisualDisparity, CorrelationOptions{},
                                ContrastiveConfig{}, CAASConfig{}, head, 13);
  AnalysisConfig cfg;
  cfg.sample_budget = 400;
  cfg.seed = 1;
  SimilarityStats stats = similarity_stats(data, ckpt, false, cfg);
  for (int d = 0; d < 2; ++d) {
    for (int level = 1; level <= 4; ++level) {
      const CellStats& c = stats.cell(d == 0 ? Domain::kSpatial : Domain::kTemporal, level);
      CHECK(c.gap() > 0.0);
    }
  }
}

TEST_CASE("report: row counts, round trips, histogram mass") {
  MetricCheckpoint ckpt = toy_checkpoint(Mechanism::kCorrelationMatrix);
  AnalysisConfig cfg;
  cfg.sample_budget = 120;
  cfg.n_anchors = 2;
  cfg.temporal_locations = 2;
  cfg.temporal_window = 8;
  SimilarityStats stats =
      similarity_stats(random_pairs(2, 8, 10, 4, false), ckpt, false, cfg);

  const std::vector<SimilarityStats> list{stats};
  const std::string csv = report_csv(list);
  int rows = -1;  // header
  for (char ch : csv) {
    if (ch == '\n') ++rows;
  }
  CHECK(rows == 8);  // 2 domains x 4 levels

  // json -> csv -> json keeps every numeric field
  const std::string json_text = report_json(list);
  auto from_json = parse_report_json(json_text);
  auto from_csv = parse_report_csv(report_csv(from_json));
  REQUIRE(from_csv.size() == 1);
  for (int d = 0; d < 2; ++d) {
    for (int level = 1; level <= 4; ++level) {
      const Domain domain = d == 0 ? Domain::kSpatial : Domain::kTemporal;
      const CellStats& x = stats.cell(domain, level);
      const CellStats& y = from_csv.front().cell(domain, level);
      CHECK(x.n_pos == y.n_pos);
      CHECK(x.n_neg == y.n_neg);
      CHECK(x.n_degenerate == y.n_degenerate);
      CHECK(x.sum_pos == y.sum_pos);
      CHECK(x.sumsq_neg == y.sumsq_neg);
      CHECK(x.hist_pos == y.hist_pos);
      CHECK(x.hist_neg == y.hist_neg);
      // histogram mass equals counts in the emitted file
      long long mass = 0;
      for (long long v : y.hist_pos) mass += v;
      CHECK(mass == y.n_pos);
    }
  }

  const std::string dat = histogram_dat(list);
  CHECK(dat.find("# mechanism=cm") != std::string::npos);
  CHECK_THROWS_AS(report_json({}), ArgumentError);
}
