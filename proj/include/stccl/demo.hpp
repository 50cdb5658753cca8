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

#include <functional>
#include <string>
#include <vector>

#include "stccl/dataset.hpp"
#include "stccl/integration.hpp"

namespace stccl {

enum class Variant { kBaseline, kSccl, kTccl, kStccl, kStcclCaas };
const char* to_string(Variant v);
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();

struct TranslatorConfig {
  int image_size = 80;
  std::array<int, 3> channels{12, 24, 48};
  int emotions = 3;
  void validate() const;
};

// Encoder-decoder with additive skip connections and a per-emotion style
// embedding injected at the bottleneck. Output bounded to (0,1).
class ToyTranslator {
 public:
  ToyTranslator(const TranslatorConfig& config, std::uint64_t seed);

  Var forward(const Var& image, int emotion) const;
  Tensor translate(const Tensor& image, int emotion) const;
  std::vector<Var> parameters();
  const TranslatorConfig& config() const { return config_; }

 private:
  struct Layer {
    Var w, b;
  };
  Layer conv(int out_ch, int in_ch, int kernel, Rng& rng, double gain);

  TranslatorConfig config_;
  Layer enc1_, enc2_, enc3_, bottleneck_;
  Layer dec3_, dec2_, dec1_, out_;
  Layer skip2_, skip1_;  // 1x1 projections, small init
  Var style_;            // (emotions, bottleneck channels)
};

struct ExperimentConfig {
  Variant variant = Variant::kBaseline;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int epochs = 6;
  int window = 6;
  int windows_per_item = 1;
  int batch_size = 4;
  double learning_rate = 2e-3;
  double lambda_stccl = 1.0;
  double style_weight = 2.0;
  double identity_weight = 1.0;
  double train_fraction = 0.9;
  std::uint64_t split_seed = 11;
  int n_anchors = 2;
  int temporal_locations = 2;
  void validate() const;
};

struct Split {
  std::vector<int> train_utts;
  std::vector<int> test_utts;
};
Split split_utterances(int n_utterances, double train_fraction, std::uint64_t split_seed);

// Per-emotion block-mean color statistics outside the mouth ROI, from the
// training utterances only.
struct StyleTargets {
  int block = 10;
  std::vector<Tensor> per_emotion;  // (3, nb, nb) means
  Tensor block_mask;                // (3, nb, nb), 0 on mouth-overlapping blocks
};
StyleTargets compute_style_targets(const CorpusIndex& corpus, const std::vector<int>& train_utts,
                                   int block);

struct TrainLogRow {
  int epoch = 0;
  double base = 0.0;
  double stccl = 0.0;
  double total = 0.0;
};

ToyTranslator train_translator(const CorpusIndex& corpus, const ExperimentConfig& config,
                               const MetricCheckpoint* checkpoint, std::uint64_t seed,
                               std::vector<TrainLogRow>* log = nullptr);

struct EvalMetrics {
  double mouth_traj_err = 0.0;
  double paired_mae = 0.0;
  double style_err = 0.0;
};

// translate(image, emotion) -> image; evaluated on held-out utterances.
EvalMetrics eval_translator(const std::function<Tensor(const Tensor&, int)>& translate,
                            const CorpusIndex& corpus, const std::vector<int>& test_utts,
                            const StyleTargets& targets);

struct ExperimentRow {
  std::string variant;
  std::uint64_t seed = 0;
  EvalMetrics metrics;
};

std::vector<ExperimentRow> run_experiment(const CorpusIndex& corpus,
                                          const MetricCheckpoint* checkpoint,
                                          const ExperimentConfig& config, int jobs = 1);

std::string results_csv(const std::vector<ExperimentRow>& rows);
std::vector<ExperimentRow> parse_results_csv(const std::string& text);

double median(std::vector<double> values);

// Trend checks over a full 5-variant sweep (Table I / IV-VII analogs).
struct TrendReport {
  double baseline_mouth = 0.0, stccl_caas_mouth = 0.0, stccl_mouth = 0.0;
  double sccl_mouth = 0.0, tccl_mouth = 0.0;
  double baseline_mae = 0.0, stccl_caas_mae = 0.0;
  bool improvement_ok = false;  // stccl+caas <= 0.9 x baseline, mae within +5%
  bool ablation_ok = false;     // stccl <= min(sccl, tccl) within 2%
  bool caas_ok = false;         // stccl+caas <= stccl within 2%
};
TrendReport evaluate_trends(const std::vector<ExperimentRow>& rows);

}  // namespace stccl
