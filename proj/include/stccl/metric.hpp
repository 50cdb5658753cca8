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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stccl/backbone.hpp"
#include "stccl/correlation.hpp"
#include "stccl/rng.hpp"

namespace stccl {

struct ContrastiveConfig {
  double temperature = 0.07;
  int negatives = 8;
  bool normalize_embeddings = true;
  void validate() const;
};

// Difficulty weight w = lambda * sigmoid(s)^r over the scalarized raw
// correlation magnitude s; weights live in [lambda*2^-r, lambda).
struct CAASConfig {
  double lambda = 2.0;
  double r = 2.0;
  bool enabled = true;
  void validate() const;
};

struct HeadConfig {
  int hidden = 128;
  int output = 64;
  void validate() const;
};

// Two stacked affine layers with a rectifier between; shared across the
// two emotion streams of a pair.
struct ProjectionHead {
  Tensor w1, b1, w2, b2;

  int input_dim() const { return w1.ndim() == 2 ? w1.dim(1) : 0; }
  int hidden_dim() const { return w1.ndim() == 2 ? w1.dim(0) : 0; }
  int output_dim() const { return w2.ndim() == 2 ? w2.dim(0) : 0; }
  static ProjectionHead init(int input, int hidden, int output, Rng& rng);
  void validate() const;
};

struct HeadVars {
  Var w1, b1, w2, b2;
  static HeadVars from(const ProjectionHead& head, bool trainable);
  std::vector<Var> all() const;
  ProjectionHead snapshot() const;
};

struct TrainingMeta {
  int epochs = 0;
  std::uint64_t seed = 0;
  std::string corpus_fingerprint;
};

// The portable supervision unit: backbone + per-(domain, level) heads +
// the configuration that reproduces descriptor extraction.
struct MetricCheckpoint {
  BackboneParameters backbone;
  Mechanism mechanism = Mechanism::kVisualDisparity;
  CorrelationOptions correlation;
  ContrastiveConfig contrastive;
  CAASConfig caas;
  HeadConfig head_config;
  // heads[domain][level-1]
  std::array<std::vector<ProjectionHead>, 2> heads;
  TrainingMeta meta;

  int descriptor_length(Domain domain, int level) const;
  const ProjectionHead& head(Domain domain, int level) const;
  void validate() const;
};

MetricCheckpoint make_untrained_checkpoint(const BackboneSpec& spec, Mechanism mechanism,
                                           const CorrelationOptions& correlation,
                                           const ContrastiveConfig& contrastive,
                                           const CAASConfig& caas, const HeadConfig& head,
                                           std::uint64_t seed);

// Projects a correlation descriptor into the shared embedding space;
// L2-normalized unless disabled.
Var project(const HeadVars& head, const Var& descriptor, bool normalize,
            bool* degenerate = nullptr);

// -log exp(a.p/tau) / (exp(a.p/tau) + sum_k exp(a.n_k/tau)), stabilized.
Var info_nce(const Var& anchor, const Var& positive, const std::vector<Var>& negatives,
             double temperature);

// Detached by construction: operates on raw descriptor values.
double caas_weight(const Tensor& raw_descriptor, const CAASConfig& cfg);

struct LossDiagnostics {
  std::array<double, 4> spatial_per_level{};
  std::array<double, 4> temporal_per_level{};
  int spatial_terms = 0;
  int temporal_terms = 0;
  double weight_sum = 0.0;
  int weight_count = 0;
  int degenerate_embeddings = 0;

  double mean_weight() const { return weight_count ? weight_sum / weight_count : 0.0; }
  int total_terms() const { return spatial_terms + temporal_terms; }
  void merge(const LossDiagnostics& other);
};

// Var materialization of a checkpoint, reused across loss evaluations.
class MetricModel {
 public:
  MetricModel(const MetricCheckpoint& checkpoint, bool trainable);

  FeaturePyramid extract(const Var& image, EvalCounter* probe = nullptr) const;
  const HeadVars& head(Domain domain, int level) const;
  const MetricCheckpoint& checkpoint() const { return checkpoint_; }
  std::vector<Var> parameters() const;
  MetricCheckpoint snapshot() const;

 private:
  MetricCheckpoint checkpoint_;
  BackboneVars backbone_;
  std::array<std::vector<HeadVars>, 2> heads_;
};

struct ContrastiveTerm {
  Var loss;
  double weight = 1.0;  // CAAS weight of the term's source descriptor
  Domain domain = Domain::kSpatial;
  int level = 1;
};

// One aligned frame pair (x = anchor stream, y = other stream).
std::vector<ContrastiveTerm> spatial_terms(const MetricModel& model, const Var& x_image,
                                           const Var& y_image, std::uint64_t seed, int n_anchors,
                                           LossDiagnostics* diag = nullptr,
                                           EvalCounter* probe = nullptr);

// One aligned frame window; locations sampled per level.
std::vector<ContrastiveTerm> temporal_terms(const MetricModel& model,
                                            const std::vector<Var>& x_frames,
                                            const std::vector<Var>& y_frames, std::uint64_t seed,
                                            int locations, LossDiagnostics* diag = nullptr,
                                            EvalCounter* probe = nullptr);

// Sums terms, CAAS-weighted when enabled. Spatial and temporal subtotals
// are reduced separately, so with CAAS off the value equals the sum of the
// standalone losses exactly.
Var reduce_terms(const std::vector<ContrastiveTerm>& terms, bool caas_enabled,
                 LossDiagnostics* diag = nullptr);

Var sccl_loss(const MetricModel& model, const Var& x_image, const Var& y_image,
              std::uint64_t seed, int n_anchors, LossDiagnostics* diag = nullptr);

Var tccl_loss(const MetricModel& model, const std::vector<Var>& x_frames,
              const std::vector<Var>& y_frames, std::uint64_t seed, int locations,
              LossDiagnostics* diag = nullptr);

Var stccl_loss(const MetricModel& model, const Var& x_image, const Var& y_image,
               const std::vector<Var>& x_frames, const std::vector<Var>& y_frames,
               std::uint64_t seed, int n_anchors, int locations,
               LossDiagnostics* diag = nullptr);

// Aligned training pair: y pose-warped onto x frame by frame.
struct AlignedSequencePair {
  std::string id;
  std::vector<Tensor> x_frames;
  std::vector<Tensor> y_frames;
};
using PairedDataset = std::vector<AlignedSequencePair>;

struct MetricTrainConfig {
  Mechanism mechanism = Mechanism::kVisualDisparity;
  CorrelationOptions correlation;
  ContrastiveConfig contrastive;
  CAASConfig caas;
  HeadConfig head;
  int epochs = 10;
  int batch_size = 8;
  double learning_rate = 1e-4;
  int n_anchors = 4;
  int temporal_locations = 4;
  int temporal_window = 8;
  bool train_backbone = true;
  std::uint64_t seed = 7;
  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double sccl = 0.0;
  double tccl = 0.0;
  double stccl = 0.0;
};

MetricCheckpoint train_metric(const PairedDataset& data, const BackboneSpec& spec,
                              const MetricTrainConfig& config,
                              std::vector<EpochStats>* curve = nullptr,
                              const std::string& corpus_fingerprint = "");

}  // namespace stccl
