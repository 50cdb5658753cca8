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

#include "stccl/metric.hpp"

#include <algorithm>
#include <cmath>

#include "stccl/errors.hpp"
#include "stccl/rng.hpp"

namespace stccl {

void ContrastiveConfig::validate() const {
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be > 0");
  if (negatives < 1) throw ArgumentError("negatives must be >= 1");
}

void CAASConfig::validate() const {
  if (!(lambda > 0.0) || !(r > 0.0)) throw ArgumentError("caas lambda and r must be > 0");
}

void HeadConfig::validate() const {
  if (hidden < 1 || output < 1) throw ArgumentError("head dims must be >= 1");
}

ProjectionHead ProjectionHead::init(int input, int hidden, int output, Rng& rng) {
  if (input < 1 || hidden < 1 || output < 1) throw ArgumentError("head dims must be >= 1");
  ProjectionHead head;
  head.w1 = Tensor({hidden, input});
  head.b1 = Tensor({hidden}, 0.0);
  head.w2 = Tensor({output, hidden});
  head.b2 = Tensor({output}, 0.0);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input));
  for (std::int64_t i = 0; i < head.w1.numel(); ++i) head.w1[i] = rng.uniform(-bound1, bound1);
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (std::int64_t i = 0; i < head.w2.numel(); ++i) head.w2[i] = rng.uniform(-bound2, bound2);
  return head;
}

void ProjectionHead::validate() const {
  if (w1.ndim() != 2 || w2.ndim() != 2 || b1.ndim() != 1 || b2.ndim() != 1 ||
      b1.dim(0) != w1.dim(0) || w2.dim(1) != w1.dim(0) || b2.dim(0) != w2.dim(0)) {
    throw ArgumentError("projection head shapes inconsistent");
  }
  if (!w1.all_finite() || !b1.all_finite() || !w2.all_finite() || !b2.all_finite()) {
    throw ArgumentError("non-finite projection head parameters");
  }
}

HeadVars HeadVars::from(const ProjectionHead& head, bool trainable) {
  head.validate();
  HeadVars vars;
  auto wrap = [trainable](const Tensor& t) { return trainable ? Var::leaf(t) : Var::constant(t); };
  vars.w1 = wrap(head.w1);
  vars.b1 = wrap(head.b1);
  vars.w2 = wrap(head.w2);
  vars.b2 = wrap(head.b2);
  return vars;
}

std::vector<Var> HeadVars::all() const { return {w1, b1, w2, b2}; }

ProjectionHead HeadVars::snapshot() const {
  ProjectionHead head;
  head.w1 = w1.value();
  head.b1 = b1.value();
  head.w2 = w2.value();
  head.b2 = b2.value();
  return head;
}

int MetricCheckpoint::descriptor_length(Domain, int level) const {
  if (level < 1 || level > backbone.spec.stage_count()) throw IndexError("level out of range");
  if (mechanism == Mechanism::kVisualDisparity) {
    return backbone.spec.stage_channels[static_cast<std::size_t>(level - 1)];
  }
  return correlation.cm_mode == CmMode::kLiteral ? 1 : correlation.window * correlation.window;
}

const ProjectionHead& MetricCheckpoint::head(Domain domain, int level) const {
  const auto& group = heads[domain == Domain::kSpatial ? 0 : 1];
  if (level < 1 || level > static_cast<int>(group.size())) throw IndexError("head level out of range");
  return group[static_cast<std::size_t>(level - 1)];
}

void MetricCheckpoint::validate() const {
  backbone.validate();
  contrastive.validate();
  caas.validate();
  head_config.validate();
  if (correlation.window < 1 || correlation.window % 2 == 0) {
    throw ArgumentError("correlation window must be odd and >= 1");
  }
  for (int d = 0; d < 2; ++d) {
    const Domain domain = d == 0 ? Domain::kSpatial : Domain::kTemporal;
    if (static_cast<int>(heads[d].size()) != backbone.spec.stage_count()) {
      throw ArgumentError("one projection head required per (domain, level)");
    }
    for (int l = 1; l <= backbone.spec.stage_count(); ++l) {
      const ProjectionHead& h = heads[d][static_cast<std::size_t>(l - 1)];
      h.validate();
      if (h.input_dim() != descriptor_length(domain, l)) {
        throw ArgumentError("head input dim inconsistent with descriptor length");
      }
    }
  }
}

MetricCheckpoint make_untrained_checkpoint(const BackboneSpec& spec, Mechanism mechanism,
                                           const CorrelationOptions& correlation,
                                           const ContrastiveConfig& contrastive,
                                           const CAASConfig& caas, const HeadConfig& head,
                                           std::uint64_t seed) {
  MetricCheckpoint ckpt;
  ckpt.backbone = init_backbone(spec, Rng::mix(seed, 0x6261636bULL));
  ckpt.mechanism = mechanism;
  ckpt.correlation = correlation;
  ckpt.contrastive = contrastive;
  ckpt.caas = caas;
  ckpt.head_config = head;
  ckpt.meta.seed = seed;
  for (int d = 0; d < 2; ++d) {
    const Domain domain = d == 0 ? Domain::kSpatial : Domain::kTemporal;
    for (int l = 1; l <= spec.stage_count(); ++l) {
      Rng rng(Rng::mix(seed, 0x68656164ULL + static_cast<std::uint64_t>(d * 16 + l)));
      ckpt.heads[d].push_back(
          ProjectionHead::init(ckpt.descriptor_length(domain, l), head.hidden, head.output, rng));
    }
  }
  ckpt.validate();
  return ckpt;
}

Var project(const HeadVars& head, const Var& descriptor, bool normalize, bool* degenerate) {
  const int in_dim = head.w1.value().dim(1);
  if (descriptor.value().numel() != in_dim) {
    throw ArgumentError("descriptor length " + std::to_string(descriptor.value().numel()) +
                        " does not match head input dim " + std::to_string(in_dim));
  }
  Var column = ops::reshape(descriptor, {in_dim, 1});
  Var hidden = ops::relu(
      ops::add(ops::reshape(ops::matmul(head.w1, column), {head.w1.value().dim(0)}), head.b1));
  Var out = ops::add(
      ops::reshape(ops::matmul(head.w2, ops::reshape(hidden, {head.w1.value().dim(0), 1})),
                   {head.w2.value().dim(0)}),
      head.b2);
  if (!normalize) {
    if (degenerate) *degenerate = false;
    return out;
  }
  return ops::l2_normalize(out, 1e-12, degenerate);
}

Var info_nce(const Var& anchor, const Var& positive, const std::vector<Var>& negatives,
             double temperature) {
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be > 0");
  if (negatives.empty()) throw ArgumentError("info_nce needs at least one negative");
  std::vector<Var> logits;
  logits.reserve(negatives.size() + 1);
  const double inv_tau = 1.0 / temperature;
  logits.push_back(ops::scale(ops::dot(anchor, positive), inv_tau));
  for (const Var& n : negatives) {
    logits.push_back(ops::scale(ops::dot(anchor, n), inv_tau));
  }
  Var all = ops::concat(logits);
  if (!all.value().all_finite()) throw NumericError("info_nce: non-finite logits");
  return ops::logsumexp_minus_first(all);
}

double caas_weight(const Tensor& raw_descriptor, const CAASConfig& cfg) {
  cfg.validate();
  double sq = 0.0;
  for (std::int64_t i = 0; i < raw_descriptor.numel(); ++i) {
    sq += raw_descriptor[i] * raw_descriptor[i];
  }
  const double s = std::sqrt(sq / static_cast<double>(std::max<std::int64_t>(raw_descriptor.numel(), 1)));
  const double sig = 1.0 / (1.0 + std::exp(-s));
  return cfg.lambda * std::pow(sig, cfg.r);
}

void LossDiagnostics::merge(const LossDiagnostics& other) {
  for (int i = 0; i < 4; ++i) {
    spatial_per_level[static_cast<std::size_t>(i)] += other.spatial_per_level[static_cast<std::size_t>(i)];
    temporal_per_level[static_cast<std::size_t>(i)] += other.temporal_per_level[static_cast<std::size_t>(i)];
  }
  spatial_terms += other.spatial_terms;
  temporal_terms += other.temporal_terms;
  weight_sum += other.weight_sum;
  weight_count += other.weight_count;
  degenerate_embeddings += other.degenerate_embeddings;
}

MetricModel::MetricModel(const MetricCheckpoint& checkpoint, bool trainable)
    : checkpoint_(checkpoint) {
  checkpoint_.validate();
  backbone_ = BackboneVars::from(checkpoint_.backbone,
                                 trainable && checkpoint_.backbone.spec.trainable);
  for (int d = 0; d < 2; ++d) {
    for (const ProjectionHead& h : checkpoint_.heads[d]) {
      heads_[d].push_back(HeadVars::from(h, trainable));
    }
  }
}

FeaturePyramid MetricModel::extract(const Var& image, EvalCounter* probe) const {
  return extract_pyramid(backbone_, image, probe);
}

const HeadVars& MetricModel::head(Domain domain, int level) const {
  const auto& group = heads_[domain == Domain::kSpatial ? 0 : 1];
  if (level < 1 || level > static_cast<int>(group.size())) throw IndexError("head level out of range");
  return group[static_cast<std::size_t>(level - 1)];
}

std::vector<Var> MetricModel::parameters() const {
  std::vector<Var> params;
  if (checkpoint_.backbone.spec.trainable) {
    for (const Var& v : backbone_.all()) params.push_back(v);
  }
  for (int d = 0; d < 2; ++d) {
    for (const HeadVars& h : heads_[d]) {
      for (const Var& v : h.all()) params.push_back(v);
    }
  }
  return params;
}

MetricCheckpoint MetricModel::snapshot() const {
  MetricCheckpoint out = checkpoint_;
  out.backbone = backbone_.snapshot();
  for (int d = 0; d < 2; ++d) {
    out.heads[d].clear();
    for (const HeadVars& h : heads_[d]) out.heads[d].push_back(h.snapshot());
  }
  return out;
}

namespace {

struct EmbeddingSet {
  Var anchor;                 // projected x_ij
  Var positive;               // projected y_ij
  std::vector<Var> negatives; // projected y_ik
  double weight = 1.0;        // CAAS weight from the raw x_ij descriptor
};

Var project_descriptor(const MetricModel& model, Domain domain, int level,
                       const CorrelationDescriptor& d, LossDiagnostics* diag) {
  bool degenerate = false;
  Var e = project(model.head(domain, level), d.values,
                  model.checkpoint().contrastive.normalize_embeddings, &degenerate);
  if (degenerate && diag) ++diag->degenerate_embeddings;
  return e;
}

}  // namespace

std::vector<ContrastiveTerm> spatial_terms(const MetricModel& model, const Var& x_image,
                                           const Var& y_image, std::uint64_t seed, int n_anchors,
                                           LossDiagnostics* diag, EvalCounter* probe) {
  if (!x_image.value().same_shape(y_image.value())) {
    throw ArgumentError("spatial pair images must share a shape");
  }
  const MetricCheckpoint& ckpt = model.checkpoint();
  FeaturePyramid px = model.extract(x_image, probe);
  FeaturePyramid py = model.extract(y_image, probe);

  std::vector<ContrastiveTerm> terms;
  for (int level = 1; level <= px.level_count(); ++level) {
    const FeatureMap& map = px.level(level);
    const auto samples = sample_spatial_pairs(
        map.height(), map.width(), n_anchors,
        Rng::mix(seed, 0x73706174ULL + static_cast<std::uint64_t>(level)), level);
    for (const SpatialPairSample& sample : samples) {
      // Negatives y_ik depend only on the anchor; shared across the 8 terms.
      std::vector<Var> neg_embeddings;
      neg_embeddings.reserve(sample.negatives.size());
      for (const RegionIndex& k : sample.negatives) {
        CorrelationDescriptor dk =
            correlate_spatial(ckpt.mechanism, py, sample.anchor, k, ckpt.correlation);
        neg_embeddings.push_back(project_descriptor(model, Domain::kSpatial, level, dk, diag));
      }
      for (const RegionIndex& j : sample.positives) {
        CorrelationDescriptor dx =
            correlate_spatial(ckpt.mechanism, px, sample.anchor, j, ckpt.correlation);
        CorrelationDescriptor dy =
            correlate_spatial(ckpt.mechanism, py, sample.anchor, j, ckpt.correlation);
        ContrastiveTerm term;
        term.domain = Domain::kSpatial;
        term.level = level;
        term.weight = caas_weight(dx.values.value(), ckpt.caas);
        term.loss = info_nce(project_descriptor(model, Domain::kSpatial, level, dx, diag),
                             project_descriptor(model, Domain::kSpatial, level, dy, diag),
                             neg_embeddings, ckpt.contrastive.temperature);
        if (diag) {
          diag->spatial_per_level[static_cast<std::size_t>(level - 1)] += term.loss.value().item();
          ++diag->spatial_terms;
        }
        terms.push_back(std::move(term));
      }
    }
  }
  return terms;
}

std::vector<ContrastiveTerm> temporal_terms(const MetricModel& model,
                                            const std::vector<Var>& x_frames,
                                            const std::vector<Var>& y_frames, std::uint64_t seed,
                                            int locations, LossDiagnostics* diag,
                                            EvalCounter* probe) {
  if (x_frames.size() != y_frames.size()) {
    throw ArgumentError("temporal pair sequences must have equal length");
  }
  const int frame_count = static_cast<int>(x_frames.size());
  if (frame_count < 4) throw ArgumentError("temporal loss needs at least 4 frames");
  const MetricCheckpoint& ckpt = model.checkpoint();

  std::vector<FeaturePyramid> px, py;
  px.reserve(x_frames.size());
  py.reserve(y_frames.size());
  for (std::size_t t = 0; t < x_frames.size(); ++t) {
    if (!x_frames[t].value().same_shape(y_frames[t].value())) {
      throw ArgumentError("temporal pair frames must share a shape");
    }
    px.push_back(model.extract(x_frames[t], probe));
    py.push_back(model.extract(y_frames[t], probe));
  }

  std::vector<ContrastiveTerm> terms;
  for (int level = 1; level <= px.front().level_count(); ++level) {
    const FeatureMap& map = px.front().level(level);
    Rng loc_rng(Rng::mix(seed, 0x74656d70ULL + static_cast<std::uint64_t>(level)));
    for (int loc = 0; loc < locations; ++loc) {
      const int row = static_cast<int>(loc_rng.uniform_int(map.height()));
      const int col = static_cast<int>(loc_rng.uniform_int(map.width()));
      const auto samples = sample_temporal_pairs(
          frame_count, 1,
          Rng::mix(seed, 0x7477ULL + static_cast<std::uint64_t>((level * 131 + loc) * 2654435761ULL)));
      for (const TemporalPairSample& sample : samples) {
        auto t_index = [&](int frame) { return TemporalIndex{frame, level, row, col}; };
        std::vector<Var> neg_embeddings;
        neg_embeddings.reserve(sample.negatives.size());
        for (int k : sample.negatives) {
          CorrelationDescriptor dk = correlate_temporal(ckpt.mechanism, py, t_index(sample.anchor),
                                                        t_index(k), ckpt.correlation);
          neg_embeddings.push_back(project_descriptor(model, Domain::kTemporal, level, dk, diag));
        }
        for (int j : sample.positives) {
          CorrelationDescriptor dx = correlate_temporal(ckpt.mechanism, px, t_index(sample.anchor),
                                                        t_index(j), ckpt.correlation);
          CorrelationDescriptor dy = correlate_temporal(ckpt.mechanism, py, t_index(sample.anchor),
                                                        t_index(j), ckpt.correlation);
          ContrastiveTerm term;
          term.domain = Domain::kTemporal;
          term.level = level;
          term.weight = caas_weight(dx.values.value(), ckpt.caas);
          term.loss = info_nce(project_descriptor(model, Domain::kTemporal, level, dx, diag),
                               project_descriptor(model, Domain::kTemporal, level, dy, diag),
                               neg_embeddings, ckpt.contrastive.temperature);
          if (diag) {
            diag->temporal_per_level[static_cast<std::size_t>(level - 1)] +=
                term.loss.value().item();
            ++diag->temporal_terms;
          }
          terms.push_back(std::move(term));
        }
      }
    }
  }
  return terms;
}

Var reduce_terms(const std::vector<ContrastiveTerm>& terms, bool caas_enabled,
                 LossDiagnostics* diag) {
  std::vector<Var> spatial, temporal;
  for (const ContrastiveTerm& term : terms) {
    const double w = caas_enabled ? term.weight : 1.0;
    if (diag && caas_enabled) {
      diag->weight_sum += w;
      ++diag->weight_count;
    }
    Var contribution = caas_enabled ? ops::scale(term.loss, w) : term.loss;
    (term.domain == Domain::kSpatial ? spatial : temporal).push_back(contribution);
  }
  if (spatial.empty()) return ops::sum_list(temporal);
  if (temporal.empty()) return ops::sum_list(spatial);
  return ops::add(ops::sum_list(spatial), ops::sum_list(temporal));
}

Var sccl_loss(const MetricModel& model, const Var& x_image, const Var& y_image,
              std::uint64_t seed, int n_anchors, LossDiagnostics* diag) {
  return reduce_terms(spatial_terms(model, x_image, y_image, seed, n_anchors, diag),
                      /*caas_enabled=*/false, diag);
}

Var tccl_loss(const MetricModel& model, const std::vector<Var>& x_frames,
              const std::vector<Var>& y_frames, std::uint64_t seed, int locations,
              LossDiagnostics* diag) {
  return reduce_terms(temporal_terms(model, x_frames, y_frames, seed, locations, diag),
                      /*caas_enabled=*/false, diag);
}

Var stccl_loss(const MetricModel& model, const Var& x_image, const Var& y_image,
               const std::vector<Var>& x_frames, const std::vector<Var>& y_frames,
               std::uint64_t seed, int n_anchors, int locations, LossDiagnostics* diag) {
  std::vector<ContrastiveTerm> terms = spatial_terms(model, x_image, y_image, seed, n_anchors, diag);
  std::vector<ContrastiveTerm> t = temporal_terms(model, x_frames, y_frames, seed, locations, diag);
  terms.insert(terms.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  return reduce_terms(terms, model.checkpoint().caas.enabled, diag);
}

void MetricTrainConfig::validate() const {
  contrastive.validate();
  caas.validate();
  head.validate();
  if (epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (learning_rate < 0.0) throw ArgumentError("learning rate must be >= 0");
  if (n_anchors < 1 || temporal_locations < 1) throw ArgumentError("sampling counts must be >= 1");
  if (temporal_window < 4) throw ArgumentError("temporal window must be >= 4");
}

MetricCheckpoint train_metric(const PairedDataset& data, const BackboneSpec& spec,
                              const MetricTrainConfig& config, std::vector<EpochStats>* curve,
                              const std::string& corpus_fingerprint) {
  config.validate();
  if (data.empty()) throw ArgumentError("train_metric: empty paired dataset");

  BackboneSpec effective = spec;
  effective.trainable = config.train_backbone;
  MetricCheckpoint init = make_untrained_checkpoint(effective, config.mechanism,
                                                    config.correlation, config.contrastive,
                                                    config.caas, config.head, config.seed);
  MetricModel model(init, /*trainable=*/true);
  std::vector<Var> params = model.parameters();
  Adam optimizer(config.learning_rate);

  // One item per (pair, window start); the spatial pair is the window's
  // middle frame.
  struct Item {
    int pair = 0;
    int start = 0;
  };
  std::vector<Item> items;
  for (std::size_t p = 0; p < data.size(); ++p) {
    const auto& pair = data[p];
    if (pair.x_frames.size() != pair.y_frames.size() || pair.x_frames.empty()) {
      throw ArgumentError("train_metric: misaligned pair " + pair.id);
    }
    const int t = static_cast<int>(pair.x_frames.size());
    if (t < config.temporal_window) {
      throw ArgumentError("train_metric: pair shorter than the temporal window");
    }
    for (int start = 0; start + config.temporal_window <= t; start += config.temporal_window) {
      items.push_back({static_cast<int>(p), start});
    }
  }
  if (items.empty()) throw ArgumentError("train_metric: no training windows");

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(config.seed, 0x65706f63ULL + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(items);

    double epoch_sccl = 0.0, epoch_tccl = 0.0, epoch_stccl = 0.0;
    for (std::size_t offset = 0; offset < items.size(); offset += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(items.size(), offset + static_cast<std::size_t>(config.batch_size));
      zero_grad(params);
      std::vector<Var> batch_losses;
      for (std::size_t it = offset; it < end; ++it) {
        const Item& item = items[it];
        const auto& pair = data[static_cast<std::size_t>(item.pair)];
        const int mid = item.start + config.temporal_window / 2;
        std::vector<Var> xw, yw;
        for (int t = item.start; t < item.start + config.temporal_window; ++t) {
          xw.push_back(Var::constant(pair.x_frames[static_cast<std::size_t>(t)]));
          yw.push_back(Var::constant(pair.y_frames[static_cast<std::size_t>(t)]));
        }
        const std::uint64_t item_seed =
            Rng::mix(config.seed, 0x6974656dULL + static_cast<std::uint64_t>(
                                      (epoch * 100003 + item.pair * 131 + item.start)));
        LossDiagnostics diag;
        Var loss = stccl_loss(model, Var::constant(pair.x_frames[static_cast<std::size_t>(mid)]),
                              Var::constant(pair.y_frames[static_cast<std::size_t>(mid)]), xw, yw,
                              item_seed, config.n_anchors, config.temporal_locations, &diag);
        if (!std::isfinite(loss.value().item())) {
          throw NumericError("train_metric: non-finite loss at epoch " + std::to_string(epoch) +
                             ", pair " + pair.id);
        }
        double s = 0.0, t2 = 0.0;
        for (int l = 0; l < 4; ++l) {
          s += diag.spatial_per_level[static_cast<std::size_t>(l)];
          t2 += diag.temporal_per_level[static_cast<std::size_t>(l)];
        }
        epoch_sccl += s;
        epoch_tccl += t2;
        epoch_stccl += loss.value().item();
        batch_losses.push_back(loss);
      }
      Var batch_loss = ops::sum_list(batch_losses);
      backward(batch_loss);
      optimizer.step(params);
    }
    if (curve) {
      const double n = static_cast<double>(items.size());
      curve->push_back({epoch, epoch_sccl / n, epoch_tccl / n, epoch_stccl / n});
    }
  }

  MetricCheckpoint out = model.snapshot();
  out.meta.epochs = config.epochs;
  out.meta.seed = config.seed;
  out.meta.corpus_fingerprint = corpus_fingerprint;
  return out;
}

}  // namespace stccl
