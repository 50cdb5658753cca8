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

#include "stccl/demo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <thread>

#include "stccl/errors.hpp"
#include "stccl/rng.hpp"

namespace stccl {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kSccl: return "+sccl";
    case Variant::kTccl: return "+tccl";
    case Variant::kStccl: return "+stccl";
    case Variant::kStcclCaas: return "+stccl+caas";
  }
  return "baseline";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants()) {
    if (name == to_string(v)) return v;
  }
  throw ArgumentError("unknown variant: " + name);
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> kAll{Variant::kBaseline, Variant::kSccl, Variant::kTccl,
                                         Variant::kStccl, Variant::kStcclCaas};
  return kAll;
}

void TranslatorConfig::validate() const {
  if (image_size < 16 || image_size % 8 != 0) {
    throw ArgumentError("translator image size must be a multiple of 8, >= 16");
  }
  for (int c : channels) {
    if (c < 1) throw ArgumentError("translator channels must be >= 1");
  }
  if (emotions < 1) throw ArgumentError("translator needs at least one emotion");
}

ToyTranslator::Layer ToyTranslator::conv(int out_ch, int in_ch, int kernel, Rng& rng, double gain) {
  Layer layer;
  Tensor w({out_ch, in_ch, kernel, kernel});
  const double bound = gain / std::sqrt(static_cast<double>(in_ch) * kernel * kernel);
  for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
  layer.w = Var::leaf(w);
  layer.b = Var::leaf(Tensor({out_ch}, 0.0));
  return layer;
}

ToyTranslator::ToyTranslator(const TranslatorConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  Rng rng(Rng::mix(seed, 0x7472616eULL));
  const auto [c0, c1, c2] = std::tuple{config.channels[0], config.channels[1], config.channels[2]};
  enc1_ = conv(c0, 3, 3, rng, 1.0);
  enc2_ = conv(c1, c0, 3, rng, 1.0);
  enc3_ = conv(c2, c1, 3, rng, 1.0);
  bottleneck_ = conv(c2, c2, 3, rng, 1.0);
  dec3_ = conv(c1, c2, 3, rng, 1.0);
  dec2_ = conv(c0, c1, 3, rng, 1.0);
  dec1_ = conv(c0, c0, 3, rng, 1.0);
  // Small-gain output and skips: the decoder starts near a flat gray image
  // and only sculpts regions the losses ask for.
  out_ = conv(3, c0, 3, rng, 0.1);
  skip2_ = conv(c1, c1, 1, rng, 0.2);
  skip1_ = conv(c0, c0, 1, rng, 0.2);
  Tensor style({config.emotions, c2});
  for (std::int64_t i = 0; i < style.numel(); ++i) style[i] = rng.uniform(-0.2, 0.2);
  style_ = Var::leaf(style);
}

Var ToyTranslator::forward(const Var& image, int emotion) const {
  if (emotion < 0 || emotion >= config_.emotions) throw IndexError("emotion index out of range");
  const Tensor& img = image.value();
  if (img.ndim() != 3 || img.dim(0) != 3 || img.dim(1) != config_.image_size ||
      img.dim(2) != config_.image_size) {
    throw ArgumentError("translator expects (3," + std::to_string(config_.image_size) + "," +
                        std::to_string(config_.image_size) + ") images");
  }
  using namespace ops;
  Var e1 = relu(conv2d(image, enc1_.w, enc1_.b, 2, 1));
  Var e2 = relu(conv2d(e1, enc2_.w, enc2_.b, 2, 1));
  Var e3 = relu(conv2d(e2, enc3_.w, enc3_.b, 2, 1));

  const int c2 = config_.channels[2];
  std::vector<std::int64_t> idx(static_cast<std::size_t>(c2));
  for (int i = 0; i < c2; ++i) {
    idx[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(emotion) * c2 + i;
  }
  Var style_row = gather(style_, idx);
  Var b = relu(conv2d(add_channel_bias(e3, style_row), bottleneck_.w, bottleneck_.b, 1, 1));

  Var d3 = relu(add(conv2d(upsample2_nearest(b), dec3_.w, dec3_.b, 1, 1),
                    conv2d(e2, skip2_.w, skip2_.b, 1, 0)));
  Var d2 = relu(add(conv2d(upsample2_nearest(d3), dec2_.w, dec2_.b, 1, 1),
                    conv2d(e1, skip1_.w, skip1_.b, 1, 0)));
  Var d1 = relu(conv2d(upsample2_nearest(d2), dec1_.w, dec1_.b, 1, 1));
  return sigmoid(conv2d(d1, out_.w, out_.b, 1, 1));
}

Tensor ToyTranslator::translate(const Tensor& image, int emotion) const {
  return forward(Var::constant(image), emotion).value();
}

std::vector<Var> ToyTranslator::parameters() {
  std::vector<Var> params;
  for (Layer* layer : {&enc1_, &enc2_, &enc3_, &bottleneck_, &dec3_, &dec2_, &dec1_, &out_,
                       &skip2_, &skip1_}) {
    params.push_back(layer->w);
    params.push_back(layer->b);
  }
  params.push_back(style_);
  return params;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ArgumentError("experiment needs at least one seed");
  if (epochs < 1 || window < 4 || windows_per_item < 1 || batch_size < 1) {
    throw ArgumentError("experiment schedule out of range");
  }
  if (learning_rate <= 0.0) throw ArgumentError("learning rate must be positive");
  if (lambda_stccl < 0.0) throw ArgumentError("lambda_stccl must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ArgumentError("train fraction must be in (0,1)");
  }
  if (n_anchors < 1 || temporal_locations < 1) throw ArgumentError("sampling counts must be >= 1");
}

Split split_utterances(int n_utterances, double train_fraction, std::uint64_t split_seed) {
  if (n_utterances < 2) throw ArgumentError("need at least 2 utterances to split");
  std::vector<int> order(static_cast<std::size_t>(n_utterances));
  for (int i = 0; i < n_utterances; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(Rng::mix(split_seed, 0x73706c69ULL));
  rng.shuffle(order);
  int n_train = static_cast<int>(std::lround(train_fraction * n_utterances));
  n_train = std::clamp(n_train, 1, n_utterances - 1);
  Split split;
  split.train_utts.assign(order.begin(), order.begin() + n_train);
  split.test_utts.assign(order.begin() + n_train, order.end());
  std::sort(split.train_utts.begin(), split.train_utts.end());
  std::sort(split.test_utts.begin(), split.test_utts.end());
  return split;
}

namespace {

Tensor block_means_plain(const Tensor& image, int block) {
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const int hb = h / block, wb = w / block;
  Tensor out({c, hb, wb}, 0.0);
  const double inv = 1.0 / (static_cast<double>(block) * block);
  for (int ci = 0; ci < c; ++ci) {
    for (int r = 0; r < h; ++r) {
      for (int cc = 0; cc < w; ++cc) {
        out.at({ci, r / block, cc / block}) += image.at({ci, r, cc}) * inv;
      }
    }
  }
  return out;
}

Tensor non_mouth_mask3(int size) {
  const Tensor roi = mouth_roi_mask(size);
  Tensor mask({3, size, size});
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < size; ++r) {
      for (int cc = 0; cc < size; ++cc) mask.at({c, r, cc}) = 1.0 - roi.at({0, r, cc});
    }
  }
  return mask;
}

}  // namespace

StyleTargets compute_style_targets(const CorpusIndex& corpus, const std::vector<int>& train_utts,
                                   int block) {
  const int size = corpus.image_size();
  if (block < 1 || size % block != 0) throw ArgumentError("style block must divide the image size");
  StyleTargets targets;
  targets.block = block;
  const int nb = size / block;

  const MouthRoi roi = mouth_roi(size);
  targets.block_mask = Tensor({3, nb, nb}, 1.0);
  for (int br = 0; br < nb; ++br) {
    for (int bc = 0; bc < nb; ++bc) {
      const int r0 = br * block, r1 = r0 + block, c0 = bc * block, c1 = c0 + block;
      const bool overlaps = r0 < roi.r1 && r1 > roi.r0 && c0 < roi.c1 && c1 > roi.c0;
      if (overlaps) {
        for (int c = 0; c < 3; ++c) targets.block_mask.at({c, br, bc}) = 0.0;
      }
    }
  }

  for (const std::string& emotion : corpus.emotions()) {
    Tensor mean({3, nb, nb}, 0.0);
    long long count = 0;
    for (const std::string& speaker : corpus.speakers()) {
      for (int u : train_utts) {
        const std::string utt = corpus.utterances()[static_cast<std::size_t>(u)];
        for (int t = 0; t < corpus.frames_per_utterance(); ++t) {
          const Tensor frame = corpus.frame(speaker, emotion, utt, t);
          const Tensor bm = block_means_plain(frame, block);
          for (std::int64_t i = 0; i < mean.numel(); ++i) mean[i] += bm[i];
          ++count;
        }
      }
    }
    if (count == 0) throw ArgumentError("no training frames for style targets");
    for (std::int64_t i = 0; i < mean.numel(); ++i) mean[i] /= static_cast<double>(count);
    targets.per_emotion.push_back(std::move(mean));
  }
  return targets;
}

ToyTranslator train_translator(const CorpusIndex& corpus, const ExperimentConfig& config,
                               const MetricCheckpoint* checkpoint, std::uint64_t seed,
                               std::vector<TrainLogRow>* log) {
  config.validate();
  const bool needs_metric = config.variant != Variant::kBaseline && config.lambda_stccl != 0.0;
  if (config.variant != Variant::kBaseline && checkpoint == nullptr) {
    throw ArgumentError("variant " + std::string(to_string(config.variant)) +
                            " needs a metric checkpoint",
                        "missing_checkpoint");
  }
  const int size = corpus.image_size();
  const int frames = corpus.frames_per_utterance();
  if (frames < config.window) throw ArgumentError("corpus shorter than the training window");

  TranslatorConfig tcfg;
  tcfg.image_size = size;
  tcfg.emotions = static_cast<int>(corpus.emotions().size());
  ToyTranslator translator(tcfg, seed);
  std::vector<Var> params = translator.parameters();
  Adam optimizer(config.learning_rate);

  const Split split = split_utterances(static_cast<int>(corpus.utterances().size()),
                                       config.train_fraction, config.split_seed);
  const StyleTargets targets = compute_style_targets(corpus, split.train_utts, size / 8);
  const Tensor nonmouth = non_mouth_mask3(size);

  std::unique_ptr<Supervisor> supervisor;
  if (needs_metric) {
    SupervisionContext ctx;
    ctx.checkpoint = checkpoint;
    ctx.spatial_on = config.variant != Variant::kTccl;
    ctx.temporal_on = config.variant != Variant::kSccl;
    ctx.caas_on = config.variant == Variant::kStcclCaas;
    ctx.n_anchors = config.n_anchors;
    ctx.temporal_locations = config.temporal_locations;
    supervisor = std::make_unique<Supervisor>(ctx);
  }

  struct Item {
    int speaker = 0;
    int utt = 0;
    int emotion = 0;
  };
  std::vector<Item> items;
  std::vector<int> target_emotions;
  for (int e = 0; e < static_cast<int>(corpus.emotions().size()); ++e) {
    if (corpus.emotions()[static_cast<std::size_t>(e)] != "neutral") target_emotions.push_back(e);
  }
  for (int s = 0; s < static_cast<int>(corpus.speakers().size()); ++s) {
    for (int u : split.train_utts) {
      for (int e : target_emotions) items.push_back({s, u, e});
    }
  }
  if (items.empty()) throw ArgumentError("no training items");

  // Source sequences cached across epochs.
  std::map<std::pair<int, int>, std::vector<Tensor>> sources;
  for (const Item& item : items) {
    const auto key = std::make_pair(item.speaker, item.utt);
    if (!sources.count(key)) {
      sources[key] = corpus.sequence(corpus.speakers()[static_cast<std::size_t>(item.speaker)],
                                     "neutral",
                                     corpus.utterances()[static_cast<std::size_t>(item.utt)]);
    }
  }

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng epoch_rng(Rng::mix(seed, 0x64656d6fULL + static_cast<std::uint64_t>(epoch)));
    epoch_rng.shuffle(items);

    double epoch_base = 0.0, epoch_stccl = 0.0, epoch_total = 0.0;
    long long n_losses = 0;
    for (std::size_t offset = 0; offset < items.size();
         offset += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(items.size(), offset + static_cast<std::size_t>(config.batch_size));
      zero_grad(params);
      std::vector<Var> batch_losses;
      for (std::size_t it = offset; it < end; ++it) {
        const Item& item = items[it];
        const auto& source = sources.at(std::make_pair(item.speaker, item.utt));
        for (int wi = 0; wi < config.windows_per_item; ++wi) {
          const int start = frames == config.window
                                ? 0
                                : static_cast<int>(epoch_rng.uniform_int(frames - config.window + 1));
          std::vector<Tensor> window(source.begin() + start, source.begin() + start + config.window);
          std::vector<Var> outputs;
          std::vector<Var> frame_losses;
          outputs.reserve(window.size());
          for (const Tensor& frame : window) {
            Var out = translator.forward(Var::constant(frame), item.emotion);
            Var id_loss = ops::masked_mse(out, Var::constant(frame), nonmouth);
            Var style_loss = ops::masked_mse(
                ops::block_means(out, targets.block),
                Var::constant(targets.per_emotion[static_cast<std::size_t>(item.emotion)]),
                targets.block_mask);
            frame_losses.push_back(ops::add(ops::scale(id_loss, config.identity_weight),
                                            ops::scale(style_loss, config.style_weight)));
            outputs.push_back(std::move(out));
          }
          Var base = ops::scale(ops::sum_list(frame_losses), 1.0 / static_cast<double>(window.size()));
          Var total = base;
          double stccl_value = 0.0;
          if (supervisor) {
            const std::uint64_t call_seed =
                Rng::mix(seed, 0x63616c6cULL +
                                   static_cast<std::uint64_t>((epoch * 7919 + static_cast<int>(it)) *
                                                                  31 +
                                                              wi));
            SupervisionResult sup = supervisor->video(window, outputs, call_seed);
            stccl_value = sup.loss.value().item();
            total = ops::add(base, ops::scale(sup.loss, config.lambda_stccl));
          }
          const double total_value = total.value().item();
          if (!std::isfinite(total_value)) {
            throw NumericError("train_translator: non-finite loss at epoch " +
                               std::to_string(epoch));
          }
          epoch_base += base.value().item();
          epoch_stccl += stccl_value;
          epoch_total += total_value;
          ++n_losses;
          batch_losses.push_back(total);
        }
      }
      backward(ops::sum_list(batch_losses));
      optimizer.step(params);
    }
    if (log) {
      const double n = static_cast<double>(std::max<long long>(n_losses, 1));
      log->push_back({epoch, epoch_base / n, epoch_stccl / n, epoch_total / n});
    }
  }
  return translator;
}

EvalMetrics eval_translator(const std::function<Tensor(const Tensor&, int)>& translate,
                            const CorpusIndex& corpus, const std::vector<int>& test_utts,
                            const StyleTargets& targets) {
  if (test_utts.empty()) throw ArgumentError("eval_translator: empty split");
  std::vector<int> target_emotions;
  for (int e = 0; e < static_cast<int>(corpus.emotions().size()); ++e) {
    if (corpus.emotions()[static_cast<std::size_t>(e)] != "neutral") target_emotions.push_back(e);
  }

  double mouth_sum = 0.0, mae_sum = 0.0, style_sum = 0.0;
  long long frames_seen = 0;
  for (const std::string& speaker : corpus.speakers()) {
    for (int u : test_utts) {
      const std::string utt = corpus.utterances()[static_cast<std::size_t>(u)];
      const std::vector<Tensor> source = corpus.sequence(speaker, "neutral", utt);
      for (int e : target_emotions) {
        const std::string& emotion = corpus.emotions()[static_cast<std::size_t>(e)];
        for (int t = 0; t < static_cast<int>(source.size()); ++t) {
          const Tensor out = translate(source[static_cast<std::size_t>(t)], e);
          mouth_sum += std::fabs(measure_mouth_openness(out) -
                                 measure_mouth_openness(source[static_cast<std::size_t>(t)]));

          const Tensor truth = corpus.frame(speaker, emotion, utt, t);
          double mae = 0.0;
          for (std::int64_t i = 0; i < out.numel(); ++i) mae += std::fabs(out[i] - truth[i]);
          mae_sum += mae / static_cast<double>(out.numel());

          const Tensor bm = block_means_plain(out, targets.block);
          const Tensor& target = targets.per_emotion[static_cast<std::size_t>(e)];
          double sq = 0.0, wsum = 0.0;
          for (std::int64_t i = 0; i < bm.numel(); ++i) {
            const double w = targets.block_mask[i];
            const double d = bm[i] - target[i];
            sq += w * d * d;
            wsum += w;
          }
          style_sum += std::sqrt(sq / wsum);
          ++frames_seen;
        }
      }
    }
  }
  EvalMetrics metrics;
  metrics.mouth_traj_err = mouth_sum / frames_seen;
  metrics.paired_mae = mae_sum / frames_seen;
  metrics.style_err = style_sum / frames_seen;
  return metrics;
}

std::vector<ExperimentRow> run_experiment(const CorpusIndex& corpus,
                                          const MetricCheckpoint* checkpoint,
                                          const ExperimentConfig& config, int jobs) {
  config.validate();
  if (config.variant != Variant::kBaseline && checkpoint == nullptr) {
    throw ArgumentError("variant " + std::string(to_string(config.variant)) +
                            " needs a metric checkpoint",
                        "missing_checkpoint");
  }
  const Split split = split_utterances(static_cast<int>(corpus.utterances().size()),
                                       config.train_fraction, config.split_seed);
  const StyleTargets targets =
      compute_style_targets(corpus, split.train_utts, corpus.image_size() / 8);

  std::vector<ExperimentRow> rows(config.seeds.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run_one = [&](std::size_t index) {
    try {
      const std::uint64_t seed = config.seeds[index];
      ToyTranslator translator = train_translator(corpus, config, checkpoint, seed);
      ExperimentRow row;
      row.variant = to_string(config.variant);
      row.seed = seed;
      row.metrics = eval_translator(
          [&](const Tensor& img, int e) { return translator.translate(img, e); }, corpus,
          split.test_utts, targets);
      rows[index] = std::move(row);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(config.seeds.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= rows.size()) return;
          run_one(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::string results_csv(const std::vector<ExperimentRow>& rows) {
  std::ostringstream os;
  os << "variant,seed,mouth_traj_err,paired_mae,style_err\n";
  char buf[128];
  for (const ExperimentRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%llu,%.17g,%.17g,%.17g\n", r.variant.c_str(),
                  static_cast<unsigned long long>(r.seed), r.metrics.mouth_traj_err,
                  r.metrics.paired_mae, r.metrics.style_err);
    os << buf;
  }
  return os.str();
}

std::vector<ExperimentRow> parse_results_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ArgumentError("empty results csv");
  std::vector<ExperimentRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    std::vector<std::string> cols;
    while (std::getline(ls, token, ',')) cols.push_back(token);
    if (cols.size() != 5) throw ArgumentError("results row has wrong arity");
    ExperimentRow row;
    row.variant = cols[0];
    row.seed = std::stoull(cols[1]);
    row.metrics.mouth_traj_err = std::stod(cols[2]);
    row.metrics.paired_mae = std::stod(cols[3]);
    row.metrics.style_err = std::stod(cols[4]);
    rows.push_back(std::move(row));
  }
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TrendReport evaluate_trends(const std::vector<ExperimentRow>& rows) {
  auto collect = [&rows](Variant v, auto field) {
    std::vector<double> out;
    for (const ExperimentRow& r : rows) {
      if (r.variant == to_string(v)) out.push_back(field(r.metrics));
    }
    if (out.empty()) throw ArgumentError(std::string("no rows for variant ") + to_string(v));
    return out;
  };
  auto mouth = [](const EvalMetrics& m) { return m.mouth_traj_err; };
  auto mae = [](const EvalMetrics& m) { return m.paired_mae; };

  TrendReport report;
  report.baseline_mouth = median(collect(Variant::kBaseline, mouth));
  report.sccl_mouth = median(collect(Variant::kSccl, mouth));
  report.tccl_mouth = median(collect(Variant::kTccl, mouth));
  report.stccl_mouth = median(collect(Variant::kStccl, mouth));
  report.stccl_caas_mouth = median(collect(Variant::kStcclCaas, mouth));
  report.baseline_mae = median(collect(Variant::kBaseline, mae));
  report.stccl_caas_mae = median(collect(Variant::kStcclCaas, mae));

  report.improvement_ok = report.stccl_caas_mouth <= 0.9 * report.baseline_mouth &&
                          report.stccl_caas_mae <= 1.05 * report.baseline_mae;
  report.ablation_ok =
      report.stccl_mouth <= 1.02 * std::min(report.sccl_mouth, report.tccl_mouth);
  report.caas_ok = report.stccl_caas_mouth <= 1.02 * report.stccl_mouth;
  return report;
}

}  // namespace stccl
