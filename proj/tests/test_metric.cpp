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

#include "stccl/errors.hpp"
#include "stccl/metric.hpp"
#include "stccl/rng.hpp"

using namespace stccl;

namespace {

BackboneSpec tiny_spec(int size = 8) {
  BackboneSpec spec;
  spec.stage_channels = {2, 3, 4, 5};
  spec.stage_stride = 1;
  spec.in_channels = 3;
  spec.input_h = size;
  spec.input_w = size;
  return spec;
}

MetricCheckpoint tiny_checkpoint(Mechanism mechanism, std::uint64_t seed = 3,
                                 bool caas_on = true) {
  HeadConfig head;
  head.hidden = 8;
  head.output = 6;
  CAASConfig caas;
  caas.enabled = caas_on;
  return make_untrained_checkpoint(tiny_spec(), mechanism, CorrelationOptions{},
                                   ContrastiveConfig{}, caas, head, seed);
}

Tensor random_image(int size, Rng& rng) {
  Tensor img({3, size, size});
  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform(0.05, 0.95);
  return img;
}

Var vec(std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  return Var::constant(Tensor::from({n}, std::move(values)));
}

}  // namespace

TEST_CASE("config validation") {
  ContrastiveConfig c;
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  CAASConfig w;
  w.lambda = -1.0;
  CHECK_THROWS_AS(w.validate(), ArgumentError);
}

TEST_CASE("projection head: identity-initialized layers rectify the input") {
  ProjectionHead head;
  const int n = 4;
  head.w1 = Tensor({n, n}, 0.0);
  head.w2 = Tensor({n, n}, 0.0);
  for (int i = 0; i < n; ++i) {
    head.w1.at({i, i}) = 1.0;
    head.w2.at({i, i}) = 1.0;
  }
  head.b1 = Tensor({n}, 0.0);
  head.b2 = Tensor({n}, 0.0);
  HeadVars vars = HeadVars::from(head, false);

  Var d = vec({0.5, -0.25, 1.0, -2.0});
  Var raw = project(vars, d, /*normalize=*/false);
  CHECK(raw.value()[0] == doctest::Approx(0.5));
  CHECK(raw.value()[1] == 0.0);
  CHECK(raw.value()[2] == doctest::Approx(1.0));
  CHECK(raw.value()[3] == 0.0);

  bool degenerate = false;
  Var normalized = project(vars, d, /*normalize=*/true, &degenerate);
  CHECK_FALSE(degenerate);
  const double norm = std::sqrt(0.25 + 1.0);
  CHECK(normalized.value()[0] == doctest::Approx(0.5 / norm));

  // zero descriptor with zero biases: zero pre-norm embedding, flagged
  Var zero = project(vars, vec({0, 0, 0, 0}), true, &degenerate);
  CHECK(degenerate);
  CHECK(zero.value().max_abs() == 0.0);

  CHECK_THROWS_AS(project(vars, vec({1, 2}), true), ArgumentError);

  // replay-identical output through a random head
  Rng rng(1);
  ProjectionHead random_head = ProjectionHead::init(4, 8, 6, rng);
  HeadVars rv = HeadVars::from(random_head, false);
  Var a = project(rv, d, true);
  Var b = project(rv, d, true);
  for (int i = 0; i < 6; ++i) CHECK(a.value()[i] == b.value()[i]);
}

TEST_CASE("info_nce closed forms") {
  // uniform logits -> ln(1+m), any temperature
  for (int m : {1, 8, 32}) {
    for (double tau : {0.07, 1.0, 3.5}) {
      Var a = vec({1.0, 0.0});
      std::vector<Var> negs(static_cast<std::size_t>(m), vec({1.0, 0.0}));
      const double loss = info_nce(a, vec({1.0, 0.0}), negs, tau).value().item();
      CHECK(std::fabs(loss - std::log1p(static_cast<double>(m))) < 1e-9);
    }
  }

  // separated case at tau = 0.07
  {
    Var a = vec({1.0, 0.0});
    std::vector<Var> negs(8, vec({-1.0, 0.0}));
    const double loss = info_nce(a, vec({1.0, 0.0}), negs, 0.07).value().item();
    const double expected = std::log1p(8.0 * std::exp(-2.0 / 0.07));
    CHECK(std::fabs(loss - expected) < 1e-9);
    CHECK(loss > 0.0);
  }

  // m=1 with positive logit equal to the negative logit -> ln 2
  {
    const double loss =
        info_nce(vec({0.3, 0.4}), vec({1.0, 1.0}), {vec({1.0, 1.0})}, 0.5).value().item();
    CHECK(std::fabs(loss - std::log(2.0)) < 1e-12);
  }

  CHECK_THROWS_AS(info_nce(vec({1.0}), vec({1.0}), {vec({1.0})}, 0.0), ArgumentError);
  CHECK_THROWS_AS(info_nce(vec({1.0}), vec({1.0}), {}, 0.07), ArgumentError);
}

TEST_CASE("info_nce positivity and permutation invariance") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_int(6));
    auto random_vec = [&]() {
      std::vector<double> v(6);
      for (double& x : v) x = rng.uniform(-1.0, 1.0);
      return Var::constant(Tensor::from({6}, std::move(v)));
    };
    Var a = random_vec(), p = random_vec();
    std::vector<Var> negs;
    for (int k = 0; k < m; ++k) negs.push_back(random_vec());

    const double loss = info_nce(a, p, negs, 0.07).value().item();
    CHECK(loss > 0.0);

    std::vector<Var> shuffled = negs;
    Rng perm(trial);
    perm.shuffle(shuffled);
    const double loss2 = info_nce(a, p, shuffled, 0.07).value().item();
    CHECK(std::fabs(loss - loss2) < 1e-12);
  }
}

TEST_CASE("caas weights: closed forms, bounds, monotonicity") {
  CAASConfig cfg;  // lambda = r = 2
  // s = 0
  CHECK(caas_weight(Tensor({4}, 0.0), cfg) == doctest::Approx(0.5));
  // s = ln 3 via a 1-dim descriptor
  CHECK(caas_weight(Tensor::from({1}, {std::log(3.0)}), cfg) == doctest::Approx(1.125));

  double prev = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double s = i * 0.05;
    const double w = caas_weight(Tensor::from({1}, {s}), cfg);
    CHECK(w >= 0.5);
    CHECK(w < 2.0);
    if (i > 0) CHECK(w > prev);
    prev = w;
  }
  // dimension-normalized scalarization: duplicated entries keep the weight
  const double w1 = caas_weight(Tensor::from({1}, {0.7}), cfg);
  const double w4 = caas_weight(Tensor({4}, 0.7), cfg);
  CHECK(w1 == doctest::Approx(w4));
}

TEST_CASE("constant feature maps give the uniform ln 9 loss per term") {
  for (Mechanism mechanism : {Mechanism::kVisualDisparity, Mechanism::kCorrelationMatrix}) {
    MetricCheckpoint ckpt = tiny_checkpoint(mechanism);
    MetricModel model(ckpt, false);
    // the zero image is the one input whose maps stay constant through the
    // zero-padded convolutions
    Tensor zero_img({3, 8, 8}, 0.0);
    Tensor flat({3, 8, 8}, 0.4);
    LossDiagnostics diag;
    auto terms =
        spatial_terms(model, Var::constant(zero_img), Var::constant(zero_img), 5, 2, &diag);
    REQUIRE(!terms.empty());
    for (const auto& term : terms) {
      CHECK(term.loss.value().item() == doctest::Approx(std::log(9.0)).epsilon(1e-9));
    }
    // static sequences with VD: all temporal descriptors zero, degenerate
    // (the CM window near sequence edges has non-uniform zero padding, so
    // the uniform-logit value is a VD property)
    std::vector<Var> frames(6, Var::constant(flat));
    LossDiagnostics tdiag;
    auto t_terms = temporal_terms(model, frames, frames, 6, 2, &tdiag);
    for (const auto& term : t_terms) {
      if (mechanism == Mechanism::kVisualDisparity) {
        CHECK(term.loss.value().item() == doctest::Approx(std::log(9.0)).epsilon(1e-9));
      } else {
        CHECK(term.loss.value().item() > 0.0);
        CHECK(std::isfinite(term.loss.value().item()));
      }
    }
    if (mechanism == Mechanism::kVisualDisparity) CHECK(tdiag.degenerate_embeddings > 0);
  }
}

TEST_CASE("identity pairs score below the uniform baseline on average") {
  MetricCheckpoint ckpt = tiny_checkpoint(Mechanism::kVisualDisparity);
  MetricModel model(ckpt, false);
  double total = 0.0;
  int count = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    Tensor img = random_image(8, rng);
    LossDiagnostics diag;
    Var loss = sccl_loss(model, Var::constant(img), Var::constant(img), seed, 2, &diag);
    total += loss.value().item();
    count += diag.spatial_terms;
  }
  CHECK(total / count < std::log(9.0));
}

TEST_CASE("loss sums equal the explicit term-by-term oracle and scale with anchors") {
  MetricCheckpoint ckpt = tiny_checkpoint(Mechanism::kCorrelationMatrix);
  MetricModel model(ckpt, false);
  Rng rng(7);
  Tensor x = random_image(8, rng), y = random_image(8, rng);

  LossDiagnostics diag;
  auto terms = spatial_terms(model, Var::constant(x), Var::constant(y), 11, 2, &diag);
  const double reduced = reduce_terms(terms, false).value().item();
  double manual = 0.0;
  for (const auto& t : terms) manual += t.loss.value().item();
  CHECK(reduced == doctest::Approx(manual).epsilon(1e-12));
  CHECK(static_cast<int>(terms.size()) == 4 * 2 * 8);  // levels x anchors x ring

  auto doubled = spatial_terms(model, Var::constant(x), Var::constant(y), 11, 4, nullptr);
  CHECK(doubled.size() == 2 * terms.size());
}

TEST_CASE("temporal term count matches hand enumeration at T=4") {
  MetricCheckpoint ckpt = tiny_checkpoint(Mechanism::kVisualDisparity);
  MetricModel model(ckpt, false);
  Rng rng(8);
  std::vector<Var> xs, ys;
  for (int t = 0; t < 4; ++t) {
    xs.push_back(Var::constant(random_image(8, rng)));
    ys.push_back(Var::constant(random_image(8, rng)));
  }
  auto terms = temporal_terms(model, xs, ys, 3, 2, nullptr);
  // levels x locations x two positive directions
  CHECK(static_cast<int>(terms.size()) == 4 * 2 * 2);
  std::vector<Var> three(xs.begin(), xs.begin() + 3);
  CHECK_THROWS_AS(temporal_terms(model, three, three, 3, 2, nullptr), ArgumentError);
}

TEST_CASE("stccl decomposition identities") {
  MetricCheckpoint caas_off = tiny_checkpoint(Mechanism::kVisualDisparity, 3, false);
  MetricModel model(caas_off, false);
  Rng rng(9);
  Tensor x = random_image(8, rng), y = random_image(8, rng);
  std::vector<Var> xs, ys;
  for (int t = 0; t < 6; ++t) {
    xs.push_back(Var::constant(random_image(8, rng)));
    ys.push_back(Var::constant(random_image(8, rng)));
  }

  const std::uint64_t seed = 17;
  const double stccl =
      stccl_loss(model, Var::constant(x), Var::constant(y), xs, ys, seed, 2, 2).value().item();
  const double sccl = sccl_loss(model, Var::constant(x), Var::constant(y), seed, 2).value().item();
  const double tccl = tccl_loss(model, xs, ys, seed, 2).value().item();
  CHECK(std::fabs(stccl - (sccl + tccl)) < 1e-9);

  // all raw descriptors zero (zero images) with CAAS on: every weight 0.5
  MetricCheckpoint caas_on = tiny_checkpoint(Mechanism::kVisualDisparity, 3, true);
  MetricModel on(caas_on, false);
  Tensor zero_img({3, 8, 8}, 0.0);
  std::vector<Var> zero_seq(6, Var::constant(zero_img));
  const double weighted =
      stccl_loss(on, Var::constant(zero_img), Var::constant(zero_img), zero_seq, zero_seq, seed, 2,
                 2)
          .value()
          .item();
  MetricModel off(caas_off, false);
  const double unweighted =
      stccl_loss(off, Var::constant(zero_img), Var::constant(zero_img), zero_seq, zero_seq, seed,
                 2, 2)
          .value()
          .item();
  CHECK(weighted == doctest::Approx(0.5 * unweighted).epsilon(1e-9));

  // mixed magnitudes: equals the explicit weighted summation oracle
  MetricModel mixed(caas_on, false);
  LossDiagnostics diag;
  auto terms = spatial_terms(mixed, Var::constant(x), Var::constant(y), seed, 2, &diag);
  auto t_terms = temporal_terms(mixed, xs, ys, seed, 2, &diag);
  double oracle = 0.0;
  for (const auto& t : terms) oracle += t.weight * t.loss.value().item();
  for (const auto& t : t_terms) oracle += t.weight * t.loss.value().item();
  const double full =
      stccl_loss(mixed, Var::constant(x), Var::constant(y), xs, ys, seed, 2, 2).value().item();
  CHECK(full == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("generated-stream gradients match finite differences on a sampled subset") {
  MetricCheckpoint ckpt = tiny_checkpoint(Mechanism::kVisualDisparity);
  MetricModel model(ckpt, false);
  Rng rng(10);
  Tensor x = random_image(8, rng);
  Tensor y0 = random_image(8, rng);

  auto loss_of = [&](const Var& y) {
    return sccl_loss(model, Var::constant(x), y, 23, 2, nullptr);
  };

  Var leaf = Var::leaf(y0);
  Var loss = loss_of(leaf);
  backward(loss);
  const Tensor analytic = leaf.grad();
  CHECK(analytic.max_abs() > 0.0);

  const double h = 1e-5;
  Rng pick(11);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::int64_t i = pick.uniform_int(y0.numel());
    Tensor plus = y0, minus = y0;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (loss_of(Var::constant(plus)).value().item() -
                       loss_of(Var::constant(minus)).value().item()) /
                      (2.0 * h);
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(fd), 1e-8});
    worst = std::max(worst, std::fabs(analytic[i] - fd) / denom);
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("train_metric: smoke descent, determinism, and zero learning rate") {
  // tiny paired dataset: y is a slightly perturbed copy of x
  Rng rng(12);
  PairedDataset data;
  for (int p = 0; p < 4; ++p) {
    AlignedSequencePair pair;
    pair.id = "pair" + std::to_string(p);
    for (int t = 0; t < 8; ++t) {
      Tensor x = random_image(8, rng);
      Tensor y = x;
      for (std::int64_t i = 0; i < y.numel(); ++i) {
        y[i] = std::clamp(y[i] + rng.uniform(-0.02, 0.02), 0.0, 1.0);
      }
      pair.x_frames.push_back(std::move(x));
      pair.y_frames.push_back(std::move(y));
    }
    data.push_back(std::move(pair));
  }

  MetricTrainConfig cfg;
  cfg.mechanism = Mechanism::kVisualDisparity;
  cfg.head.hidden = 8;
  cfg.head.output = 6;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-3;
  cfg.n_anchors = 2;
  cfg.temporal_locations = 2;
  cfg.temporal_window = 8;

  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    cfg.seed = seed;
    std::vector<EpochStats> curve;
    MetricCheckpoint ckpt = train_metric(data, tiny_spec(), cfg, &curve);
    REQUIRE(curve.size() == 3);
    for (const EpochStats& row : curve) CHECK(std::isfinite(row.stccl));
    const bool descent =
        curve[1].stccl <= curve[0].stccl || curve[2].stccl <= curve[1].stccl;
    CHECK(descent);
    CHECK(ckpt.meta.epochs == 3);
  }

  // determinism: same seed twice gives bitwise-identical parameters
  cfg.seed = 5;
  cfg.epochs = 2;
  MetricCheckpoint a = train_metric(data, tiny_spec(), cfg);
  MetricCheckpoint b = train_metric(data, tiny_spec(), cfg);
  for (std::size_t s = 0; s < a.backbone.weights.size(); ++s) {
    for (std::int64_t i = 0; i < a.backbone.weights[s].numel(); ++i) {
      CHECK(a.backbone.weights[s][i] == b.backbone.weights[s][i]);
    }
  }
  for (int d = 0; d < 2; ++d) {
    for (std::size_t l = 0; l < a.heads[d].size(); ++l) {
      for (std::int64_t i = 0; i < a.heads[d][l].w1.numel(); ++i) {
        CHECK(a.heads[d][l].w1[i] == b.heads[d][l].w1[i]);
      }
    }
  }

  // learning rate 0: parameters stay at their seeded initialization
  cfg.learning_rate = 0.0;
  MetricCheckpoint frozen = train_metric(data, tiny_spec(), cfg);
  MetricCheckpoint init = make_untrained_checkpoint(tiny_spec(), cfg.mechanism, cfg.correlation,
                                                    cfg.contrastive, cfg.caas, cfg.head, cfg.seed);
  for (std::size_t s = 0; s < frozen.backbone.weights.size(); ++s) {
    for (std::int64_t i = 0; i < frozen.backbone.weights[s].numel(); ++i) {
      CHECK(frozen.backbone.weights[s][i] == init.backbone.weights[s][i]);
    }
  }

  CHECK_THROWS_AS(train_metric({}, tiny_spec(), cfg), ArgumentError);
}
