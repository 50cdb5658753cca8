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

#include "stccl/integration.hpp"

#include <cmath>

#include "stccl/errors.hpp"
#include "stccl/rng.hpp"

namespace stccl {

NoiseSchedule NoiseSchedule::cosine(int steps) {
  if (steps < 1) throw ArgumentError("schedule needs at least one step");
  const double s = 0.008;
  auto f = [&](double t) {
    const double v = std::cos((t / steps + s) / (1.0 + s) * M_PI / 2.0);
    return v * v;
  };
  NoiseSchedule schedule;
  schedule.alpha_bar.reserve(static_cast<std::size_t>(steps));
  const double f0 = f(0.0);
  for (int t = 0; t < steps; ++t) {
    schedule.alpha_bar.push_back(std::clamp(f(static_cast<double>(t)) / f0, 1e-12, 1.0));
  }
  schedule.validate();
  return schedule;
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ArgumentError("schedule needs at least one step");
  NoiseSchedule schedule;
  schedule.alpha_bar.reserve(static_cast<std::size_t>(steps));
  double acc = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double beta =
        steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * t / (steps - 1);
    acc *= 1.0 - beta;
    schedule.alpha_bar.push_back(acc);
  }
  schedule.validate();
  return schedule;
}

void NoiseSchedule::validate() const {
  if (alpha_bar.empty()) throw ArgumentError("empty noise schedule");
  if (alpha_bar.front() < 0.99) throw ArgumentError("alpha_bar[0] must be ~1");
  double prev = 1.0;
  for (double a : alpha_bar) {
    if (!(a > 0.0) || a > 1.0) throw ArgumentError("alpha_bar values must lie in (0,1]");
    if (a > prev + 1e-12) throw ArgumentError("alpha_bar must be non-increasing");
    prev = a;
  }
}

void GateConfig::validate() const {
  if (total_steps < 1) throw ArgumentError("total_steps must be >= 1");
  if (threshold < 0 || threshold > total_steps) {
    throw ArgumentError("gate threshold must lie in [0, total_steps]");
  }
}

void SupervisionContext::validate() const {
  if (checkpoint == nullptr) throw ArgumentError("supervision context needs a checkpoint");
  if (!spatial_on && !temporal_on) {
    throw ArgumentError("at least one of spatial/temporal supervision must be on");
  }
  if (n_anchors < 1 || temporal_locations < 1) throw ArgumentError("sampling counts must be >= 1");
}

std::uint64_t video_frame_seed(std::uint64_t seed, int frame) {
  return Rng::mix(seed, 0x66726d00ULL + static_cast<std::uint64_t>(frame));
}

Supervisor::Supervisor(const SupervisionContext& ctx) : ctx_(ctx) {
  ctx_.validate();
  MetricCheckpoint effective = *ctx.checkpoint;
  effective.caas.enabled = ctx.caas_on;
  model_ = std::make_unique<MetricModel>(effective, /*trainable=*/false);
}

namespace {

void check_streams(const std::vector<Tensor>& anchor, const std::vector<Var>& generated) {
  if (anchor.size() != generated.size()) {
    throw ArgumentError("anchor and generated streams must have equal frame counts");
  }
  if (anchor.empty()) throw ArgumentError("empty supervision streams");
  for (std::size_t t = 0; t < anchor.size(); ++t) {
    if (!anchor[t].same_shape(generated[t].value())) {
      throw ArgumentError("anchor/generated frame shape mismatch at frame " + std::to_string(t));
    }
  }
}

}  // namespace

SupervisionResult Supervisor::video(const std::vector<Tensor>& source,
                                    const std::vector<Var>& generated,
                                    std::uint64_t call_seed) const {
  check_streams(source, generated);
  const int frame_count = static_cast<int>(source.size());
  if (ctx_.temporal_on && frame_count < 4) {
    throw ArgumentError("temporal supervision needs at least 4 frames");
  }

  SupervisionResult result;
  std::vector<ContrastiveTerm> terms;
  std::vector<Var> anchors;
  anchors.reserve(source.size());
  for (const Tensor& frame : source) anchors.push_back(Var::constant(frame));

  if (ctx_.spatial_on) {
    for (int f = 0; f < frame_count; ++f) {
      auto frame_terms = spatial_terms(*model_, anchors[static_cast<std::size_t>(f)],
                                       generated[static_cast<std::size_t>(f)],
                                       video_frame_seed(call_seed, f), ctx_.n_anchors,
                                       &result.diagnostics, ctx_.probe);
      terms.insert(terms.end(), std::make_move_iterator(frame_terms.begin()),
                   std::make_move_iterator(frame_terms.end()));
    }
  }
  if (ctx_.temporal_on) {
    auto t_terms = temporal_terms(*model_, anchors, generated, call_seed, ctx_.temporal_locations,
                                  &result.diagnostics, ctx_.probe);
    terms.insert(terms.end(), std::make_move_iterator(t_terms.begin()),
                 std::make_move_iterator(t_terms.end()));
  }
  result.loss = reduce_terms(terms, ctx_.caas_on, &result.diagnostics);
  return result;
}

SupervisionResult Supervisor::pseudo_pair(const std::vector<Tensor>& neutral,
                                          const std::vector<Var>& emotional,
                                          std::uint64_t call_seed) const {
  // Identical math; the generated neutral stream plays the anchor role.
  return video(neutral, emotional, call_seed);
}

SupervisionResult Supervisor::diffusion(const std::vector<Tensor>& anchor_x0,
                                        const std::vector<Var>& target_x0, int t,
                                        const GateConfig& gate, std::uint64_t call_seed) const {
  gate.validate();
  if (t < 0 || t >= gate.total_steps) throw ArgumentError("diffusion timestep out of range");
  if (t >= gate.threshold) {
    SupervisionResult result;
    result.loss = Var::scalar(0.0);
    result.gated = true;
    return result;
  }
  return video(anchor_x0, target_x0, call_seed);
}

SupervisionResult supervise_video(const SupervisionContext& ctx, const std::vector<Tensor>& source,
                                  const std::vector<Var>& generated) {
  return Supervisor(ctx).video(source, generated, ctx.seed);
}

SupervisionResult supervise_pseudo_pair(const SupervisionContext& ctx,
                                        const std::vector<Tensor>& neutral,
                                        const std::vector<Var>& emotional) {
  return Supervisor(ctx).pseudo_pair(neutral, emotional, ctx.seed);
}

SupervisionResult supervise_diffusion(const SupervisionContext& ctx,
                                      const std::vector<Tensor>& anchor_x0,
                                      const std::vector<Var>& target_x0, int t,
                                      const GateConfig& gate) {
  // Build nothing heavy before the gate decision: gated calls must not
  // touch the backbone at all.
  gate.validate();
  if (t < 0 || t >= gate.total_steps) throw ArgumentError("diffusion timestep out of range");
  if (t >= gate.threshold) {
    SupervisionResult result;
    result.loss = Var::scalar(0.0);
    result.gated = true;
    return result;
  }
  return Supervisor(ctx).video(anchor_x0, target_x0, ctx.seed);
}

namespace {

double schedule_alpha(const NoiseSchedule& schedule, int t, bool clamped) {
  schedule.validate();
  if (t < 0 || t >= schedule.steps()) throw ArgumentError("timestep outside the schedule");
  double abar = schedule.alpha_bar[static_cast<std::size_t>(t)];
  if (abar < 1e-8) {
    if (!clamped) throw NumericError("alpha_bar too small for a stable x0 estimate");
    abar = 1e-8;
  }
  return abar;
}

}  // namespace

Tensor estimate_x0(const Tensor& x_t, const Tensor& eps_hat, int t, const NoiseSchedule& schedule,
                   bool clamped) {
  if (!x_t.same_shape(eps_hat)) throw ArgumentError("estimate_x0: shape mismatch");
  const double abar = schedule_alpha(schedule, t, clamped);
  const double inv_sqrt = 1.0 / std::sqrt(abar);
  const double noise_scale = std::sqrt(1.0 - abar);
  Tensor out = x_t;
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out[i] = (out[i] - noise_scale * eps_hat[i]) * inv_sqrt;
  }
  return out;
}

Var estimate_x0(const Var& x_t, const Var& eps_hat, int t, const NoiseSchedule& schedule,
                bool clamped) {
  if (!x_t.value().same_shape(eps_hat.value())) throw ArgumentError("estimate_x0: shape mismatch");
  const double abar = schedule_alpha(schedule, t, clamped);
  const double inv_sqrt = 1.0 / std::sqrt(abar);
  const double noise_scale = std::sqrt(1.0 - abar);
  return ops::scale(ops::sub(x_t, ops::scale(eps_hat, noise_scale)), inv_sqrt);
}

std::vector<float> estimate_x0_f32(const std::vector<float>& x_t, const std::vector<float>& eps_hat,
                                   int t, const NoiseSchedule& schedule, bool clamped) {
  if (x_t.size() != eps_hat.size()) throw ArgumentError("estimate_x0: shape mismatch");
  const float abar = static_cast<float>(schedule_alpha(schedule, t, clamped));
  const float inv_sqrt = 1.0f / std::sqrt(abar);
  const float noise_scale = std::sqrt(1.0f - abar);
  std::vector<float> out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (x_t[i] - noise_scale * eps_hat[i]) * inv_sqrt;
  }
  return out;
}

}  // namespace stccl
