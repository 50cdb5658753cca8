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

#include <cstdint>
#include <memory>
#include <vector>

#include "stccl/metric.hpp"

namespace stccl {

struct NoiseSchedule {
  std::vector<double> alpha_bar;  // cumulative products, (0,1], non-increasing

  int steps() const { return static_cast<int>(alpha_bar.size()); }
  static NoiseSchedule cosine(int steps = 1000);
  static NoiseSchedule linear(int steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);
  void validate() const;
};

struct GateConfig {
  int threshold = 500;
  int total_steps = 1000;
  void validate() const;
};

// Toggles mirror the ablation axes; the anchor stream is consumed as plain
// tensors, so no gradient can reach it.
struct SupervisionContext {
  const MetricCheckpoint* checkpoint = nullptr;
  bool spatial_on = true;
  bool temporal_on = true;
  bool caas_on = true;
  int n_anchors = 4;
  int temporal_locations = 4;
  std::uint64_t seed = 0;
  EvalCounter* probe = nullptr;

  void validate() const;
};

struct SupervisionResult {
  Var loss;
  LossDiagnostics diagnostics;
  bool gated = false;
};

// Per-frame sampling seed used by the adapters; exposed so callers can
// reproduce the spatial path exactly.
std::uint64_t video_frame_seed(std::uint64_t seed, int frame);

// One model materialization reused across calls (training loops).
class Supervisor {
 public:
  explicit Supervisor(const SupervisionContext& ctx);

  SupervisionResult video(const std::vector<Tensor>& source, const std::vector<Var>& generated,
                          std::uint64_t call_seed) const;
  SupervisionResult pseudo_pair(const std::vector<Tensor>& neutral,
                                const std::vector<Var>& emotional, std::uint64_t call_seed) const;
  SupervisionResult diffusion(const std::vector<Tensor>& anchor_x0,
                              const std::vector<Var>& target_x0, int t, const GateConfig& gate,
                              std::uint64_t call_seed) const;

 private:
  SupervisionContext ctx_;
  std::unique_ptr<MetricModel> model_;
};

SupervisionResult supervise_video(const SupervisionContext& ctx, const std::vector<Tensor>& source,
                                  const std::vector<Var>& generated);

SupervisionResult supervise_pseudo_pair(const SupervisionContext& ctx,
                                        const std::vector<Tensor>& neutral,
                                        const std::vector<Var>& emotional);

SupervisionResult supervise_diffusion(const SupervisionContext& ctx,
                                      const std::vector<Tensor>& anchor_x0,
                                      const std::vector<Var>& target_x0, int t,
                                      const GateConfig& gate);

// Variance-preserving single-step inverse:
// x0 = (x_t - sqrt(1 - abar_t) * eps) / sqrt(abar_t).
Tensor estimate_x0(const Tensor& x_t, const Tensor& eps_hat, int t, const NoiseSchedule& schedule,
                   bool clamped = false);
Var estimate_x0(const Var& x_t, const Var& eps_hat, int t, const NoiseSchedule& schedule,
                bool clamped = false);
// float32 evaluation path (serialization-precision contract).
std::vector<float> estimate_x0_f32(const std::vector<float>& x_t, const std::vector<float>& eps_hat,
                                   int t, const NoiseSchedule& schedule, bool clamped = false);

}  // namespace stccl
