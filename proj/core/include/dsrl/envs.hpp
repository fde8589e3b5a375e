// Copyright 2026 The dsrl Authors
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

#include <vector>

#include "dsrl/dsae.hpp"
#include "dsrl/featsel.hpp"
#include "dsrl/kalman.hpp"
#include "dsrl/rl_loop.hpp"
#include "dsrl/sim2d.hpp"

namespace dsrl {

/// Samples an action from the controller at (x, t) using the given stream.
Eigen::Vector2d sample_action(const LinearGaussianPolicy& pol, const Vec& x, int t, Rng& rng);

/// Blind phase: the controller sees only the gripper, x = [pos; vel].
class Sim2dBlindEnv : public ControlEnv {
 public:
  Sim2dBlindEnv(const EpisodeConfig& ep, const WorldState& init) : ep_(ep), init_(init) {}

  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  int horizon() const override { return ep_.T; }
  Trajectory rollout(const LinearGaussianPolicy& pol, std::uint64_t seed) override;

  /// As rollout, but also emits the world trace (states[t] precedes
  /// actions[t]) and the world after the last step.
  Trajectory rollout_record(const LinearGaussianPolicy& pol, std::uint64_t seed,
                            std::vector<WorldState>* trace, WorldState* final_world);

  static Vec observe(const WorldState& w);

 private:
  EpisodeConfig ep_;
  WorldState init_;
};

/// Vision phase: each step renders the scene with fresh pixel noise,
/// encodes it, gates each kept feature by presence, runs the per-feature
/// Kalman filters, and assembles x = [gripper pos; vel; filtered points;
/// filtered velocities].
class Sim2dVisionEnv : public ControlEnv {
 public:
  Sim2dVisionEnv(const EpisodeConfig& ep, const RenderConfig& render, const DsaeParams& params,
                 const FeatureSelection& sel, const std::vector<KalmanModel>& models,
                 const WorldState& init);

  int state_dim() const override { return 4 + 4 * static_cast<int>(sel_.kept.size()); }
  int action_dim() const override { return 2; }
  int horizon() const override { return ep_.T; }
  Trajectory rollout(const LinearGaussianPolicy& pol, std::uint64_t seed) override;

  Trajectory rollout_record(const LinearGaussianPolicy& pol, std::uint64_t seed,
                            std::vector<WorldState>* trace, WorldState* final_world);

 private:
  EpisodeConfig ep_;
  RenderConfig render_;
  const DsaeParams& params_;
  FeatureSelection sel_;
  std::vector<KalmanModel> models_;  // one per kept channel, same order
  WorldState init_;
};

}  // namespace dsrl
