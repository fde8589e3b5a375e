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

#include <cstdint>
#include <string>

#include "dsrl/dsae.hpp"
#include "dsrl/sim2d.hpp"

namespace dsrl {

struct RlConfig {
  int num_samples = 5;       // rollouts per iteration
  double eps_base = 0.1;     // KL bound = eps_base * T * action_dim
  int blind_iters = 8;
  int vision_iters = 15;
  int gmm_components = 8;
  double prior_strength = 1.0;
  double pd_kp = 2.0;
  double pd_kd = 1.0;
  double pd_noise = 1.0;  // exploration std of the initial controller
};

struct CollectConfig {
  int trials = 50;    // blind rollouts recorded into the image dataset
  int heldout = 2;    // trailing episodes reserved for tracking evaluation
};

struct GoalConfig {
  double block_x = 0.75;
  double block_y = 0.5;
  // Where the gripper should end up in the goal scene. For pushing this sits
  // just behind the block along the push direction.
  double gripper_x = 0.60;
  double gripper_y = 0.5;
  // Exploration target for the blind phase; defaults to the block goal so
  // the blind controller plows through the block and generates contact-rich
  // images.
  double blind_target_x = 0.75;
  double blind_target_y = 0.5;
  int goal_window = 50;  // goal frames to render and average
  double beta = 0.95;    // presence threshold for pruning
};

struct EvalConfig {
  int trials = 10;
  double success_frac = 0.10;  // of workspace width
};

struct ExperimentConfig {
  std::string task = "push";
  std::uint64_t seed = 1;
  EpisodeConfig episode;
  RenderConfig render;
  TrainHyper dsae;
  RlConfig rl;
  CollectConfig collect;
  GoalConfig goal;
  EvalConfig eval;
};

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

/// Canonical serialization (sorted keys, fixed float formatting) so the hash
/// is stable across whitespace and key order in the source file.
std::string config_canonical(const ExperimentConfig& cfg);

/// Hex digest of the canonical serialization; stamped into every manifest.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace dsrl
