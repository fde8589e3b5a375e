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
#include <vector>

#include "dsrl/config.hpp"
#include "dsrl/cost.hpp"
#include "dsrl/envs.hpp"
#include "dsrl/featsel.hpp"
#include "dsrl/kalman.hpp"
#include "dsrl/recording.hpp"
#include "dsrl/rl_loop.hpp"

namespace dsrl {

// Controller and Kalman-model archive IO (model archive format).
void save_policy(const std::string& path, const LinearGaussianPolicy& pol);
LinearGaussianPolicy load_policy(const std::string& path);
void save_kalman_models(const std::string& path, const std::vector<KalmanModel>& models);
std::vector<KalmanModel> load_kalman_models(const std::string& path);
void save_cost(const std::string& path, const TaskCost& cost);
TaskCost load_cost(const std::string& path);

/// Encoder outputs over a recorded dataset. points rows are frames, columns
/// interleaved (x0, y0, x1, y1, ...); presence rows are frames.
struct FeatureTracks {
  std::vector<Mat> points;    // per episode, T x 2C
  std::vector<Mat> presence;  // per episode, T x C
  int channels = 0;
};

FeatureTracks encode_dataset(const DsaeParams& params, const Dataset& ds);
void save_tracks(const std::string& path, const FeatureTracks& tracks);
FeatureTracks load_tracks(const std::string& path);

/// Initial and goal scenes for the configured task.
WorldState initial_world_state(const ExperimentConfig& cfg);
WorldState goal_world_state(const ExperimentConfig& cfg);

/// Deterministic seed for a named stage, derived from the experiment seed.
std::uint64_t stage_seed(const ExperimentConfig& cfg, const std::string& stage);

/// Goal observation sequence: goal_window renders of the goal scene with
/// fresh pixel noise each, quantized like recorded frames.
std::vector<Image> render_goal_frames(const ExperimentConfig& cfg, std::uint64_t seed);

/// Cost for the blind exploration phase: drive the gripper to the blind
/// target (the block goal by default), pay for torque.
TaskCost blind_cost(const ExperimentConfig& cfg);

/// Full-state cost with gripper goal plus averaged kept-feature goals.
TaskCost define_goal(const FeatureSelection& sel, const ExperimentConfig& cfg);

/// KL bound per the fixed schedule: eps_base * T * action_dim.
double kl_epsilon(const ExperimentConfig& cfg);

struct BlindPhaseResult {
  LinearGaussianPolicy controller;
  Dataset dataset;
  std::vector<RlIterationStats> curve;
};

/// Algorithm stage 1-2: trains the blind controller on [pos; vel] and
/// records every training rollout (topped up with final-controller rollouts
/// to collect.trials episodes) as the rendered image dataset.
BlindPhaseResult run_blind_phase(const ExperimentConfig& cfg);

/// EM-fits one constant-acceleration model per kept channel on the training
/// episodes' tracks, observations gated by presence >= beta.
std::vector<KalmanModel> fit_feature_kalman(const FeatureTracks& tracks,
                                            const std::vector<int>& channels, double beta,
                                            double dt, int train_episodes);

struct VisionPhaseResult {
  LinearGaussianPolicy controller;
  std::vector<RlIterationStats> curve;
};

VisionPhaseResult run_vision_phase(const ExperimentConfig& cfg, const DsaeParams& params,
                                   const FeatureSelection& sel,
                                   const std::vector<KalmanModel>& models, const TaskCost& cost);

struct EvalReport {
  std::vector<double> distances;  // final block-to-goal distance per trial
  double mean = 0.0;
  double sd = 0.0;
  int successes = 0;
  double threshold = 0.0;
};

/// Statistics over per-trial final distances at the given success threshold.
EvalReport summarize_distances(const std::vector<double>& distances, double threshold);

EvalReport evaluate_blind(const ExperimentConfig& cfg, const LinearGaussianPolicy& pol);
EvalReport evaluate_vision(const ExperimentConfig& cfg, const DsaeParams& params,
                           const FeatureSelection& sel, const std::vector<KalmanModel>& models,
                           const LinearGaussianPolicy& pol);

std::string format_eval_table(const EvalReport& blind, const EvalReport& vision);

/// Ablation switches wired to the CLI flags.
struct StageFlags {
  bool no_smooth = false;   // zero the slowness penalty during train-ae
  bool no_prune = false;    // keep every feature channel in prune
  bool baseline_ae = false; // train the max-pool baseline autoencoder instead
};

/// Runs one named stage (collect, train-ae, prune, train-ctrl, eval,
/// rank-features, plot), reading prior artifacts from and writing results
/// plus a manifest into out_dir.
void run_stage(const std::string& stage, const ExperimentConfig& cfg, const std::string& out_dir,
               const StageFlags& flags = {});

const std::vector<std::string>& all_stages();

}  // namespace dsrl
