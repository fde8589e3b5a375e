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

#include "dsrl/dsae.hpp"
#include "dsrl/image.hpp"
#include "dsrl/trajectory.hpp"

namespace dsrl {

/// Result of goal-image pruning: which feature channels survive, plus the
/// averaged goal positions and per-channel presence statistics that back
/// the decision.
struct FeatureSelection {
  std::vector<int> kept;                       // channel indices, ascending
  double beta = 0.95;                          // presence threshold
  std::vector<Eigen::Vector2d> goal_points;    // per channel, averaged over goal frames
  std::vector<double> min_presence;            // per channel, minimum over goal frames
  std::vector<double> mean_presence;
};

/// Presence statistics and averaged goal points over the goal frames, with
/// an empty kept set. Backing computation for pruning and for the
/// keep-everything ablation.
FeatureSelection goal_presence_stats(const std::vector<Image>& goal_frames,
                                     const DsaeParams& params, double beta = 0.95);

/// Keeps channel c iff its presence score reaches beta in every goal frame.
/// Aborts with a per-channel diagnostic when nothing survives. The kept set
/// is exactly invariant to goal-frame ordering.
FeatureSelection prune_by_goal_presence(const std::vector<Image>& goal_frames,
                                        const DsaeParams& params, double beta = 0.95);

std::string selection_report(const FeatureSelection& sel);
void save_selection(const FeatureSelection& sel, const std::string& path);
FeatureSelection load_selection(const std::string& path);

/// Input for the predictiveness ranking: trajectories whose states are
/// [robot(robot_dim); feature points(2 per channel)].
struct RankInput {
  std::vector<Trajectory> trajs;
  int robot_dim = 0;
  int num_features = 0;
};

struct RankResult {
  std::vector<int> best_first;        // channel indices, most predictive first
  std::vector<double> removal_gain;   // measure after removing best_first[i]
};

/// Greedy backward elimination under the predictiveness measure: the sum of
/// the dynamics log-likelihood of the kept-feature state and the regression
/// log-likelihood of the dropped features given the kept ones. Each round
/// removes the channel whose removal hurts the measure least (ties go to the
/// lowest index); the elimination order reversed is the ranking.
RankResult predictiveness_rank(const RankInput& in, std::uint64_t seed);

}  // namespace dsrl
