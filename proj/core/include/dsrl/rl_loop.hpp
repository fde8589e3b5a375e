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

#include "dsrl/cost.hpp"
#include "dsrl/trajectory.hpp"

namespace dsrl {

/// Environment interface for the trajectory-centric RL loop. `rollout` must
/// be deterministic in the seed and safe to call repeatedly; it throws
/// EnvFailure when an episode cannot be completed.
class ControlEnv {
 public:
  virtual ~ControlEnv() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;
  virtual Trajectory rollout(const LinearGaussianPolicy& pol, std::uint64_t seed) = 0;
};

struct RlOptions {
  int gmm_components = 8;
  int gmm_max_iters = 40;
  double prior_strength = 1.0;  // NIW pseudo-count n0
};

struct RlIterationStats {
  int iteration = 0;
  double mean_cost = 0.0;
  double kl = 0.0;
  double eta = 0.0;
};

struct RlResult {
  LinearGaussianPolicy controller;
  std::vector<RlIterationStats> curve;
};

/// Algorithm loop: sample N rollouts under the current controller, fit a GMM
/// over all transitions gathered so far, fit time-varying linear dynamics to
/// the fresh samples under that prior, quadratize the cost around them, and
/// take one KL-constrained controller update. A rollout that throws
/// EnvFailure is discarded and resampled once per iteration; a second
/// failure aborts the loop.
RlResult rl_iterate(ControlEnv& env, const LinearGaussianPolicy& init, const TaskCost& cost,
                    int N, double eps, int iters, std::uint64_t seed, const RlOptions& opts = {});

/// Learning curve as delimited text: iteration, mean cost, KL, eta.
std::string format_learning_curve(const std::vector<RlIterationStats>& curve);

}  // namespace dsrl
