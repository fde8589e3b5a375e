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

#include "dsrl/trajectory.hpp"

namespace dsrl {

/// Step cost  w_l2 d^2 + w_log log(d^2 + alpha) + w_u |u|^2  where d is the
/// Euclidean distance from selected state coordinates to their targets.
/// A second target may take over from `switch_t` on (waypoint schedule).
struct TaskCost {
  std::vector<int> point_idx;  // state coordinates holding the tracked points
  Vec target;                  // same length as point_idx
  Vec target2;                 // optional second waypoint (size 0 disables)
  int switch_t = -1;           // first timestep governed by target2
  double w_l2 = 1e-3;
  double w_log = 1.0;
  double w_u = 1e-2;
  double alpha = 1e-5;

  const Vec& target_at(int t) const {
    return (target2.size() > 0 && switch_t >= 0 && t >= switch_t) ? target2 : target;
  }
};

/// Value plus analytic first and second derivatives w.r.t. z = [x; u].
/// The u-block of the Hessian is exactly 2 w_u I.
struct CostEval {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

CostEval task_cost(const TaskCost& cost, const Vec& x, const Vec& u, int t);

double task_cost_value(const TaskCost& cost, const Vec& x, const Vec& u, int t);

/// Sum of step costs over the trajectory (terminal state carries no cost).
double trajectory_cost(const TaskCost& cost, const Trajectory& tr);

/// Per timestep, averages the second-order expansions taken at each sample
/// after re-centering them at the sample mean. Quadratics come out exact.
/// The u-block is eigenvalue-floored at 1e-6 so the backward pass always has
/// a positive-definite action block to invert.
QuadraticCost quadratize_cost(const TaskCost& cost, const std::vector<Trajectory>& samples);

}  // namespace dsrl
