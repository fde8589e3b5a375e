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

#include "dsrl/gmm.hpp"
#include "dsrl/trajectory.hpp"

namespace dsrl {

/// Mixture over joint transition vectors z = [x_t; u_t; x_{t+1}] plus the
/// pseudo-count that controls how strongly it pulls the per-timestep fits.
struct GmmPrior {
  Gmm gmm;
  double n0 = 1.0;
};

/// Flattens every transition of every trajectory into [x_t; u_t; x_{t+1}].
std::vector<Vec> pooled_transitions(const std::vector<Trajectory>& trajs);

/// Fits time-varying linear-Gaussian dynamics x_{t+1} ~ N(fx x + fu u + fc, F).
///
/// Per timestep the joint second moments of z are estimated from the samples,
/// blended with moments implied by the prior (component moments mixed by the
/// averaged posterior responsibilities of the timestep's samples, pseudo-count
/// n0), and the resulting joint Gaussian is conditioned on [x; u]. When the
/// sample count per timestep is below dim(z), neighboring timesteps within
/// +-1 are pooled. F is symmetrized and eigenvalue-floored. A singular joint
/// covariance escalates the floor by 10x up to 1e-2 before aborting.
///
/// The fit is invariant to the ordering of the trajectories. Requires >= 2
/// trajectories of equal horizon; n0 = 0 drops the prior entirely (the mixture
/// may then be empty).
LinearDynamics fit_dynamics(const std::vector<Trajectory>& samples, const GmmPrior& prior);

}  // namespace dsrl
