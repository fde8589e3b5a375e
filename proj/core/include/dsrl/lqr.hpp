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

#include "dsrl/trajectory.hpp"

namespace dsrl {

/// Riccati recursion over the Q-function blocks of the quadratic expansion:
///   K_t = -Quu^-1 Qux,  k_t = -Quu^-1 qu,  C_t = Quu^-1
/// (maximum-entropy covariance convention). A Quu that fails Cholesky is
/// regularized by mu I with mu doubling from 1e-6; past 1e2 the pass aborts.
LinearGaussianPolicy lqr_backward(const LinearDynamics& dyn, const QuadraticCost& cost);

/// Sum over t of E_{p(x_t)} KL(p(u|x) || pbar(u|x)) with the state marginals
/// of p propagated in closed form through the fitted linear dynamics from
/// the given initial Gaussian.
double trajectory_kl(const LinearGaussianPolicy& p, const LinearGaussianPolicy& pbar,
                     const LinearDynamics& dyn, const Vec& x0_mean, const Mat& x0_cov);

/// Low-gain PD controller toward the initial positions with isotropic
/// exploration noise. Assumes the state starts with du position coordinates
/// followed by du velocity coordinates; remaining coordinates get zero gain.
LinearGaussianPolicy init_pd_controller(const Vec& x_init, int T, int du, double kp, double kd,
                                        double noise_std);

}  // namespace dsrl
