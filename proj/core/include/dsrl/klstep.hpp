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

struct KlUpdateResult {
  LinearGaussianPolicy controller;
  double eta = 0.0;  // dual multiplier the search settled on
  double kl = 0.0;   // measured trajectory KL of the returned controller
};

/// Minimizes the expected quadratized cost subject to a bound eps on the
/// trajectory KL against `prev` (both measured under the fitted dynamics).
///
/// For a multiplier eta the surrogate cost (cost + eta * -log prev(u|x)) /
/// (1 + eta) is fed to lqr_backward. eta is found by bracketing plus
/// bisection on log eta until the KL lands in [0.9 eps, 1.1 eps]; the
/// unconstrained solution is returned directly when it already satisfies
/// the bound. If the bracket has not closed after 50 backward passes the
/// feasible side (larger eta) is returned and a warning is logged.
KlUpdateResult kl_constrained_update(const LinearGaussianPolicy& prev, const LinearDynamics& dyn,
                                     const QuadraticCost& cexp, double eps, const Vec& x0_mean,
                                     const Mat& x0_cov);

}  // namespace dsrl
