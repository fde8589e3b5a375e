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

#include <Eigen/Dense>
#include <vector>

namespace dsrl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One rollout: states x_1..x_T and actions u_1..u_T (x_{T+1} is kept as
/// `terminal_state` so dynamics fitting can use all T transitions).
struct Trajectory {
  std::vector<Vec> states;   // length T
  std::vector<Vec> actions;  // length T
  Vec terminal_state;        // x_{T+1}

  int horizon() const { return static_cast<int>(actions.size()); }
};

/// Time-varying linear-Gaussian controller u = K_t x + k_t + sample(C_t).
struct LinearGaussianPolicy {
  std::vector<Mat> K;  // du x dx
  std::vector<Vec> k;  // du
  std::vector<Mat> C;  // du x du covariance

  int horizon() const { return static_cast<int>(K.size()); }
};

/// Time-varying linear-Gaussian dynamics x' ~ N(fx x + fu u + fc, F).
struct LinearDynamics {
  std::vector<Mat> fx;  // dx x dx
  std::vector<Mat> fu;  // dx x du
  std::vector<Vec> fc;  // dx
  std::vector<Mat> F;   // dx x dx

  int horizon() const { return static_cast<int>(fx.size()); }
};

/// Local quadratic cost expansion around a nominal trajectory:
///   cost(x, u) ~ 1/2 [x;u]' Cxx [x;u] + cx' [x;u] + const
struct QuadraticCost {
  std::vector<Mat> Cxx;  // (dx+du) x (dx+du)
  std::vector<Vec> cx;   // dx+du

  int horizon() const { return static_cast<int>(Cxx.size()); }
};

}  // namespace dsrl
