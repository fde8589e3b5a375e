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
#include <vector>

#include "dsrl/trajectory.hpp"

namespace dsrl {

struct Gmm {
  std::vector<double> weights;
  std::vector<Vec> means;
  std::vector<Mat> covs;

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
};

/// Full-covariance EM, initialized by k-means++ plus Lloyd refinement on
/// the given seed. Covariances receive a 1e-6 eigenvalue floor only when
/// the exact M-step produced something smaller (the floor is inactive on
/// healthy updates, preserving the EM monotonicity guarantee). A component
/// whose responsibility mass collapses is reinitialized by splitting the
/// heaviest component. Appends per-iteration mean log-likelihood to
/// ll_trace when given.
Gmm fit_gmm(const std::vector<Vec>& data, int K, std::uint64_t seed, int max_iters = 100,
            double tol = 1e-6, std::vector<double>* ll_trace = nullptr);

/// Posterior component probabilities for one sample.
Vec gmm_responsibilities(const Gmm& g, const Vec& x);

double gmm_loglik(const Gmm& g, const Vec& x);

}  // namespace dsrl
