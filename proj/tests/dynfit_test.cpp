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

#include <algorithm>
#include <vector>

#include "doctest.h"
#include "dsrl/common.hpp"
#include "dsrl/dynfit.hpp"
#include "support/oracles.hpp"

using namespace dsrl;

namespace {

// Rollouts of a fixed linear system x' = Ax + Bu + c + noise under random
// actions. All trajectories share the horizon.
std::vector<Trajectory> linear_rollouts(const Mat& A, const Mat& B, const Vec& c,
                                        double noise, int count, int T, Rng& rng) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  std::vector<Trajectory> out;
  for (int i = 0; i < count; ++i) {
    Trajectory tr;
    Vec x(n);
    for (int j = 0; j < n; ++j) x[j] = rng.normal();
    for (int t = 0; t < T; ++t) {
      Vec u(m);
      for (int j = 0; j < m; ++j) u[j] = rng.normal();
      tr.states.push_back(x);
      tr.actions.push_back(u);
      Vec nx = A * x + B * u + c;
      for (int j = 0; j < n; ++j) nx[j] += noise * rng.normal();
      x = nx;
    }
    tr.terminal_state = x;
    out.push_back(std::move(tr));
  }
  return out;
}

GmmPrior flat_prior(const std::vector<Trajectory>& trajs, int K, std::uint64_t seed) {
  GmmPrior prior;
  prior.gmm = fit_gmm(pooled_transitions(trajs), K, seed);
  prior.n0 = 1.0;
  return prior;
}

}  // namespace

TEST_SUITE("dynfit") {

TEST_CASE("pooled transitions stack state, action, next state") {
  Rng rng(2);
  Mat A = Mat::Identity(2, 2);
  Mat B = Mat::Ones(2, 1);
  std::vector<Trajectory> trajs = linear_rollouts(A, B, Vec::Zero(2), 0.0, 2, 3, rng);
  std::vector<Vec> z = pooled_transitions(trajs);
  REQUIRE(z.size() == 6);
  CHECK(z[0].size() == 5);
  CHECK(z[0].head(2) == trajs[0].states[0]);
  CHECK(z[0].segment(2, 1) == trajs[0].actions[0]);
  CHECK(z[0].tail(2) == trajs[0].states[1]);
  // Last transition of an episode ends at the terminal state.
  CHECK(z[2].tail(2) == trajs[0].terminal_state);
}

TEST_CASE("noise free linear system is recovered exactly") {
  Rng rng(3);
  Mat A(2, 2);
  A << 0.9, 0.1, -0.05, 0.85;
  Mat B(2, 2);
  B << 0.2, 0.0, 0.05, 0.3;
  Vec c(2);
  c << 0.01, -0.02;
  std::vector<Trajectory> trajs = linear_rollouts(A, B, c, 0.0, 6, 10, rng);
  GmmPrior prior;  // n0 = 0 drops the prior entirely
  prior.n0 = 0.0;
  LinearDynamics dyn = fit_dynamics(trajs, prior);
  REQUIRE(dyn.horizon() == 10);
  for (int t = 0; t < dyn.horizon(); ++t) {
    CHECK((dyn.fx[t] - A).cwiseAbs().maxCoeff() < 1e-3);
    CHECK((dyn.fu[t] - B).cwiseAbs().maxCoeff() < 1e-3);
    CHECK((dyn.fc[t] - c).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("prior keeps few-sample fits bounded in high dimension") {
  Rng rng(4);
  const int n = 20, m = 2, T = 25;
  Mat A = Mat::Identity(n, n) * 0.95;
  Mat B = Mat::Zero(n, m);
  B.topRows(m).setIdentity();
  std::vector<Trajectory> trajs = linear_rollouts(A, B, Vec::Zero(n), 0.02, 2, T, rng);
  // Two rollouts give two samples per fitting window against a
  // 42-dimensional joint: hopeless without regularization. Pooling all
  // 50 transitions barely covers the single-component prior fit.
  GmmPrior prior = flat_prior(trajs, 1, 7);
  LinearDynamics dyn = fit_dynamics(trajs, prior);
  for (int t = 0; t < dyn.horizon(); ++t) {
    CHECK(dyn.fx[t].norm() < 50.0);
    CHECK(dyn.fx[t].allFinite());
    CHECK(dyn.fu[t].allFinite());
    CHECK(dyn.F[t].allFinite());
  }
}

TEST_CASE("fit approaches time invariance with many rollouts") {
  Rng rng(5);
  Mat A(2, 2);
  A << 0.8, 0.2, 0.0, 0.9;
  Mat B(2, 1);
  B << 0.5, 0.25;
  std::vector<Trajectory> trajs = linear_rollouts(A, B, Vec::Zero(2), 0.01, 60, 6, rng);
  GmmPrior prior = flat_prior(trajs, 2, 9);
  LinearDynamics dyn = fit_dynamics(trajs, prior);
  for (int t = 1; t < dyn.horizon(); ++t) {
    CHECK((dyn.fx[t] - dyn.fx[0]).cwiseAbs().maxCoeff() < 0.15);
    CHECK((dyn.fu[t] - dyn.fu[0]).cwiseAbs().maxCoeff() < 0.15);
  }
}

TEST_CASE("fit is invariant to trajectory ordering") {
  Rng rng(6);
  Mat A = Mat::Identity(3, 3) * 0.9;
  Mat B = Mat::Ones(3, 2) * 0.1;
  std::vector<Trajectory> trajs = linear_rollouts(A, B, Vec::Zero(3), 0.05, 5, 7, rng);
  GmmPrior prior = flat_prior(trajs, 2, 11);

  LinearDynamics fwd = fit_dynamics(trajs, prior);
  std::vector<Trajectory> rev(trajs.rbegin(), trajs.rend());
  LinearDynamics bwd = fit_dynamics(rev, prior);
  for (int t = 0; t < fwd.horizon(); ++t) {
    CHECK(fwd.fx[t] == bwd.fx[t]);
    CHECK(fwd.fu[t] == bwd.fu[t]);
    CHECK(fwd.fc[t] == bwd.fc[t]);
    CHECK(fwd.F[t] == bwd.F[t]);
  }
}

TEST_CASE("process noise estimate is symmetric positive definite") {
  Rng rng(7);
  Mat A = Mat::Identity(2, 2) * 0.9;
  Mat B = Mat::Ones(2, 1);
  std::vector<Trajectory> trajs = linear_rollouts(A, B, Vec::Zero(2), 0.1, 10, 8, rng);
  GmmPrior prior = flat_prior(trajs, 1, 13);
  LinearDynamics dyn = fit_dynamics(trajs, prior);
  for (int t = 0; t < dyn.horizon(); ++t) {
    CHECK((dyn.F[t] - dyn.F[t].transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> es(dyn.F[t]);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("degenerate inputs are rejected") {
  Rng rng(8);
  Mat A = Mat::Identity(2, 2);
  Mat B = Mat::Ones(2, 1);
  GmmPrior prior;
  prior.n0 = 0.0;
  std::vector<Trajectory> one = linear_rollouts(A, B, Vec::Zero(2), 0.0, 1, 5, rng);
  CHECK_THROWS_AS(fit_dynamics(one, prior), InvalidInput);

  std::vector<Trajectory> uneven = linear_rollouts(A, B, Vec::Zero(2), 0.0, 2, 5, rng);
  uneven[1].states.pop_back();
  uneven[1].actions.pop_back();
  CHECK_THROWS_AS(fit_dynamics(uneven, prior), InvalidInput);
}

}  // TEST_SUITE
