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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "dsrl/common.hpp"
#include "dsrl/cost.hpp"
#include "support/oracles.hpp"

using namespace dsrl;

namespace {

TaskCost example_cost() {
  TaskCost c;
  c.point_idx = {0, 2};
  c.target = Vec(2);
  c.target << 0.5, -0.25;
  c.w_l2 = 1e-3;
  c.w_log = 1.0;
  c.w_u = 1e-2;
  c.alpha = 1e-5;
  return c;
}

Vec random_vec_local(Rng& rng, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

TEST_SUITE("cost") {

TEST_CASE("value at the target with zero action is the log floor") {
  TaskCost c = example_cost();
  Vec x = Vec::Zero(4);
  x[0] = 0.5;
  x[2] = -0.25;
  Vec u = Vec::Zero(2);
  CHECK(task_cost_value(c, x, u, 0) == doctest::Approx(c.w_log * std::log(c.alpha)));
}

TEST_CASE("action penalty is quadratic") {
  TaskCost c = example_cost();
  c.w_l2 = 0.0;
  c.w_log = 0.0;
  Vec x = Vec::Zero(4);
  Vec u(2);
  u << 0.3, -0.4;
  double base = task_cost_value(c, x, u, 0);
  CHECK(base == doctest::Approx(c.w_u * 0.25));
  CHECK(task_cost_value(c, x, 2.0 * u, 0) == doctest::Approx(4.0 * base));
}

TEST_CASE("derivatives match central differences") {
  Rng rng(14);
  for (int trial = 0; trial < 3; ++trial) {
    TaskCost c = example_cost();
    Vec x = random_vec_local(rng, 4);
    Vec u = random_vec_local(rng, 2);
    CostEval ev = task_cost(c, x, u, 0);
    REQUIRE(ev.grad.size() == 6);
    REQUIRE(ev.hess.rows() == 6);

    Vec z(6);
    z << x, u;
    const double h = 1e-6;
    for (int i = 0; i < 6; ++i) {
      Vec zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      double up = task_cost_value(c, zp.head(4), zp.tail(2), 0);
      double dn = task_cost_value(c, zm.head(4), zm.tail(2), 0);
      double fd = (up - dn) / (2 * h);
      CHECK(std::abs(fd - ev.grad[i]) < 1e-5 * std::max(1.0, std::abs(fd)));
      // Hessian column via gradient differences.
      CostEval evp = task_cost(c, zp.head(4), zp.tail(2), 0);
      CostEval evm = task_cost(c, zm.head(4), zm.tail(2), 0);
      Vec hcol = (evp.grad - evm.grad) / (2 * h);
      CHECK((hcol - ev.hess.col(i)).cwiseAbs().maxCoeff() <
            1e-4 * std::max(1.0, hcol.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("action block of the hessian is exactly scaled identity") {
  Rng rng(15);
  TaskCost c = example_cost();
  Vec x = random_vec_local(rng, 4);
  Vec u = random_vec_local(rng, 2);
  CostEval ev = task_cost(c, x, u, 0);
  Mat ub = ev.hess.bottomRightCorner(2, 2);
  CHECK((ub - 2.0 * c.w_u * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ev.hess.bottomLeftCorner(2, 4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("waypoint schedule switches the target") {
  TaskCost c = example_cost();
  c.target2 = Vec(2);
  c.target2 << -1.0, 1.0;
  c.switch_t = 5;
  CHECK(c.target_at(0) == c.target);
  CHECK(c.target_at(4) == c.target);
  CHECK(c.target_at(5) == c.target2);
  CHECK(c.target_at(9) == c.target2);
  Vec x = Vec::Zero(4);
  x[0] = -1.0;
  x[2] = 1.0;  // exactly on the second waypoint
  Vec u = Vec::Zero(2);
  CHECK(task_cost_value(c, x, u, 7) == doctest::Approx(c.w_log * std::log(c.alpha)));
  CHECK(task_cost_value(c, x, u, 2) > task_cost_value(c, x, u, 7));
}

TEST_CASE("trajectory cost sums step costs without a terminal term") {
  Rng rng(16);
  TaskCost c = example_cost();
  Trajectory tr;
  for (int t = 0; t < 3; ++t) {
    tr.states.push_back(random_vec_local(rng, 4));
    tr.actions.push_back(random_vec_local(rng, 2));
  }
  tr.terminal_state = random_vec_local(rng, 4) * 100.0;  // must not matter
  double expect = 0.0;
  for (int t = 0; t < 3; ++t) expect += task_cost_value(c, tr.states[t], tr.actions[t], t);
  CHECK(trajectory_cost(c, tr) == doctest::Approx(expect));
}

TEST_CASE("quadratization is exact for quadratic costs") {
  Rng rng(17);
  TaskCost c = example_cost();
  c.w_log = 0.0;  // pure quadratic
  c.w_l2 = 0.2;
  std::vector<Trajectory> samples(3);
  for (auto& tr : samples) {
    for (int t = 0; t < 4; ++t) {
      tr.states.push_back(random_vec_local(rng, 4));
      tr.actions.push_back(random_vec_local(rng, 2));
    }
    tr.terminal_state = random_vec_local(rng, 4);
  }
  QuadraticCost q = quadratize_cost(c, samples);
  REQUIRE(q.horizon() == 4);
  for (int t = 0; t < 4; ++t) {
    // The fitted gradient Cxx z + cx must reproduce the analytic gradient
    // at arbitrary probe points, not just near the samples.
    for (int probe = 0; probe < 3; ++probe) {
      Vec x = random_vec_local(rng, 4);
      Vec u = random_vec_local(rng, 2);
      Vec z(6);
      z << x, u;
      CostEval ev = task_cost(c, x, u, t);
      Vec fitted = q.Cxx[t] * z + q.cx[t];
      CHECK((fitted - ev.grad).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((q.Cxx[t] - ev.hess).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("identical samples reduce to the single expansion point") {
  Rng rng(18);
  TaskCost c = example_cost();
  Trajectory tr;
  for (int t = 0; t < 2; ++t) {
    tr.states.push_back(random_vec_local(rng, 4));
    tr.actions.push_back(random_vec_local(rng, 2));
  }
  tr.terminal_state = Vec::Zero(4);
  std::vector<Trajectory> five(5, tr);
  QuadraticCost q = quadratize_cost(c, five);
  for (int t = 0; t < 2; ++t) {
    Vec z(6);
    z << tr.states[t], tr.actions[t];
    CostEval ev = task_cost(c, tr.states[t], tr.actions[t], t);
    // At the expansion point the fitted gradient is the analytic one.
    CHECK((q.Cxx[t] * z + q.cx[t] - ev.grad).cwiseAbs().maxCoeff() < 1e-9);
    // Away from the action-block floor the curvature is the analytic
    // Hessian; the u block is positive definite by construction.
    Eigen::SelfAdjointEigenSolver<Mat> es(q.Cxx[t].bottomRightCorner(2, 2));
    CHECK(es.eigenvalues().minCoeff() >= 1e-6 - 1e-12);
  }
}

TEST_CASE("expected cost oracle matches monte carlo on a quadratic cost") {
  // Cross-check of the closed-form expected-cost helper used by the
  // control-loop tests: propagate a random policy through random dynamics
  // and compare against sampled rollouts.
  Rng rng(19);
  const int n = 3, m = 2, T = 5;
  LinearDynamics dyn = dsrl::testing::random_dynamics(rng, n, m, T, 0.05);
  LinearGaussianPolicy pol = dsrl::testing::random_policy(rng, n, m, T, 0.1);
  TaskCost c;
  c.point_idx = {0, 1};
  c.target = Vec::Zero(2);
  c.w_log = 0.0;
  c.w_l2 = 0.5;
  c.w_u = 1e-2;
  Vec x0 = random_vec_local(rng, n);

  double analytic = dsrl::testing::expected_task_cost(dyn, c, pol, x0, Mat::Zero(n, n));

  std::vector<Mat> polL(T), dynL(T);
  for (int t = 0; t < T; ++t) {
    polL[t] = pol.C[t].llt().matrixL();
    dynL[t] = dyn.F[t].llt().matrixL();
  }
  double mc = 0.0;
  const int R = 20000;
  for (int r = 0; r < R; ++r) {
    Vec x = x0;
    for (int t = 0; t < T; ++t) {
      Vec u = pol.K[t] * x + pol.k[t] + polL[t] * random_vec_local(rng, m);
      mc += task_cost_value(c, x, u, t);
      x = dyn.fx[t] * x + dyn.fu[t] * u + dyn.fc[t] + dynL[t] * random_vec_local(rng, n);
    }
  }
  mc /= R;
  CHECK(analytic == doctest::Approx(mc).epsilon(0.03));
}

}  // TEST_SUITE
