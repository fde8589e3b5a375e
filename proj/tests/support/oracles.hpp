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

// Independent reference implementations used only by tests. Everything here
// deliberately avoids the library's own solvers: costs are evaluated by
// forward simulation, optima are found by exact quadratic identification,
// and distributions are checked by sampling.

#pragma once

#include <cstdint>
#include <vector>

#include "dsrl/common.hpp"
#include "dsrl/cost.hpp"
#include "dsrl/rl_loop.hpp"
#include "dsrl/trajectory.hpp"

namespace dsrl::testing {

Vec random_vec(Rng& rng, int n, double scale = 1.0);
Mat random_mat(Rng& rng, int rows, int cols, double scale = 1.0);

/// SPD matrix with eigenvalues drawn uniformly from [eig_lo, eig_hi].
Mat random_spd(Rng& rng, int n, double eig_lo, double eig_hi);

/// Random time-varying linear dynamics with spectral norm of fx kept near 1
/// so short rollouts stay well scaled.
LinearDynamics random_dynamics(Rng& rng, int n, int m, int steps, double noise = 0.0);

/// Random strictly convex quadratic cost (u-block eigenvalues >= 0.3).
QuadraticCost random_quadratic_cost(Rng& rng, int n, int m, int T);

LinearGaussianPolicy random_policy(Rng& rng, int n, int m, int T, double noise_std);

/// Total cost of the deterministic rollout from x0 applying the stacked
/// action sequence us (no process noise, no policy noise).
double rollout_cost(const LinearDynamics& dyn, const QuadraticCost& cost, const Vec& x0,
                    const std::vector<Vec>& us);

/// Reference optimal controller found without any Riccati recursion: for
/// every start time the total cost is an exact quadratic in the stacked
/// action sequence, so its coefficients are identified from function values
/// alone and the minimizer is read off with a dense solve. Gains follow from
/// the affinity of the minimizer in the start state.
LinearGaussianPolicy brute_force_dp(const LinearDynamics& dyn, const QuadraticCost& cost);

/// Exact expected total cost of running the policy on the given linear
/// dynamics from a Gaussian initial state, by propagating first and second
/// moments. Covers quadratic costs only.
double expected_quadratic_cost(const LinearDynamics& dyn, const QuadraticCost& cost,
                               const LinearGaussianPolicy& pol, const Vec& x0_mean,
                               const Mat& x0_cov);

/// Expected total TaskCost (requires w_log = 0 so the cost is quadratic).
double expected_task_cost(const LinearDynamics& dyn, const TaskCost& cost,
                          const LinearGaussianPolicy& pol, const Vec& x0_mean, const Mat& x0_cov);

/// Monte Carlo estimate of the trajectory KL between two policies under
/// shared dynamics, with its standard error.
double mc_trajectory_kl(const LinearGaussianPolicy& p, const LinearGaussianPolicy& pbar,
                        const LinearDynamics& dyn, const Vec& x0, int rollouts,
                        std::uint64_t seed, double* stderr_out);

/// Environment over ground-truth linear dynamics for rl_iterate tests.
class LinearSystemEnv : public ControlEnv {
 public:
  LinearSystemEnv(LinearDynamics dyn, Vec x0) : dyn_(std::move(dyn)), x0_(std::move(x0)) {}

  int state_dim() const override { return static_cast<int>(x0_.size()); }
  int action_dim() const override { return static_cast<int>(dyn_.fu[0].cols()); }
  int horizon() const override { return dyn_.horizon(); }
  Trajectory rollout(const LinearGaussianPolicy& pol, std::uint64_t seed) override;

  const LinearDynamics& dynamics() const { return dyn_; }
  const Vec& x0() const { return x0_; }

 private:
  LinearDynamics dyn_;
  Vec x0_;
};

/// Fails every rollout whose sequence number is listed; used to exercise the
/// resample-once contract of rl_iterate.
class FlakyEnv : public LinearSystemEnv {
 public:
  FlakyEnv(LinearDynamics dyn, Vec x0, std::vector<int> fail_at)
      : LinearSystemEnv(std::move(dyn), std::move(x0)), fail_at_(std::move(fail_at)) {}

  Trajectory rollout(const LinearGaussianPolicy& pol, std::uint64_t seed) override;

 private:
  std::vector<int> fail_at_;
  int calls_ = 0;
};

/// Constant-acceleration 2D track with Gaussian observation noise; ground
/// truth for the Kalman EM tests.
struct SyntheticTrack {
  std::vector<Eigen::Vector2d> clean;
  std::vector<Eigen::Vector2d> noisy;
};
SyntheticTrack const_accel_track(Rng& rng, int T, double dt, double accel_std, double obs_std);

}  // namespace dsrl::testing
