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
#include <utility>
#include <vector>

namespace dsrl {

/// Scalar-observation linear dynamical system with a 3-state
/// (position, velocity, acceleration) constant-acceleration kinematic
/// transition. A and H stay fixed; EM fits Q, R and the initial moments.
struct Lds1d {
  Eigen::Matrix3d A;
  Eigen::RowVector3d H;
  Eigen::Matrix3d Q;
  double R = 1e-2;
  Eigen::Vector3d mu1;
  Eigen::Matrix3d P1;
};

/// Kinematic model for sampling interval dt, with broad default noise.
Lds1d make_const_accel_model(double dt);

struct Filter1dResult {
  std::vector<Eigen::Vector3d> mean;  // E[x_t | y_1..t]
  std::vector<Eigen::Matrix3d> cov;
  double loglik = 0.0;  // sum over observed frames
};

/// Forward filter; frames with present=false perform the time update only.
Filter1dResult kalman_filter_1d(const Lds1d& m, const std::vector<double>& y,
                                const std::vector<bool>& present);

struct Smooth1dResult {
  std::vector<Eigen::Vector3d> mean;  // E[x_t | y_1..T]
  std::vector<Eigen::Matrix3d> cov;
  std::vector<Eigen::Matrix3d> lag_one;  // Cov(x_t, x_{t-1} | y_1..T), index t>=1
  double loglik = 0.0;
};

Smooth1dResult kalman_smooth_1d(const Lds1d& m, const std::vector<double>& y,
                                const std::vector<bool>& present);

/// EM over scalar sequences: E-step by RTS smoothing with lag-one
/// covariances, M-step closed-form for Q, R, mu1, P1. Log-likelihood is
/// non-decreasing across iterations; the per-iteration values (evaluated
/// before each M-step) are appended to ll_trace when given. Stops at
/// max_iters or when the gain drops below 1e-6 per frame.
Lds1d kalman_em_1d(const std::vector<std::vector<double>>& ys,
                   const std::vector<std::vector<bool>>& present, double dt,
                   int max_iters, std::vector<double>* ll_trace = nullptr);

/// Independent per-axis models for a 2D feature track.
struct KalmanModel {
  Lds1d x, y;
  double dt = 0.05;
};

KalmanModel kalman_em(const std::vector<std::vector<Eigen::Vector2d>>& obs,
                      const std::vector<std::vector<bool>>& present, double dt,
                      int max_iters = 50, std::vector<double>* ll_trace_x = nullptr,
                      std::vector<double>* ll_trace_y = nullptr);

struct FilteredTrack {
  std::vector<Eigen::Vector2d> position;
  std::vector<Eigen::Vector2d> velocity;
};

FilteredTrack kalman_filter(const KalmanModel& m, const std::vector<Eigen::Vector2d>& obs,
                            const std::vector<bool>& present);

/// Stepwise filter for online use in the vision-phase environment. Matches
/// kalman_filter exactly when fed the same observation stream.
class OnlineKalman {
 public:
  explicit OnlineKalman(const KalmanModel& m) : m_(m) { reset(); }

  void reset();

  /// Returns filtered (position, velocity).
  std::pair<Eigen::Vector2d, Eigen::Vector2d> step(const Eigen::Vector2d& obs, bool present);

 private:
  KalmanModel m_;
  Eigen::Vector3d mx_, my_;
  Eigen::Matrix3d Px_, Py_;
  bool first_ = true;
};

}  // namespace dsrl
