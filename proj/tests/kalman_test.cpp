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
#include "dsrl/kalman.hpp"
#include "support/oracles.hpp"

using namespace dsrl;
using dsrl::testing::SyntheticTrack;
using dsrl::testing::const_accel_track;

namespace {

double msq_second_diff(const std::vector<double>& x) {
  double acc = 0.0;
  for (size_t t = 2; t < x.size(); ++t) {
    double d = x[t] - 2 * x[t - 1] + x[t - 2];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size() - 2);
}

}  // namespace

TEST_SUITE("kalman") {

TEST_CASE("noiseless observations are recovered by the filter") {
  const double dt = 0.05;
  Lds1d m = make_const_accel_model(dt);
  m.Q = Eigen::Matrix3d::Identity() * 1e-12;
  m.R = 1e-12;
  std::vector<double> y;
  for (int t = 0; t < 40; ++t) y.push_back(0.3 + 0.1 * t * dt);  // constant velocity
  m.mu1 << y[0], 0.1, 0.0;
  m.P1 = Eigen::Matrix3d::Identity() * 1e-12;
  std::vector<bool> present(y.size(), true);
  Filter1dResult r = kalman_filter_1d(m, y, present);
  for (size_t t = 0; t < y.size(); ++t) {
    CHECK(std::abs(r.mean[t][0] - y[t]) < 1e-6);
  }
}

TEST_CASE("masked frames extrapolate the kinematic prediction") {
  const double dt = 0.1;
  Lds1d m = make_const_accel_model(dt);
  m.Q = Eigen::Matrix3d::Identity() * 1e-12;
  m.R = 1e-12;
  m.mu1 << 0.0, 1.0, 0.0;  // unit velocity, no acceleration
  m.P1 = Eigen::Matrix3d::Identity() * 1e-12;
  std::vector<double> y;
  std::vector<bool> present;
  for (int t = 0; t < 30; ++t) {
    y.push_back(t * dt);
    // 10-frame dropout in the middle; observation value is ignored there.
    bool vis = !(t >= 10 && t < 20);
    present.push_back(vis);
    if (!vis) y.back() = -99.0;
  }
  Filter1dResult r = kalman_filter_1d(m, y, present);
  for (int t = 10; t < 20; ++t) {
    CHECK(std::abs(r.mean[t][0] - t * dt) < 1e-6);
    CHECK(std::abs(r.mean[t][1] - 1.0) < 1e-6);
  }
}

TEST_CASE("filter and smoother agree at the final frame") {
  Rng rng(21);
  SyntheticTrack tr = const_accel_track(rng, 60, 0.05, 0.5, 0.02);
  Lds1d m = make_const_accel_model(0.05);
  std::vector<bool> present(tr.noisy.size(), true);
  std::vector<double> ys;
  for (const auto& p : tr.noisy) ys.push_back(p.x());
  Filter1dResult f = kalman_filter_1d(m, ys, present);
  Smooth1dResult s = kalman_smooth_1d(m, ys, present);
  CHECK((f.mean.back() - s.mean.back()).norm() < 1e-9);
  CHECK(f.loglik == doctest::Approx(s.loglik));
  REQUIRE(s.lag_one.size() == ys.size());
}

TEST_CASE("em log likelihood is non-decreasing") {
  Rng rng(33);
  std::vector<std::vector<double>> ys(4);
  std::vector<std::vector<bool>> present(4);
  for (int s = 0; s < 4; ++s) {
    SyntheticTrack tr = const_accel_track(rng, 80, 0.05, 0.8, 0.03);
    for (const auto& p : tr.noisy) ys[s].push_back(p.x());
    present[s].assign(ys[s].size(), true);
    present[s][17] = false;  // one dropout per sequence
  }
  std::vector<double> trace;
  kalman_em_1d(ys, present, 0.05, 25, &trace);
  REQUIRE(trace.size() >= 2);
  for (size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] >= trace[i - 1] - 1e-9);
  }
}

TEST_CASE("em recovers the observation noise scale") {
  Rng rng(44);
  const double obs_std = 0.05;
  std::vector<std::vector<double>> ys(50);
  std::vector<std::vector<bool>> present(50);
  for (int s = 0; s < 50; ++s) {
    SyntheticTrack tr = const_accel_track(rng, 100, 0.05, 0.4, obs_std);
    for (const auto& p : tr.noisy) ys[s].push_back(p.x());
    present[s].assign(ys[s].size(), true);
  }
  Lds1d m = kalman_em_1d(ys, present, 0.05, 60);
  CHECK(m.R == doctest::Approx(obs_std * obs_std).epsilon(0.20));
}

TEST_CASE("smoothing with a stiff model flattens jitter") {
  Rng rng(55);
  SyntheticTrack tr = const_accel_track(rng, 100, 0.05, 0.2, 0.08);
  std::vector<double> raw;
  for (const auto& p : tr.noisy) raw.push_back(p.x());
  Lds1d m = make_const_accel_model(0.05);
  m.Q = Eigen::Matrix3d::Identity() * 1e-7;
  m.R = 0.08 * 0.08;
  std::vector<bool> present(raw.size(), true);
  Smooth1dResult s = kalman_smooth_1d(m, raw, present);
  std::vector<double> smooth;
  for (const auto& x : s.mean) smooth.push_back(x[0]);
  CHECK(msq_second_diff(smooth) < msq_second_diff(raw));
}

TEST_CASE("em requires a usable observation sequence") {
  std::vector<std::vector<double>> ys = {{1.0, 2.0, 3.0, 4.0}};
  std::vector<std::vector<bool>> present = {{false, false, false, false}};
  CHECK_THROWS_AS(kalman_em_1d(ys, present, 0.05, 5), InvalidInput);
  std::vector<std::vector<bool>> short_mask = {{true, true}};
  CHECK_THROWS_AS(kalman_em_1d(ys, short_mask, 0.05, 5), InvalidInput);
}

TEST_CASE("two dimensional wrapper fits both axes") {
  Rng rng(66);
  std::vector<std::vector<Eigen::Vector2d>> obs(3);
  std::vector<std::vector<bool>> present(3);
  for (int s = 0; s < 3; ++s) {
    SyntheticTrack tx = const_accel_track(rng, 70, 0.05, 0.5, 0.02);
    for (const auto& p : tx.noisy) obs[s].push_back(p);
    present[s].assign(obs[s].size(), true);
  }
  std::vector<double> trx, trY;
  KalmanModel m = kalman_em(obs, present, 0.05, 20, &trx, &trY);
  CHECK(m.dt == 0.05);
  for (size_t i = 1; i < trx.size(); ++i) CHECK(trx[i] >= trx[i - 1] - 1e-9);
  for (size_t i = 1; i < trY.size(); ++i) CHECK(trY[i] >= trY[i - 1] - 1e-9);
  FilteredTrack ft = kalman_filter(m, obs[0], present[0]);
  REQUIRE(ft.position.size() == obs[0].size());
  REQUIRE(ft.velocity.size() == obs[0].size());
  double err = 0.0;
  for (size_t t = 0; t < obs[0].size(); ++t) err += (ft.position[t] - obs[0][t]).norm();
  // The smoother lags the accelerating track, so allow a deviation well
  // above the 0.02 observation noise; a diverged filter is off by >1.
  CHECK(err / static_cast<double>(obs[0].size()) < 0.15);
}

TEST_CASE("online stepping matches the batch filter") {
  Rng rng(77);
  std::vector<Eigen::Vector2d> obs;
  SyntheticTrack tr = const_accel_track(rng, 50, 0.05, 0.6, 0.04);
  for (const auto& p : tr.noisy) obs.push_back(p);
  std::vector<bool> present(obs.size(), true);
  present[7] = present[8] = false;

  KalmanModel m;
  m.x = make_const_accel_model(0.05);
  m.y = make_const_accel_model(0.05);
  m.dt = 0.05;
  FilteredTrack batch = kalman_filter(m, obs, present);
  OnlineKalman ok(m);
  for (size_t t = 0; t < obs.size(); ++t) {
    auto [pos, vel] = ok.step(obs[t], present[t]);
    CHECK((pos - batch.position[t]).norm() < 1e-12);
    CHECK((vel - batch.velocity[t]).norm() < 1e-12);
  }
  ok.reset();  // restarting reproduces the first step
  auto [p0, v0] = ok.step(obs[0], present[0]);
  CHECK((p0 - batch.position[0]).norm() < 1e-12);
  CHECK((v0 - batch.velocity[0]).norm() < 1e-12);
}

}  // TEST_SUITE
