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

#include "dsrl/envs.hpp"

#include <string>

#include <Eigen/Cholesky>

#include "dsrl/common.hpp"

namespace dsrl {

Eigen::Vector2d sample_action(const LinearGaussianPolicy& pol, const Vec& x, int t, Rng& rng) {
  Vec mean = pol.K[t] * x + pol.k[t];
  Eigen::LLT<Mat> llt(pol.C[t]);
  if (llt.info() != Eigen::Success) throw InvalidInput("sample_action: covariance not SPD");
  Vec xi(mean.size());
  for (int i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
  Vec u = mean + Mat(llt.matrixL()) * xi;
  return {u[0], u[1]};
}

Vec Sim2dBlindEnv::observe(const WorldState& w) {
  Vec x(4);
  x << w.gripper_pos.x(), w.gripper_pos.y(), w.gripper_vel.x(), w.gripper_vel.y();
  return x;
}

Trajectory Sim2dBlindEnv::rollout(const LinearGaussianPolicy& pol, std::uint64_t seed) {
  return rollout_record(pol, seed, nullptr, nullptr);
}

Trajectory Sim2dBlindEnv::rollout_record(const LinearGaussianPolicy& pol, std::uint64_t seed,
                                         std::vector<WorldState>* trace, WorldState* final_world) {
  if (pol.horizon() != ep_.T) throw InvalidInput("Sim2dBlindEnv: controller horizon mismatch");
  Rng rng(seed);
  WorldState w = init_;
  Trajectory tr;
  tr.states.reserve(ep_.T);
  tr.actions.reserve(ep_.T);
  try {
    for (int t = 0; t < ep_.T; ++t) {
      if (trace) trace->push_back(w);
      Vec x = observe(w);
      Eigen::Vector2d u = sample_action(pol, x, t, rng);
      tr.states.push_back(x);
      tr.actions.push_back(Vec(u));
      w = step(w, u, ep_);
    }
  } catch (const InvalidInput& e) {
    throw EnvFailure(std::string("Sim2dBlindEnv: ") + e.what());
  }
  tr.terminal_state = observe(w);
  if (final_world) *final_world = w;
  return tr;
}

Sim2dVisionEnv::Sim2dVisionEnv(const EpisodeConfig& ep, const RenderConfig& render,
                               const DsaeParams& params, const FeatureSelection& sel,
                               const std::vector<KalmanModel>& models, const WorldState& init)
    : ep_(ep), render_(render), params_(params), sel_(sel), models_(models), init_(init) {
  if (sel_.kept.empty()) throw InvalidInput("Sim2dVisionEnv: empty feature selection");
  if (models_.size() != sel_.kept.size()) {
    throw InvalidInput("Sim2dVisionEnv: one Kalman model per kept channel required");
  }
  for (int c : sel_.kept) {
    if (c < 0 || c >= params_.channels) throw InvalidInput("Sim2dVisionEnv: kept channel out of range");
  }
}

Trajectory Sim2dVisionEnv::rollout(const LinearGaussianPolicy& pol, std::uint64_t seed) {
  return rollout_record(pol, seed, nullptr, nullptr);
}

Trajectory Sim2dVisionEnv::rollout_record(const LinearGaussianPolicy& pol, std::uint64_t seed,
                                          std::vector<WorldState>* trace, WorldState* final_world) {
  if (pol.horizon() != ep_.T) throw InvalidInput("Sim2dVisionEnv: controller horizon mismatch");
  const int k = static_cast<int>(sel_.kept.size());
  Rng rng(seed);
  Rng noise_rng = rng.fork(0x6e6f6973);  // pixel noise stream, separate from actions

  std::vector<OnlineKalman> filters;
  filters.reserve(k);
  for (const KalmanModel& m : models_) filters.emplace_back(m);

  WorldState w = init_;
  Trajectory tr;
  tr.states.reserve(ep_.T);
  tr.actions.reserve(ep_.T);

  auto assemble = [&](const WorldState& world) {
    Image frame = render(world, render_);
    add_pixel_noise(frame, render_.noise_std, noise_rng);
    // Round-trip through 8-bit so observations match the recorded dataset
    // the autoencoder was trained on.
    Image obs_img = dequantize(quantize(frame));
    EncodeResult enc = encode(params_, obs_img);
    Vec x(4 + 4 * k);
    x.head(4) = Sim2dBlindEnv::observe(world);
    for (int i = 0; i < k; ++i) {
      const int c = sel_.kept[i];
      bool present = enc.features.presence[c] >= sel_.beta;
      auto [pos, vel] = filters[i].step(enc.features.points[c], present);
      x.segment(4 + 2 * i, 2) = pos;
      x.segment(4 + 2 * k + 2 * i, 2) = vel;
    }
    return x;
  };

  try {
    for (int t = 0; t < ep_.T; ++t) {
      if (trace) trace->push_back(w);
      Vec x = assemble(w);
      Eigen::Vector2d u = sample_action(pol, x, t, rng);
      tr.states.push_back(x);
      tr.actions.push_back(Vec(u));
      w = step(w, u, ep_);
    }
    tr.terminal_state = assemble(w);
  } catch (const InvalidInput& e) {
    throw EnvFailure(std::string("Sim2dVisionEnv: ") + e.what());
  }
  if (final_world) *final_world = w;
  return tr;
}

}  // namespace dsrl
