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
#include <array>

#include "dsrl/image.hpp"

namespace dsrl {

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

/// Full simulator state: an actuated point gripper (disk) and one free
/// block (oriented rectangle) on a damped plane.
struct WorldState {
  Eigen::Vector2d gripper_pos{0.25, 0.5};
  Eigen::Vector2d gripper_vel{0.0, 0.0};
  Eigen::Vector2d block_pos{0.5, 0.5};
  Eigen::Vector2d block_vel{0.0, 0.0};
  double block_angle = 0.0;
  double block_angvel = 0.0;
};

struct EpisodeConfig {
  int T = 100;                       // control steps per episode
  double dt = 0.05;                  // seconds per control step (20 Hz)
  int substeps = 10;                 // integrator substeps per control step
  double damping = 4.0;              // viscous drag, N per m/s
  double angular_damping = 0.01;     // N*m per rad/s
  double gripper_mass = 1.0;         // kg
  double block_mass = 0.5;           // kg
  double gripper_radius = 0.06;      // m
  double block_half_w = 0.07;        // m
  double block_half_h = 0.05;        // m
  double contact_stiffness = 1200.0; // N/m penalty spring
  double contact_damping = 15.0;     // N per m/s along the contact normal
  double contact_friction = 5.0;     // N per m/s tangential
  double action_limit = 10.0;        // N, per component
  Rect workspace;

  double block_inertia() const {
    const double w = 2.0 * block_half_w, h = 2.0 * block_half_h;
    return block_mass * (w * w + h * h) / 12.0;
  }
};

struct RenderConfig {
  int image_size = 64;  // square, must be >= 16 and divisible by 4
  Rect workspace_bounds;
  std::array<double, 3> gripper_color{0.90, 0.25, 0.85};
  std::array<double, 3> block_color{0.90, 0.85, 0.20};
  std::array<double, 3> background_base{0.16, 0.16, 0.18};
  double background_contrast = 0.06;
  std::uint64_t background_texture_seed = 1234;
  double noise_std = 0.01;  // applied by recorders, not by render()
  // Drawn geometry; keep in sync with EpisodeConfig so the image shows
  // exactly what collides.
  double gripper_radius = 0.06;
  double block_half_w = 0.07;
  double block_half_h = 0.05;
};

/// Advances the world by one control step (cfg.dt seconds, cfg.substeps
/// semi-implicit Euler substeps). Action is a force on the gripper, clipped
/// per component to cfg.action_limit. Throws InvalidInput on non-finite
/// state or action.
WorldState step(const WorldState& state, const Eigen::Vector2d& action,
                const EpisodeConfig& cfg);

/// Kinetic energy plus the penalty-spring potential of any active contact.
/// Non-increasing across steps under zero action and positive damping.
double total_energy(const WorldState& state, const EpisodeConfig& cfg);

/// Signed penetration depth of the gripper disk into the block (negative
/// when separated). Exposed for contact diagnostics in tests.
double contact_penetration(const WorldState& state, const EpisodeConfig& cfg);

/// Top-down orthographic rasterization with signed-distance anti-aliasing.
/// Deterministic given (state, cfg); the block is drawn over a seeded
/// value-noise background, the gripper over both.
Image render(const WorldState& state, const RenderConfig& cfg);

/// Exact projection of the block center into pixel coordinates, clamped to
/// [0, image_size-1] per axis. Ground truth for learned feature points.
Eigen::Vector2d true_pixel_position(const WorldState& state, const RenderConfig& cfg);

/// Maps world coordinates to continuous pixel coordinates (no clamping).
Eigen::Vector2d world_to_pixel(const Eigen::Vector2d& p, const RenderConfig& cfg);

bool state_in_workspace(const WorldState& state, const Rect& ws);

}  // namespace dsrl
