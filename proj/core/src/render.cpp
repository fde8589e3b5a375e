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
#include <cmath>
#include <vector>

#include "dsrl/common.hpp"
#include "dsrl/sim2d.hpp"

namespace dsrl {

namespace {

// Smooth value noise: a seeded coarse grid, bilinearly interpolated. Gives
// the encoder low-frequency background structure to learn to ignore.
constexpr int kNoiseGrid = 8;

std::vector<double> noise_grid(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> g((kNoiseGrid + 1) * (kNoiseGrid + 1));
  for (double& v : g) v = rng.uniform();
  return g;
}

double sample_noise(const std::vector<double>& g, double u, double v) {
  u = std::clamp(u, 0.0, 1.0) * kNoiseGrid;
  v = std::clamp(v, 0.0, 1.0) * kNoiseGrid;
  const int iu = std::min(static_cast<int>(u), kNoiseGrid - 1);
  const int iv = std::min(static_cast<int>(v), kNoiseGrid - 1);
  const double fu = u - iu, fv = v - iv;
  auto at = [&](int x, int y) { return g[y * (kNoiseGrid + 1) + x]; };
  const double a = at(iu, iv) * (1 - fu) + at(iu + 1, iv) * fu;
  const double b = at(iu, iv + 1) * (1 - fu) + at(iu + 1, iv + 1) * fu;
  return a * (1 - fv) + b * fv;
}

double sdf_disk(const Eigen::Vector2d& p, const Eigen::Vector2d& center, double radius) {
  return (p - center).norm() - radius;
}

double sdf_oriented_box(const Eigen::Vector2d& p, const Eigen::Vector2d& center,
                        double angle, double hw, double hh) {
  const double cs = std::cos(angle), sn = std::sin(angle);
  const Eigen::Vector2d rel = p - center;
  const Eigen::Vector2d local(cs * rel.x() + sn * rel.y(),
                              -sn * rel.x() + cs * rel.y());
  const double qx = std::abs(local.x()) - hw;
  const double qy = std::abs(local.y()) - hh;
  const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
  return std::sqrt(ox * ox + oy * oy) + std::min(std::max(qx, qy), 0.0);
}

}  // namespace

Image render(const WorldState& state, const RenderConfig& cfg) {
  if (cfg.image_size < 16 || cfg.image_size % 4 != 0) {
    throw InvalidInput("render: image_size must be >= 16 and divisible by 4");
  }
  if (!state_in_workspace(state, cfg.workspace_bounds)) {
    throw InvalidInput("render: state outside workspace");
  }
  const int n = cfg.image_size;
  const Rect& ws = cfg.workspace_bounds;
  const double mpp = ws.width() / n;  // meters per pixel (square workspace assumed)

  const std::vector<double> noise = noise_grid(cfg.background_texture_seed);
  Image img(n, n);

  // Coverage ramps over one pixel of signed distance.
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const Eigen::Vector2d p(ws.x0 + (x + 0.5) * mpp, ws.y0 + (y + 0.5) * mpp);
      const double nv = sample_noise(noise, (p.x() - ws.x0) / ws.width(),
                                     (p.y() - ws.y0) / ws.height());
      double r = cfg.background_base[0] + cfg.background_contrast * (2.0 * nv - 1.0);
      double g = cfg.background_base[1] + cfg.background_contrast * (2.0 * nv - 1.0);
      double b = cfg.background_base[2] + cfg.background_contrast * (2.0 * nv - 1.0);

      const double sd_block = sdf_oriented_box(p, state.block_pos, state.block_angle,
                                               cfg.block_half_w, cfg.block_half_h);
      const double cov_block = std::clamp(0.5 - sd_block / mpp, 0.0, 1.0);
      r += cov_block * (cfg.block_color[0] - r);
      g += cov_block * (cfg.block_color[1] - g);
      b += cov_block * (cfg.block_color[2] - b);

      const double sd_grip = sdf_disk(p, state.gripper_pos, cfg.gripper_radius);
      const double cov_grip = std::clamp(0.5 - sd_grip / mpp, 0.0, 1.0);
      r += cov_grip * (cfg.gripper_color[0] - r);
      g += cov_grip * (cfg.gripper_color[1] - g);
      b += cov_grip * (cfg.gripper_color[2] - b);

      img.at(x, y, 0) = std::clamp(r, 0.0, 1.0);
      img.at(x, y, 1) = std::clamp(g, 0.0, 1.0);
      img.at(x, y, 2) = std::clamp(b, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace dsrl
