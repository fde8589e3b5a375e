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

#include "dsrl/sim2d.hpp"

#include <algorithm>
#include <cmath>

#include "dsrl/common.hpp"

namespace dsrl {

namespace {

bool finite2(const Eigen::Vector2d& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y());
}

struct Contact {
  bool active = false;
  double penetration = 0.0;        // along the normal, >= 0 when active
  Eigen::Vector2d normal{0, 0};    // points from block surface toward gripper
  Eigen::Vector2d point{0, 0};     // world-frame contact point on the block
};

Contact find_contact(const WorldState& s, const EpisodeConfig& cfg) {
  Contact c;
  const double cs = std::cos(s.block_angle), sn = std::sin(s.block_angle);
  const Eigen::Vector2d rel = s.gripper_pos - s.block_pos;
  // Rotate into the block frame.
  const Eigen::Vector2d d(cs * rel.x() + sn * rel.y(), -sn * rel.x() + cs * rel.y());
  const Eigen::Vector2d he(cfg.block_half_w, cfg.block_half_h);
  const Eigen::Vector2d q(std::clamp(d.x(), -he.x(), he.x()),
                          std::clamp(d.y(), -he.y(), he.y()));
  Eigen::Vector2d delta = d - q;
  const double dist = delta.norm();
  Eigen::Vector2d n_local;
  double pen;
  if (dist > 1e-12) {
    if (dist >= cfg.gripper_radius) return c;
    n_local = delta / dist;
    pen = cfg.gripper_radius - dist;
  } else {
    // Gripper center inside the rectangle: push out along the axis of
    // least overlap.
    const double ox = he.x() - std::abs(d.x());
    const double oy = he.y() - std::abs(d.y());
    if (ox < oy) {
      n_local = Eigen::Vector2d(d.x() >= 0 ? 1.0 : -1.0, 0.0);
      pen = cfg.gripper_radius + ox;
    } else {
      n_local = Eigen::Vector2d(0.0, d.y() >= 0 ? 1.0 : -1.0);
      pen = cfg.gripper_radius + oy;
    }
  }
  c.active = true;
  c.penetration = pen;
  c.normal = Eigen::Vector2d(cs * n_local.x() - sn * n_local.y(),
                             sn * n_local.x() + cs * n_local.y());
  const Eigen::Vector2d q_world(cs * q.x() - sn * q.y(), sn * q.x() + cs * q.y());
  c.point = s.block_pos + q_world;
  return c;
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace

double contact_penetration(const WorldState& s, const EpisodeConfig& cfg) {
  const Contact c = find_contact(s, cfg);
  if (c.active) return c.penetration;
  const double cs = std::cos(s.block_angle), sn = std::sin(s.block_angle);
  const Eigen::Vector2d rel = s.gripper_pos - s.block_pos;
  const Eigen::Vector2d d(cs * rel.x() + sn * rel.y(), -sn * rel.x() + cs * rel.y());
  const Eigen::Vector2d he(cfg.block_half_w, cfg.block_half_h);
  const Eigen::Vector2d q(std::clamp(d.x(), -he.x(), he.x()),
                          std::clamp(d.y(), -he.y(), he.y()));
  return cfg.gripper_radius - (d - q).norm();
}

WorldState step(const WorldState& state, const Eigen::Vector2d& action,
                const EpisodeConfig& cfg) {
  if (!finite2(state.gripper_pos) || !finite2(state.gripper_vel) ||
      !finite2(state.block_pos) || !finite2(state.block_vel) ||
      !std::isfinite(state.block_angle) || !std::isfinite(state.block_angvel)) {
    throw InvalidInput("step: non-finite state");
  }
  if (!finite2(action)) throw InvalidInput("step: non-finite action");

  Eigen::Vector2d u(std::clamp(action.x(), -cfg.action_limit, cfg.action_limit),
                    std::clamp(action.y(), -cfg.action_limit, cfg.action_limit));

  WorldState s = state;
  const double h = cfg.dt / cfg.substeps;
  const double inertia = cfg.block_inertia();

  for (int sub = 0; sub < cfg.substeps; ++sub) {
    Eigen::Vector2d f_gripper = u - cfg.damping * s.gripper_vel;
    Eigen::Vector2d f_block = -cfg.damping * s.block_vel;
    double torque = -cfg.angular_damping * s.block_angvel;

    const Contact c = find_contact(s, cfg);
    if (c.active) {
      const Eigen::Vector2d r_c = c.point - s.block_pos;
      const Eigen::Vector2d v_point =
          s.block_vel + s.block_angvel * Eigen::Vector2d(-r_c.y(), r_c.x());
      const Eigen::Vector2d v_rel = s.gripper_vel - v_point;
      const double vn = v_rel.dot(c.normal);
      // Spring plus normal damper; never adhesive.
      const double fn = std::max(0.0, cfg.contact_stiffness * c.penetration -
                                          cfg.contact_damping * vn);
      const Eigen::Vector2d tangent(-c.normal.y(), c.normal.x());
      const double vt = v_rel.dot(tangent);
      const Eigen::Vector2d f_contact = fn * c.normal - cfg.contact_friction * vt * tangent;
      f_gripper += f_contact;
      f_block -= f_contact;
      torque += cross2(r_c, -f_contact);
    }

    s.gripper_vel += (h / cfg.gripper_mass) * f_gripper;
    s.block_vel += (h / cfg.block_mass) * f_block;
    s.block_angvel += (h / inertia) * torque;
    s.gripper_pos += h * s.gripper_vel;
    s.block_pos += h * s.block_vel;
    s.block_angle += h * s.block_angvel;

    // Clamp to the workspace; a clamped axis also loses its velocity so
    // objects rest against the boundary instead of accumulating speed.
    const Rect& ws = cfg.workspace;
    auto clamp_axis = [](double& pos, double& vel, double lo, double hi) {
      if (pos < lo) { pos = lo; if (vel < 0) vel = 0; }
      if (pos > hi) { pos = hi; if (vel > 0) vel = 0; }
    };
    const double r = cfg.gripper_radius;
    clamp_axis(s.gripper_pos.x(), s.gripper_vel.x(), ws.x0 + r, ws.x1 - r);
    clamp_axis(s.gripper_pos.y(), s.gripper_vel.y(), ws.y0 + r, ws.y1 - r);
    const double acs = std::abs(std::cos(s.block_angle));
    const double asn = std::abs(std::sin(s.block_angle));
    const double ex = cfg.block_half_w * acs + cfg.block_half_h * asn;
    const double ey = cfg.block_half_w * asn + cfg.block_half_h * acs;
    clamp_axis(s.block_pos.x(), s.block_vel.x(), ws.x0 + ex, ws.x1 - ex);
    clamp_axis(s.block_pos.y(), s.block_vel.y(), ws.y0 + ey, ws.y1 - ey);
  }
  return s;
}

double total_energy(const WorldState& s, const EpisodeConfig& cfg) {
  double e = 0.5 * cfg.gripper_mass * s.gripper_vel.squaredNorm() +
             0.5 * cfg.block_mass * s.block_vel.squaredNorm() +
             0.5 * cfg.block_inertia() * s.block_angvel * s.block_angvel;
  const Contact c = find_contact(s, cfg);
  if (c.active) e += 0.5 * cfg.contact_stiffness * c.penetration * c.penetration;
  return e;
}

Eigen::Vector2d world_to_pixel(const Eigen::Vector2d& p, const RenderConfig& cfg) {
  const Rect& ws = cfg.workspace_bounds;
  return {(p.x() - ws.x0) / ws.width() * cfg.image_size,
          (p.y() - ws.y0) / ws.height() * cfg.image_size};
}

Eigen::Vector2d true_pixel_position(const WorldState& state, const RenderConfig& cfg) {
  Eigen::Vector2d px = world_to_pixel(state.block_pos, cfg);
  const double hi = cfg.image_size - 1.0;
  return {std::clamp(px.x(), 0.0, hi), std::clamp(px.y(), 0.0, hi)};
}

bool state_in_workspace(const WorldState& s, const Rect& ws) {
  auto in = [&](const Eigen::Vector2d& p) {
    return p.x() >= ws.x0 && p.x() <= ws.x1 && p.y() >= ws.y0 && p.y() <= ws.y1;
  };
  return in(s.gripper_pos) && in(s.block_pos);
}

}  // namespace dsrl
