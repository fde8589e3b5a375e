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

#include "dsrl/config.hpp"

#include <fstream>

#include "json.hpp"

#include "dsrl/common.hpp"

namespace dsrl {
namespace {

using nlohmann::json;

json rect_to_json(const Rect& r) { return json{{"x0", r.x0}, {"y0", r.y0}, {"x1", r.x1}, {"y1", r.y1}}; }

Rect rect_from_json(const json& j, Rect r) {
  r.x0 = j.value("x0", r.x0);
  r.y0 = j.value("y0", r.y0);
  r.x1 = j.value("x1", r.x1);
  r.y1 = j.value("y1", r.y1);
  return r;
}

json color_to_json(const std::array<double, 3>& c) { return json{c[0], c[1], c[2]}; }

std::array<double, 3> color_from_json(const json& j, std::array<double, 3> c) {
  if (j.is_array() && j.size() == 3) {
    for (int i = 0; i < 3; ++i) c[i] = j[i].get<double>();
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["task"] = c.task;
  j["seed"] = c.seed;
  j["episode"] = {{"T", c.episode.T},
                  {"dt", c.episode.dt},
                  {"substeps", c.episode.substeps},
                  {"damping", c.episode.damping},
                  {"angular_damping", c.episode.angular_damping},
                  {"gripper_mass", c.episode.gripper_mass},
                  {"block_mass", c.episode.block_mass},
                  {"gripper_radius", c.episode.gripper_radius},
                  {"block_half_w", c.episode.block_half_w},
                  {"block_half_h", c.episode.block_half_h},
                  {"contact_stiffness", c.episode.contact_stiffness},
                  {"contact_damping", c.episode.contact_damping},
                  {"contact_friction", c.episode.contact_friction},
                  {"action_limit", c.episode.action_limit},
                  {"workspace", rect_to_json(c.episode.workspace)}};
  j["render"] = {{"image_size", c.render.image_size},
                 {"workspace_bounds", rect_to_json(c.render.workspace_bounds)},
                 {"gripper_color", color_to_json(c.render.gripper_color)},
                 {"block_color", color_to_json(c.render.block_color)},
                 {"background_base", color_to_json(c.render.background_base)},
                 {"background_contrast", c.render.background_contrast},
                 {"background_texture_seed", c.render.background_texture_seed},
                 {"noise_std", c.render.noise_std},
                 {"gripper_radius", c.render.gripper_radius},
                 {"block_half_w", c.render.block_half_w},
                 {"block_half_h", c.render.block_half_h}};
  j["dsae"] = {{"learning_rate", c.dsae.learning_rate},
               {"momentum", c.dsae.momentum},
               {"batch_size", c.dsae.batch_size},
               {"epochs", c.dsae.epochs},
               {"slowness_weight", c.dsae.slowness_weight},
               {"downsample", c.dsae.downsample},
               {"channels", c.dsae.channels},
               {"window_len", c.dsae.window_len},
               {"max_batches_per_epoch", c.dsae.max_batches_per_epoch}};
  j["rl"] = {{"num_samples", c.rl.num_samples},
             {"eps_base", c.rl.eps_base},
             {"blind_iters", c.rl.blind_iters},
             {"vision_iters", c.rl.vision_iters},
             {"gmm_components", c.rl.gmm_components},
             {"prior_strength", c.rl.prior_strength},
             {"pd_kp", c.rl.pd_kp},
             {"pd_kd", c.rl.pd_kd},
             {"pd_noise", c.rl.pd_noise}};
  j["collect"] = {{"trials", c.collect.trials}, {"heldout", c.collect.heldout}};
  j["goal"] = {{"block_x", c.goal.block_x},
               {"block_y", c.goal.block_y},
               {"gripper_x", c.goal.gripper_x},
               {"gripper_y", c.goal.gripper_y},
               {"blind_target_x", c.goal.blind_target_x},
               {"blind_target_y", c.goal.blind_target_y},
               {"goal_window", c.goal.goal_window},
               {"beta", c.goal.beta}};
  j["eval"] = {{"trials", c.eval.trials}, {"success_frac", c.eval.success_frac}};
  return j;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.task = j.value("task", c.task);
  c.seed = j.value("seed", c.seed);
  if (j.contains("episode")) {
    const json& e = j["episode"];
    c.episode.T = e.value("T", c.episode.T);
    c.episode.dt = e.value("dt", c.episode.dt);
    c.episode.substeps = e.value("substeps", c.episode.substeps);
    c.episode.damping = e.value("damping", c.episode.damping);
    c.episode.angular_damping = e.value("angular_damping", c.episode.angular_damping);
    c.episode.gripper_mass = e.value("gripper_mass", c.episode.gripper_mass);
    c.episode.block_mass = e.value("block_mass", c.episode.block_mass);
    c.episode.gripper_radius = e.value("gripper_radius", c.episode.gripper_radius);
    c.episode.block_half_w = e.value("block_half_w", c.episode.block_half_w);
    c.episode.block_half_h = e.value("block_half_h", c.episode.block_half_h);
    c.episode.contact_stiffness = e.value("contact_stiffness", c.episode.contact_stiffness);
    c.episode.contact_damping = e.value("contact_damping", c.episode.contact_damping);
    c.episode.contact_friction = e.value("contact_friction", c.episode.contact_friction);
    c.episode.action_limit = e.value("action_limit", c.episode.action_limit);
    if (e.contains("workspace")) c.episode.workspace = rect_from_json(e["workspace"], c.episode.workspace);
  }
  if (j.contains("render")) {
    const json& r = j["render"];
    c.render.image_size = r.value("image_size", c.render.image_size);
    if (r.contains("workspace_bounds")) {
      c.render.workspace_bounds = rect_from_json(r["workspace_bounds"], c.render.workspace_bounds);
    }
    if (r.contains("gripper_color")) c.render.gripper_color = color_from_json(r["gripper_color"], c.render.gripper_color);
    if (r.contains("block_color")) c.render.block_color = color_from_json(r["block_color"], c.render.block_color);
    if (r.contains("background_base")) {
      c.render.background_base = color_from_json(r["background_base"], c.render.background_base);
    }
    c.render.background_contrast = r.value("background_contrast", c.render.background_contrast);
    c.render.background_texture_seed = r.value("background_texture_seed", c.render.background_texture_seed);
    c.render.noise_std = r.value("noise_std", c.render.noise_std);
    c.render.gripper_radius = r.value("gripper_radius", c.render.gripper_radius);
    c.render.block_half_w = r.value("block_half_w", c.render.block_half_w);
    c.render.block_half_h = r.value("block_half_h", c.render.block_half_h);
  }
  if (j.contains("dsae")) {
    const json& d = j["dsae"];
    c.dsae.learning_rate = d.value("learning_rate", c.dsae.learning_rate);
    c.dsae.momentum = d.value("momentum", c.dsae.momentum);
    c.dsae.batch_size = d.value("batch_size", c.dsae.batch_size);
    c.dsae.epochs = d.value("epochs", c.dsae.epochs);
    c.dsae.slowness_weight = d.value("slowness_weight", c.dsae.slowness_weight);
    c.dsae.downsample = d.value("downsample", c.dsae.downsample);
    c.dsae.channels = d.value("channels", c.dsae.channels);
    c.dsae.window_len = d.value("window_len", c.dsae.window_len);
    c.dsae.max_batches_per_epoch = d.value("max_batches_per_epoch", c.dsae.max_batches_per_epoch);
  }
  if (j.contains("rl")) {
    const json& r = j["rl"];
    c.rl.num_samples = r.value("num_samples", c.rl.num_samples);
    c.rl.eps_base = r.value("eps_base", c.rl.eps_base);
    c.rl.blind_iters = r.value("blind_iters", c.rl.blind_iters);
    c.rl.vision_iters = r.value("vision_iters", c.rl.vision_iters);
    c.rl.gmm_components = r.value("gmm_components", c.rl.gmm_components);
    c.rl.prior_strength = r.value("prior_strength", c.rl.prior_strength);
    c.rl.pd_kp = r.value("pd_kp", c.rl.pd_kp);
    c.rl.pd_kd = r.value("pd_kd", c.rl.pd_kd);
    c.rl.pd_noise = r.value("pd_noise", c.rl.pd_noise);
  }
  if (j.contains("collect")) {
    c.collect.trials = j["collect"].value("trials", c.collect.trials);
    c.collect.heldout = j["collect"].value("heldout", c.collect.heldout);
  }
  if (j.contains("goal")) {
    const json& g = j["goal"];
    c.goal.block_x = g.value("block_x", c.goal.block_x);
    c.goal.block_y = g.value("block_y", c.goal.block_y);
    c.goal.gripper_x = g.value("gripper_x", c.goal.gripper_x);
    c.goal.gripper_y = g.value("gripper_y", c.goal.gripper_y);
    c.goal.blind_target_x = g.value("blind_target_x", c.goal.blind_target_x);
    c.goal.blind_target_y = g.value("blind_target_y", c.goal.blind_target_y);
    c.goal.goal_window = g.value("goal_window", c.goal.goal_window);
    c.goal.beta = g.value("beta", c.goal.beta);
  }
  if (j.contains("eval")) {
    c.eval.trials = j["eval"].value("trials", c.eval.trials);
    c.eval.success_frac = j["eval"].value("success_frac", c.eval.success_frac);
  }
  return c;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("load_config: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw InvalidInput("load_config: parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("save_config: cannot open " + path);
  f << to_json(cfg).dump(2) << "\n";
}

std::string config_canonical(const ExperimentConfig& cfg) { return to_json(cfg).dump(); }

std::string config_hash(const ExperimentConfig& cfg) {
  return hex64(fnv1a64(config_canonical(cfg)));
}

}  // namespace dsrl
