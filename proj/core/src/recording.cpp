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

#include "dsrl/recording.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "dsrl/common.hpp"

namespace dsrl {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> state_to_array(const WorldState& s) {
  return {s.gripper_pos.x(), s.gripper_pos.y(), s.gripper_vel.x(), s.gripper_vel.y(),
          s.block_pos.x(),   s.block_pos.y(),   s.block_vel.x(),   s.block_vel.y(),
          s.block_angle,     s.block_angvel};
}

WorldState state_from_array(const std::vector<double>& a) {
  if (a.size() != 10) throw InvalidInput("world state array must have 10 entries");
  WorldState s;
  s.gripper_pos = {a[0], a[1]};
  s.gripper_vel = {a[2], a[3]};
  s.block_pos = {a[4], a[5]};
  s.block_vel = {a[6], a[7]};
  s.block_angle = a[8];
  s.block_angvel = a[9];
  return s;
}

namespace {

std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.ppm", t);
  return buf;
}

std::string episode_name(int e) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ep_%04d", e);
  return buf;
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(dir);
  json manifest;
  manifest["dt"] = ds.dt;
  manifest["image_size"] = ds.image_size;
  manifest["config_hash"] = ds.config_hash;
  json eps = json::array();
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
    const EpisodeRecord& ep = ds.episodes[e];
    if (ep.states.size() != ep.actions.size() || ep.states.size() != ep.frames.size()) {
      throw InvalidInput("episode arrays must have equal length");
    }
    const std::string ep_dir = episode_name(static_cast<int>(e));
    fs::create_directories(fs::path(dir) / ep_dir);
    json jep;
    jep["dir"] = ep_dir;
    jep["T"] = ep.states.size();
    json states = json::array();
    for (const auto& s : ep.states) states.push_back(state_to_array(s));
    jep["states"] = states;
    json actions = json::array();
    for (const auto& a : ep.actions) actions.push_back({a.x(), a.y()});
    jep["actions"] = actions;
    jep["terminal_state"] = state_to_array(ep.terminal_state);
    eps.push_back(std::move(jep));
    for (std::size_t t = 0; t < ep.frames.size(); ++t) {
      write_ppm((fs::path(dir) / ep_dir / frame_name(static_cast<int>(t))).string(),
                ep.frames[t]);
    }
  }
  manifest["episodes"] = std::move(eps);
  std::ofstream f(fs::path(dir) / "dataset.json");
  if (!f) throw InvalidInput("cannot write dataset manifest in " + dir);
  f << manifest.dump(1) << "\n";
}

Dataset load_dataset(const std::string& dir, bool load_frames) {
  std::ifstream f(fs::path(dir) / "dataset.json");
  if (!f) throw InvalidInput("no dataset manifest in " + dir);
  json manifest = json::parse(f);
  Dataset ds;
  ds.dt = manifest.at("dt").get<double>();
  ds.image_size = manifest.at("image_size").get<int>();
  ds.config_hash = manifest.at("config_hash").get<std::string>();
  for (const auto& jep : manifest.at("episodes")) {
    EpisodeRecord ep;
    const auto T = jep.at("T").get<std::size_t>();
    for (const auto& js : jep.at("states")) {
      ep.states.push_back(state_from_array(js.get<std::vector<double>>()));
    }
    for (const auto& ja : jep.at("actions")) {
      auto v = ja.get<std::vector<double>>();
      if (v.size() != 2) throw InvalidInput("action array must have 2 entries");
      ep.actions.emplace_back(v[0], v[1]);
    }
    ep.terminal_state = state_from_array(jep.at("terminal_state").get<std::vector<double>>());
    if (ep.states.size() != T || ep.actions.size() != T) {
      throw InvalidInput("episode manifest length mismatch in " + dir);
    }
    if (load_frames) {
      const std::string ep_dir = jep.at("dir").get<std::string>();
      for (std::size_t t = 0; t < T; ++t) {
        ep.frames.push_back(read_ppm(
            (fs::path(dir) / ep_dir / frame_name(static_cast<int>(t))).string()));
      }
    }
    ds.episodes.push_back(std::move(ep));
  }
  return ds;
}

}  // namespace dsrl
