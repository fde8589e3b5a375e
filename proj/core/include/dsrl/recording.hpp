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

#include <string>
#include <vector>

#include "dsrl/sim2d.hpp"

namespace dsrl {

/// One recorded episode. states[t] is the world before actions[t] was
/// applied; frames[t] is the (possibly noisy) observation of states[t].
struct EpisodeRecord {
  std::vector<WorldState> states;
  std::vector<Eigen::Vector2d> actions;
  WorldState terminal_state;
  std::vector<ImageU8> frames;
};

struct Dataset {
  double dt = 0.05;
  int image_size = 64;
  std::string config_hash;
  std::vector<EpisodeRecord> episodes;

  std::size_t total_frames() const {
    std::size_t n = 0;
    for (const auto& e : episodes) n += e.frames.size();
    return n;
  }
};

/// Directory layout:
///   <dir>/dataset.json            manifest: dt, image size, config hash,
///                                 per-episode states and actions
///   <dir>/ep_%04d/frame_%04d.ppm  lossless frames
void save_dataset(const std::string& dir, const Dataset& ds);

/// load_frames=false skips image decoding (manifest only).
Dataset load_dataset(const std::string& dir, bool load_frames = true);

std::vector<double> state_to_array(const WorldState& s);
WorldState state_from_array(const std::vector<double>& a);

}  // namespace dsrl
