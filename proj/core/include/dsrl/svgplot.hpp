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

#include <Eigen/Dense>

namespace dsrl {

struct CurveSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f6fb2";
};

/// Line chart with axes and per-series labels.
void write_curve_svg(const std::string& path, const std::string& title,
                     const std::vector<CurveSeries>& series);

/// Feature point tracks drawn over the image square, each polyline fading
/// from red at the first frame to green at the last.
void write_feature_tracks_svg(const std::string& path, const std::string& title,
                              const std::vector<std::vector<Eigen::Vector2d>>& tracks,
                              int image_size);

}  // namespace dsrl
