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

#include "dsrl/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "dsrl/common.hpp"

namespace dsrl {
namespace {

constexpr int kW = 640, kH = 420;
constexpr int kMarL = 70, kMarR = 20, kMarT = 40, kMarB = 50;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void write_curve_svg(const std::string& path, const std::string& title,
                     const std::vector<CurveSeries>& series) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const CurveSeries& s : series) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (!(xmin < xmax)) xmax = xmin + 1.0;
  if (!(ymin < ymax)) ymax = ymin + 1.0;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double v) { return kMarL + (v - xmin) / (xmax - xmin) * (kW - kMarL - kMarR); };
  auto py = [&](double v) { return kH - kMarB - (v - ymin) / (ymax - ymin) * (kH - kMarT - kMarB); };

  std::ofstream f(path);
  if (!f) throw InvalidInput("write_curve_svg: cannot open " + path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  f << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
    << "</text>\n";
  // Axes with min/max tick labels.
  f << "<line x1='" << kMarL << "' y1='" << kH - kMarB << "' x2='" << kW - kMarR << "' y2='"
    << kH - kMarB << "' stroke='black'/>\n";
  f << "<line x1='" << kMarL << "' y1='" << kMarT << "' x2='" << kMarL << "' y2='" << kH - kMarB
    << "' stroke='black'/>\n";
  f << "<text x='" << kMarL << "' y='" << kH - kMarB + 18 << "' font-size='11'>" << fmt(xmin)
    << "</text>\n";
  f << "<text x='" << kW - kMarR << "' y='" << kH - kMarB + 18
    << "' text-anchor='end' font-size='11'>" << fmt(xmax) << "</text>\n";
  f << "<text x='" << kMarL - 6 << "' y='" << kH - kMarB << "' text-anchor='end' font-size='11'>"
    << fmt(ymin + ypad) << "</text>\n";
  f << "<text x='" << kMarL - 6 << "' y='" << kMarT + 4 << "' text-anchor='end' font-size='11'>"
    << fmt(ymax - ypad) << "</text>\n";

  int li = 0;
  for (const CurveSeries& s : series) {
    f << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < s.x.size(); ++i) {
      f << fmt(px(s.x[i])) << "," << fmt(py(s.y[i])) << " ";
    }
    f << "'/>\n";
    f << "<text x='" << kW - kMarR - 4 << "' y='" << kMarT + 16 + 16 * li
      << "' text-anchor='end' font-size='12' fill='" << s.color << "'>" << s.label << "</text>\n";
    ++li;
  }
  f << "</svg>\n";
}

void write_feature_tracks_svg(const std::string& path, const std::string& title,
                              const std::vector<std::vector<Eigen::Vector2d>>& tracks,
                              int image_size) {
  const int side = 512;
  const double scale = static_cast<double>(side) / image_size;
  std::ofstream f(path);
  if (!f) throw InvalidInput("write_feature_tracks_svg: cannot open " + path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << side << "' height='" << side + 30
    << "'>\n";
  f << "<text x='" << side / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
    << "</text>\n";
  f << "<g transform='translate(0,30)'>\n";
  f << "<rect width='" << side << "' height='" << side << "' fill='#222228'/>\n";
  for (const auto& track : tracks) {
    const int n = static_cast<int>(track.size());
    for (int i = 0; i + 1 < n; ++i) {
      // Red at the first frame fading to green at the last.
      double a = n > 2 ? static_cast<double>(i) / (n - 2) : 0.0;
      int r = static_cast<int>(std::lround(255 * (1.0 - a)));
      int g = static_cast<int>(std::lround(255 * a));
      f << "<line x1='" << fmt(track[i].x() * scale) << "' y1='" << fmt(track[i].y() * scale)
        << "' x2='" << fmt(track[i + 1].x() * scale) << "' y2='" << fmt(track[i + 1].y() * scale)
        << "' stroke='rgb(" << r << "," << g << ",40)' stroke-width='2'/>\n";
    }
  }
  f << "</g>\n</svg>\n";
}

}  // namespace dsrl
