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

#include "dsrl/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace dsrl {

ImageU8 quantize(const Image& img) {
  ImageU8 out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    double v = std::clamp(img.data[i], 0.0, 1.0);
    out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

Image dequantize(const ImageU8& img) {
  Image out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = static_cast<double>(img.data[i]) / 255.0;
  }
  return out;
}

void write_ppm(const std::string& path, const ImageU8& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open for writing: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (!f) throw InvalidInput("short write: " + path);
}

ImageU8 read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw InvalidInput("not a binary PPM: " + path);
  // Header tokens may be separated by whitespace and '#' comments.
  auto next_int = [&]() {
    for (;;) {
      int c = f.peek();
      if (c == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(c)) {
        f.get();
      } else {
        break;
      }
    }
    int v = 0;
    f >> v;
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255) throw InvalidInput("unsupported PPM: " + path);
  f.get();  // single whitespace after maxval
  ImageU8 out(w, h);
  f.read(reinterpret_cast<char*>(out.data.data()),
         static_cast<std::streamsize>(out.data.size()));
  if (f.gcount() != static_cast<std::streamsize>(out.data.size())) {
    throw InvalidInput("truncated PPM: " + path);
  }
  return out;
}

std::vector<double> to_grayscale(const Image& img) {
  std::vector<double> out(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* px = &img.data[i * 3];
    out[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return out;
}

std::vector<double> downsample_gray(const std::vector<double>& gray, int width,
                                    int height, int factor) {
  if (factor <= 0 || width % factor != 0 || height % factor != 0) {
    throw InvalidInput("downsample factor must divide image dimensions");
  }
  const int ow = width / factor;
  const int oh = height / factor;
  const double inv = 1.0 / (factor * factor);
  std::vector<double> out(static_cast<std::size_t>(ow) * oh, 0.0);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double acc = 0.0;
      for (int dy = 0; dy < factor; ++dy) {
        const double* row = &gray[static_cast<std::size_t>(oy * factor + dy) * width + ox * factor];
        for (int dx = 0; dx < factor; ++dx) acc += row[dx];
      }
      out[static_cast<std::size_t>(oy) * ow + ox] = acc * inv;
    }
  }
  return out;
}

void add_pixel_noise(Image& img, double stddev, Rng& rng) {
  if (stddev <= 0.0) return;
  for (double& v : img.data) {
    v = std::clamp(v + stddev * rng.normal(), 0.0, 1.0);
  }
}

}  // namespace dsrl
