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

#include <cstdint>
#include <string>
#include <vector>

#include "dsrl/common.hpp"

namespace dsrl {

/// Row-major interleaved RGB image, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // size = width * height * 3

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0) {}

  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

/// Quantized RGB image used for on-disk datasets; 12x smaller than Image.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // size = width * height * 3

  ImageU8() = default;
  ImageU8(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}
};

ImageU8 quantize(const Image& img);
Image dequantize(const ImageU8& img);

/// Binary PPM (P6, maxval 255). Lossless round trip for ImageU8.
void write_ppm(const std::string& path, const ImageU8& img);
ImageU8 read_ppm(const std::string& path);

/// Luminance grayscale: 0.299 R + 0.587 G + 0.114 B. Returns width*height
/// values in row-major order.
std::vector<double> to_grayscale(const Image& img);

/// Box-filter downsample of a grayscale image by integer `factor`.
/// width and height must be divisible by factor.
std::vector<double> downsample_gray(const std::vector<double>& gray, int width,
                                    int height, int factor);

/// Adds iid Gaussian pixel noise, clamping back to [0, 1].
void add_pixel_noise(Image& img, double stddev, Rng& rng);

}  // namespace dsrl
