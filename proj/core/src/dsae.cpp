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

#include "dsrl/dsae.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "dsrl/archive.hpp"

namespace dsrl {

ConvLayer make_conv(int in_c, int out_c, int k, int stride, int pad, Rng& rng) {
  ConvLayer l;
  l.in_c = in_c;
  l.out_c = out_c;
  l.k = k;
  l.stride = stride;
  l.pad = pad;
  const int fan_in = in_c * k * k;
  const double std = std::sqrt(2.0 / fan_in);
  l.W.resize(out_c, fan_in);
  for (int o = 0; o < out_c; ++o) {
    for (int i = 0; i < fan_in; ++i) l.W(o, i) = std * rng.normal();
  }
  l.b = Eigen::VectorXd::Zero(out_c);
  return l;
}

std::uint64_t DsaeParams::arch_hash() const {
  std::ostringstream os;
  auto conv = [&](const ConvLayer& l) {
    os << l.in_c << "," << l.out_c << "," << l.k << "," << l.stride << "," << l.pad << ";";
  };
  os << input_size << ";" << map_size << ";" << channels << ";" << downsample << ";";
  conv(conv1);
  conv(conv2);
  conv(conv3);
  return fnv1a64(os.str());
}

DsaeParams init_dsae(int input_size, int channels, int downsample, Rng& rng) {
  if (input_size < 16 || input_size % 4 != 0) {
    throw InvalidInput("init_dsae: input_size must be >= 16 and divisible by 4");
  }
  DsaeParams p;
  p.input_size = input_size;
  p.channels = channels;
  p.downsample = downsample > 0 ? downsample : input_size / 4;
  p.conv1 = make_conv(3, 64, 7, 2, 3, rng);
  p.conv2 = make_conv(64, 32, 5, 1, 2, rng);
  p.conv3 = make_conv(32, channels, 5, 1, 2, rng);
  p.bn1 = BatchNorm(64);
  p.bn2 = BatchNorm(32);
  p.bn3 = BatchNorm(channels);
  p.map_size = p.conv3.out_h(p.conv2.out_h(p.conv1.out_h(input_size)));
  p.rho = 0.0;
  const int d2 = p.downsample * p.downsample;
  p.dec_W.resize(d2, 2 * channels);
  for (int i = 0; i < d2; ++i) {
    for (int j = 0; j < 2 * channels; ++j) p.dec_W(i, j) = 0.01 * rng.normal();
  }
  p.dec_b = Eigen::VectorXd::Zero(d2);
  return p;
}

Eigen::MatrixXd spatial_softmax(const Eigen::MatrixXd& activation, double alpha) {
  if (!(alpha > 0.0)) throw InvalidInput("spatial_softmax: alpha must be positive");
  if (!activation.allFinite()) throw InvalidInput("spatial_softmax: non-finite activations");
  const double amax = activation.maxCoeff();
  Eigen::MatrixXd out = ((activation.array() - amax) / alpha).exp();
  out /= out.sum();
  return out;
}

Eigen::Vector2d expected_points(const Eigen::MatrixXd& prob_map) {
  const double total = prob_map.sum();
  if (std::abs(total - 1.0) > 1e-6) {
    throw InvalidInput("expected_points: map does not sum to 1");
  }
  const int h = static_cast<int>(prob_map.rows());
  const int w = static_cast<int>(prob_map.cols());
  double fx = 0.0, fy = 0.0;
  for (int i = 0; i < h; ++i) {
    const double gy = h > 1 ? -1.0 + 2.0 * i / (h - 1) : 0.0;
    for (int j = 0; j < w; ++j) {
      const double gx = w > 1 ? -1.0 + 2.0 * j / (w - 1) : 0.0;
      fx += gx * prob_map(i, j);
      fy += gy * prob_map(i, j);
    }
  }
  return {fx, fy};
}

double feature_presence(const Eigen::MatrixXd& prob_map, const Eigen::Vector2d& point_px) {
  const int h = static_cast<int>(prob_map.rows());
  const int w = static_cast<int>(prob_map.cols());
  const int cx = static_cast<int>(std::lround(point_px.x()));
  const int cy = static_cast<int>(std::lround(point_px.y()));
  if (cx < 0 || cx >= w || cy < 0 || cy >= h) {
    throw InvalidInput("feature_presence: point outside map");
  }
  double s = 0.0;
  for (int y = std::max(0, cy - 1); y <= std::min(h - 1, cy + 1); ++y) {
    for (int x = std::max(0, cx - 1); x <= std::min(w - 1, cx + 1); ++x) {
      s += prob_map(y, x);
    }
  }
  return s;
}

Eigen::Vector2d feature_to_map_px(const Eigen::Vector2d& f, int map_size) {
  const double scale = (map_size - 1) / 2.0;
  return {(f.x() + 1.0) * scale, (f.y() + 1.0) * scale};
}

Eigen::Vector2d feature_to_input_px(const Eigen::Vector2d& f, int map_size, int input_size) {
  // Same-padded stride-2 geometry: map cell (i, j) sits on input pixel
  // (stride*j, stride*i) with zero offset.
  const double stride = static_cast<double>(input_size) / map_size;
  return feature_to_map_px(f, map_size) * stride;
}

namespace {

Tensor3 image_to_tensor(const Image& img) {
  Tensor3 x(3, img.height, img.width);
  for (int c = 0; c < 3; ++c) {
    double* plane = x.plane(c);
    for (int y = 0; y < img.height; ++y) {
      for (int xx = 0; xx < img.width; ++xx) {
        plane[static_cast<std::size_t>(y) * img.width + xx] = img.at(xx, y, c);
      }
    }
  }
  return x;
}

}  // namespace

EncodeResult encode(const DsaeParams& p, const Image& img) {
  if (img.width != p.input_size || img.height != p.input_size) {
    throw InvalidInput("encode: image dimensions do not match the network input");
  }
  Tensor3 t = image_to_tensor(img);
  t = conv_forward(p.conv1, t);
  bn_apply_eval(p.bn1, t);
  relu_inplace(t);
  t = conv_forward(p.conv2, t);
  bn_apply_eval(p.bn2, t);
  relu_inplace(t);
  t = conv_forward(p.conv3, t);
  bn_apply_eval(p.bn3, t);
  relu_inplace(t);

  const double alpha = p.alpha();
  const int m = t.h;
  EncodeResult res;
  res.softmax_maps.reserve(p.channels);
  res.feature_vec.resize(2 * p.channels);
  for (int c = 0; c < p.channels; ++c) {
    Eigen::MatrixXd act(m, m);
    const double* plane = t.plane(c);
    for (int y = 0; y < m; ++y) {
      for (int x = 0; x < m; ++x) act(y, x) = plane[static_cast<std::size_t>(y) * m + x];
    }
    Eigen::MatrixXd s = spatial_softmax(act, alpha);
    Eigen::Vector2d f = expected_points(s);
    res.features.points.push_back(f);
    res.features.presence.push_back(feature_presence(s, feature_to_map_px(f, m)));
    res.feature_vec[2 * c] = f.x();
    res.feature_vec[2 * c + 1] = f.y();
    res.softmax_maps.push_back(std::move(s));
  }
  return res;
}

Eigen::VectorXd decode(const DsaeParams& p, const Eigen::VectorXd& feature_vec) {
  if (feature_vec.size() != 2 * p.channels) {
    throw InvalidInput("decode: feature vector length must be 2*channels");
  }
  return p.dec_W * feature_vec + p.dec_b;
}

Eigen::VectorXd recon_target(const Image& img, int downsample) {
  const int factor = img.width / downsample;
  std::vector<double> gray = to_grayscale(img);
  std::vector<double> small = downsample_gray(gray, img.width, img.height, factor);
  return Eigen::Map<Eigen::VectorXd>(small.data(), static_cast<Eigen::Index>(small.size()));
}

void DsaeGrads::init_like(const DsaeParams& p) {
  g1.init_like(p.conv1);
  g2.init_like(p.conv2);
  g3.init_like(p.conv3);
  b1.init_like(p.bn1);
  b2.init_like(p.bn2);
  b3.init_like(p.bn3);
  drho = 0.0;
  d_dec_W = Eigen::MatrixXd::Zero(p.dec_W.rows(), p.dec_W.cols());
  d_dec_b = Eigen::VectorXd::Zero(p.dec_b.size());
}

namespace {

void put_matrix(TensorArchive& a, const std::string& name, const Eigen::MatrixXd& m) {
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      data[static_cast<std::size_t>(r) * m.cols() + c] = m(r, c);
    }
  }
  a.put(name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
        std::move(data));
}

Eigen::MatrixXd get_matrix(const TensorArchive& a, const std::string& name) {
  const auto& e = a.get(name);
  if (e.dims.size() != 2) throw InvalidInput("tensor '" + name + "' is not a matrix");
  Eigen::MatrixXd m(e.dims[0], e.dims[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = e.data[static_cast<std::size_t>(r) * m.cols() + c];
    }
  }
  return m;
}

void put_vec(TensorArchive& a, const std::string& name, const Eigen::VectorXd& v) {
  a.put(name, {static_cast<std::uint64_t>(v.size())},
        std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd get_vec(const TensorArchive& a, const std::string& name) {
  const auto& e = a.get(name);
  return Eigen::Map<const Eigen::VectorXd>(e.data.data(),
                                           static_cast<Eigen::Index>(e.data.size()));
}

void save_conv(TensorArchive& a, const std::string& prefix, const ConvLayer& l) {
  put_matrix(a, prefix + "_W", l.W);
  put_vec(a, prefix + "_b", l.b);
  a.put(prefix + "_spec", {5},
        {static_cast<double>(l.in_c), static_cast<double>(l.out_c),
         static_cast<double>(l.k), static_cast<double>(l.stride),
         static_cast<double>(l.pad)});
}

ConvLayer load_conv(const TensorArchive& a, const std::string& prefix) {
  ConvLayer l;
  const auto& spec = a.get(prefix + "_spec").data;
  l.in_c = static_cast<int>(spec[0]);
  l.out_c = static_cast<int>(spec[1]);
  l.k = static_cast<int>(spec[2]);
  l.stride = static_cast<int>(spec[3]);
  l.pad = static_cast<int>(spec[4]);
  l.W = get_matrix(a, prefix + "_W");
  l.b = get_vec(a, prefix + "_b");
  return l;
}

void save_bn(TensorArchive& a, const std::string& prefix, const BatchNorm& bn) {
  put_vec(a, prefix + "_gamma", bn.gamma);
  put_vec(a, prefix + "_beta", bn.beta);
  put_vec(a, prefix + "_mean", bn.running_mean);
  put_vec(a, prefix + "_var", bn.running_var);
}

BatchNorm load_bn(const TensorArchive& a, const std::string& prefix) {
  BatchNorm bn;
  bn.gamma = get_vec(a, prefix + "_gamma");
  bn.beta = get_vec(a, prefix + "_beta");
  bn.running_mean = get_vec(a, prefix + "_mean");
  bn.running_var = get_vec(a, prefix + "_var");
  return bn;
}

}  // namespace

void save_dsae(const std::string& path, const DsaeParams& p) {
  TensorArchive a;
  a.put("meta", {4},
        {static_cast<double>(p.input_size), static_cast<double>(p.map_size),
         static_cast<double>(p.channels), static_cast<double>(p.downsample)});
  save_conv(a, "conv1", p.conv1);
  save_conv(a, "conv2", p.conv2);
  save_conv(a, "conv3", p.conv3);
  save_bn(a, "bn1", p.bn1);
  save_bn(a, "bn2", p.bn2);
  save_bn(a, "bn3", p.bn3);
  a.put_scalar("rho", p.rho);
  put_matrix(a, "dec_W", p.dec_W);
  put_vec(a, "dec_b", p.dec_b);
  a.save(path);

  nlohmann::json manifest;
  manifest["arch_hash"] = hex64(p.arch_hash());
  manifest["alpha"] = p.alpha();
  manifest["input_size"] = p.input_size;
  manifest["map_size"] = p.map_size;
  manifest["channels"] = p.channels;
  manifest["downsample"] = p.downsample;
  manifest["grayscale_weights"] = {0.299, 0.587, 0.114};
  manifest["point_grid"] = "pixel 0 -> -1, pixel n-1 -> +1";
  std::ofstream f(path + ".json");
  if (!f) throw InvalidInput("cannot write model manifest: " + path + ".json");
  f << manifest.dump(1) << "\n";
}

DsaeParams load_dsae(const std::string& path) {
  TensorArchive a = TensorArchive::load(path);
  DsaeParams p;
  const auto& meta = a.get("meta").data;
  p.input_size = static_cast<int>(meta[0]);
  p.map_size = static_cast<int>(meta[1]);
  p.channels = static_cast<int>(meta[2]);
  p.downsample = static_cast<int>(meta[3]);
  p.conv1 = load_conv(a, "conv1");
  p.conv2 = load_conv(a, "conv2");
  p.conv3 = load_conv(a, "conv3");
  p.bn1 = load_bn(a, "bn1");
  p.bn2 = load_bn(a, "bn2");
  p.bn3 = load_bn(a, "bn3");
  p.rho = a.get_scalar("rho");
  p.dec_W = get_matrix(a, "dec_W");
  p.dec_b = get_vec(a, "dec_b");

  std::ifstream f(path + ".json");
  if (f) {
    nlohmann::json manifest = nlohmann::json::parse(f);
    const std::string stored = manifest.at("arch_hash").get<std::string>();
    if (stored != hex64(p.arch_hash())) {
      throw InvalidInput("model manifest architecture hash mismatch: " + path);
    }
  }
  return p;
}

}  // namespace dsrl
