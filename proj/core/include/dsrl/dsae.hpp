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

#include <functional>
#include <string>
#include <vector>

#include "dsrl/image.hpp"
#include "dsrl/nnops.hpp"
#include "dsrl/recording.hpp"

namespace dsrl {

/// Spatial autoencoder parameters: three conv+batchnorm+ReLU stages, a
/// spatial softmax bottleneck with learned temperature, and a linear
/// decoder onto a downsampled grayscale target.
struct DsaeParams {
  int input_size = 64;   // square RGB input
  int map_size = 0;      // conv3 output side (derived from input_size)
  int channels = 16;     // conv3 output channels = number of feature points
  int downsample = 16;   // decoder target side D = input_size/4

  ConvLayer conv1, conv2, conv3;
  BatchNorm bn1, bn2, bn3;
  double rho = 0.0;  // temperature alpha = exp(rho) > 0 by construction
  Eigen::MatrixXd dec_W;  // D*D x 2*channels
  Eigen::VectorXd dec_b;  // D*D

  double alpha() const { return std::exp(rho); }
  int feature_dim() const { return 2 * channels; }

  /// Hash over the architecture-defining integers; stored in manifests and
  /// checked on load.
  std::uint64_t arch_hash() const;
};

/// He-scaled random initialization. The conv geometry uses stride-2 "same"
/// padding on conv1 and stride-1 "same" padding on conv2/conv3, so a
/// feature map cell (i, j) is centered on input pixel (2i, 2j).
DsaeParams init_dsae(int input_size, int channels, int downsample, Rng& rng);

struct FeaturePointSet {
  std::vector<Eigen::Vector2d> points;  // normalized [-1,1]^2, (x, y)
  std::vector<double> presence;         // [0, 1]
};

/// Softmax over spatial locations with temperature alpha (max-subtracted).
/// Output is nonnegative and sums to 1.
Eigen::MatrixXd spatial_softmax(const Eigen::MatrixXd& activation, double alpha);

/// Expected position under a probability map, on the grid that maps pixel
/// 0 to -1 and pixel n-1 to +1 per axis. x follows columns, y follows rows.
/// Throws unless entries sum to 1 within 1e-6.
Eigen::Vector2d expected_points(const Eigen::MatrixXd& prob_map);

/// Sum of the 3x3 probability window centered at the rounded point
/// (map-pixel coordinates); the window is clipped at map borders.
double feature_presence(const Eigen::MatrixXd& prob_map, const Eigen::Vector2d& point_px);

/// Converts a normalized feature point to map-pixel and input-pixel
/// coordinates for the geometry above.
Eigen::Vector2d feature_to_map_px(const Eigen::Vector2d& f, int map_size);
Eigen::Vector2d feature_to_input_px(const Eigen::Vector2d& f, int map_size, int input_size);

/// He-initialized conv layer; exposed so small test networks can be
/// assembled directly.
ConvLayer make_conv(int in_c, int out_c, int k, int stride, int pad, Rng& rng);

struct EncodeResult {
  std::vector<Eigen::MatrixXd> softmax_maps;  // one per channel
  FeaturePointSet features;
  Eigen::VectorXd feature_vec;  // interleaved (x_0, y_0, x_1, y_1, ...)
};

/// Inference-mode encoding (running batch-norm statistics): a pure
/// function of (params, image).
EncodeResult encode(const DsaeParams& p, const Image& img);

/// Linear decode of an interleaved feature vector to a D*D grayscale image
/// (row-major).
Eigen::VectorXd decode(const DsaeParams& p, const Eigen::VectorXd& feature_vec);

/// Downsampled grayscale reconstruction target for an input frame.
Eigen::VectorXd recon_target(const Image& img, int downsample);

struct TrainHyper {
  double learning_rate = 5e-3;
  double momentum = 0.9;
  int batch_size = 10;        // windows per SGD step
  int epochs = 5;
  double slowness_weight = 1.0;
  int downsample = 0;         // 0 = input_size/4
  int channels = 16;
  int window_len = 12;        // frames per window (>= seq len = full batch)
  int max_batches_per_epoch = 0;  // 0 = sweep all windows
};

/// A sequence is a list of frames in temporal order. The slowness penalty
/// only couples frames inside one sequence.
using ImageSeq = std::vector<Image>;

/// Sum over frames of squared reconstruction error against the downsampled
/// grayscale target, plus slowness_weight times the squared second
/// difference of feature points over within-sequence triples. Batch-norm
/// uses statistics of all frames passed in, so the value is a deterministic
/// pure function of (params, sequences).
double dsae_loss(const DsaeParams& p, const std::vector<ImageSeq>& sequences,
                 double slowness_weight);

struct DsaeGrads {
  ConvGrad g1, g2, g3;
  BnGrad b1, b2, b3;
  double drho = 0.0;
  Eigen::MatrixXd d_dec_W;
  Eigen::VectorXd d_dec_b;

  void init_like(const DsaeParams& p);
};

/// dsae_loss plus its full analytic gradient (including backprop through
/// the batch statistics). Used by training and the finite-difference
/// checks.
double dsae_loss_grad(const DsaeParams& p, const std::vector<ImageSeq>& sequences,
                      double slowness_weight, DsaeGrads& grads);

struct TrainCallbacks {
  // epoch index, mean per-frame loss over the epoch's batches
  std::function<void(int, double)> on_epoch;
};

/// SGD with momentum over window minibatches. Each epoch partitions every
/// episode into contiguous windows at a seeded random offset, shuffles
/// them, and sweeps (optionally capped by max_batches_per_epoch). Batch
/// norm runs in training mode; running statistics are frozen at the end.
/// Deterministic given (dataset, hyper, seed). Throws on divergence.
DsaeParams train_dsae(const Dataset& ds, const TrainHyper& hyper, std::uint64_t seed,
                      const TrainCallbacks& cb = {});

/// As above but starting from `init` when non-null (warm start hook).
DsaeParams train_dsae(const Dataset& ds, const TrainHyper& hyper, std::uint64_t seed,
                      const DsaeParams* init, const TrainCallbacks& cb = {});

/// Model archive IO: named tensors plus a JSON manifest side file
/// (<path>.json) recording the architecture hash, alpha, and sizes.
void save_dsae(const std::string& path, const DsaeParams& p);
DsaeParams load_dsae(const std::string& path);

}  // namespace dsrl
