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

#include "dsrl/dsae.hpp"

namespace dsrl {

/// Ablation autoencoder: the same conv trunk as the spatial autoencoder
/// but with a max-pool bottleneck instead of the spatial softmax, so it
/// has no feature points. Used only for reconstruction comparisons.
struct BaselineAeParams {
  int input_size = 64;
  int map_size = 0;
  int channels = 16;
  int pool_k = 8;
  int downsample = 16;

  ConvLayer conv1, conv2, conv3;
  BatchNorm bn1, bn2, bn3;
  Eigen::MatrixXd dec_W;  // D*D x bottleneck
  Eigen::VectorXd dec_b;

  int bottleneck_dim() const {
    const int side = map_size / pool_k;
    return channels * side * side;
  }
};

BaselineAeParams init_baseline_ae(int input_size, int channels, int downsample,
                                  int pool_k, Rng& rng);

/// Inference-mode reconstruction loss (running statistics), summed over
/// frames.
double baseline_recon_loss(const BaselineAeParams& p, const std::vector<Image>& frames);

/// SGD training on individual frames (no slowness term; the bottleneck is
/// not a feature-point set). Deterministic given the seed.
BaselineAeParams train_baseline_ae(const Dataset& ds, const TrainHyper& hyper,
                                   std::uint64_t seed, const TrainCallbacks& cb = {});

void save_baseline_ae(const std::string& path, const BaselineAeParams& p);

}  // namespace dsrl
