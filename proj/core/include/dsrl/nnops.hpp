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

#include <Eigen/Dense>
#include <vector>

#include "dsrl/common.hpp"

namespace dsrl {

/// Dense C x H x W tensor, row-major within each channel plane.
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int c_, int h_, int w_)
      : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}

  double& at(int ci, int y, int x) {
    return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
  }
  double at(int ci, int y, int x) const {
    return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
  }
  const double* plane(int ci) const { return &v[static_cast<std::size_t>(ci) * h * w]; }
  double* plane(int ci) { return &v[static_cast<std::size_t>(ci) * h * w]; }
  std::size_t size() const { return v.size(); }
};

/// 2D convolution with square kernel; weights flattened so that
/// W(o, (ci*k + ky)*k + kx) multiplies input channel ci at offset (ky, kx).
struct ConvLayer {
  int in_c = 0, out_c = 0, k = 1, stride = 1, pad = 0;
  Eigen::MatrixXd W;  // out_c x (in_c*k*k)
  Eigen::VectorXd b;  // out_c

  int out_h(int in_h) const { return (in_h + 2 * pad - k) / stride + 1; }
  int out_w(int in_w) const { return (in_w + 2 * pad - k) / stride + 1; }
};

struct ConvGrad {
  Eigen::MatrixXd dW;
  Eigen::VectorXd db;

  void init_like(const ConvLayer& l) {
    dW = Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols());
    db = Eigen::VectorXd::Zero(l.b.size());
  }
  void add(const ConvGrad& o) {
    dW += o.dW;
    db += o.db;
  }
};

/// Unrolls x into (in_c*k*k) x (out_h*out_w) patch columns; zero padding.
void im2col(const Tensor3& x, int k, int stride, int pad, Eigen::MatrixXd& cols);

/// Scatter-adds patch-column gradients back into dx (must be presized).
void col2im(const Eigen::MatrixXd& cols, int k, int stride, int pad, Tensor3& dx);

Tensor3 conv_forward(const ConvLayer& l, const Tensor3& x);

/// Computes dx and accumulates weight gradients into g (which must be
/// initialized). The input x is re-unrolled internally; the forward pass
/// does not need to cache the patch matrix.
Tensor3 conv_backward(const ConvLayer& l, const Tensor3& x, const Tensor3& dy,
                      ConvGrad& g);

/// Weight gradients only; used at the first layer where dx is unneeded.
void conv_backward_params(const ConvLayer& l, const Tensor3& x, const Tensor3& dy,
                          ConvGrad& g);

/// Per-channel batch normalization state. Training-mode statistics are
/// computed over every (sample, y, x) position of a minibatch; running
/// statistics (biased variance) feed inference mode.
struct BatchNorm {
  Eigen::VectorXd gamma, beta, running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  explicit BatchNorm(int channels = 0)
      : gamma(Eigen::VectorXd::Ones(channels)),
        beta(Eigen::VectorXd::Zero(channels)),
        running_mean(Eigen::VectorXd::Zero(channels)),
        running_var(Eigen::VectorXd::Ones(channels)) {}
};

struct BnGrad {
  Eigen::VectorXd dgamma, dbeta;

  void init_like(const BatchNorm& bn) {
    dgamma = Eigen::VectorXd::Zero(bn.gamma.size());
    dbeta = Eigen::VectorXd::Zero(bn.beta.size());
  }
  void add(const BnGrad& o) {
    dgamma += o.dgamma;
    dbeta += o.dbeta;
  }
};

/// Minibatch statistics; count is the per-channel reduction size B*H*W.
struct BnStats {
  Eigen::VectorXd mean, invstd;
  std::size_t count = 0;
};

/// Streaming accumulator for batch statistics. Adding samples in a fixed
/// order makes the result deterministic and identical between the batched
/// and streaming forward paths.
struct BnAccumulator {
  Eigen::VectorXd sum, sumsq;
  std::size_t count = 0;

  void add(const Tensor3& x);
  BnStats finalize(double eps) const;
};

/// Serial fixed-order reduction over the batch (deterministic for any
/// worker count; callers parallelize only the per-sample phases).
BnStats bn_compute_stats(const std::vector<const Tensor3*>& xs, double eps);

/// y = gamma * xhat + beta with batch statistics; xhat stored for backward.
void bn_apply_train(const BnStats& st, const BatchNorm& bn, const Tensor3& x,
                    Tensor3& xhat, Tensor3& y);

void bn_update_running(BatchNorm& bn, const BnStats& st);

/// In-place inference-mode normalization using running statistics.
void bn_apply_eval(const BatchNorm& bn, Tensor3& x);

/// Per-channel sums of dy and dy*xhat over the whole minibatch, needed by
/// the training-mode backward pass (batch statistics couple the samples).
struct BnBackSums {
  Eigen::VectorXd sum_dy, sum_dy_xhat;
};

BnBackSums bn_backward_reduce(const std::vector<const Tensor3*>& dys,
                              const std::vector<const Tensor3*>& xhats);

/// Transforms dy (gradient wrt bn output) into gradient wrt bn input,
/// in place, for one sample.
void bn_backward_apply(const BatchNorm& bn, const BnStats& st, const BnBackSums& sums,
                       const Tensor3& xhat, Tensor3& dy);

void relu_inplace(Tensor3& x);

/// dy *= (y_post > 0), where y_post is the stored post-activation output.
void relu_backward_inplace(const Tensor3& y_post, Tensor3& dy);

/// Non-overlapping max pooling (k == stride); argmax indices are flat
/// offsets into the input plane, recorded for the backward pass.
Tensor3 maxpool_forward(const Tensor3& x, int k, std::vector<int>& argmax);
Tensor3 maxpool_backward(const Tensor3& dy, int in_h, int in_w, int k,
                         const std::vector<int>& argmax);

}  // namespace dsrl
