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

#include "dsrl/baseline_ae.hpp"

#include <cmath>
#include <sstream>

#include "dsrl/archive.hpp"

namespace dsrl {

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

BaselineAeParams init_baseline_ae(int input_size, int channels, int downsample,
                                  int pool_k, Rng& rng) {
  BaselineAeParams p;
  p.input_size = input_size;
  p.channels = channels;
  p.downsample = downsample > 0 ? downsample : input_size / 4;
  p.pool_k = pool_k;
  p.conv1 = make_conv(3, 64, 7, 2, 3, rng);
  p.conv2 = make_conv(64, 32, 5, 1, 2, rng);
  p.conv3 = make_conv(32, channels, 5, 1, 2, rng);
  p.bn1 = BatchNorm(64);
  p.bn2 = BatchNorm(32);
  p.bn3 = BatchNorm(channels);
  p.map_size = p.conv3.out_h(p.conv2.out_h(p.conv1.out_h(input_size)));
  if (p.map_size % pool_k != 0) throw InvalidInput("baseline: pool_k must divide map size");
  const int d2 = p.downsample * p.downsample;
  p.dec_W.resize(d2, p.bottleneck_dim());
  for (int i = 0; i < d2; ++i) {
    for (int j = 0; j < p.bottleneck_dim(); ++j) p.dec_W(i, j) = 0.01 * rng.normal();
  }
  p.dec_b = Eigen::VectorXd::Zero(d2);
  return p;
}

namespace {

Eigen::VectorXd bottleneck_eval(const BaselineAeParams& p, const Image& img,
                                std::vector<int>* argmax) {
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
  std::vector<int> am;
  Tensor3 pooled = maxpool_forward(t, p.pool_k, argmax ? *argmax : am);
  return Eigen::Map<Eigen::VectorXd>(pooled.v.data(),
                                     static_cast<Eigen::Index>(pooled.v.size()));
}

}  // namespace

double baseline_recon_loss(const BaselineAeParams& p, const std::vector<Image>& frames) {
  double loss = 0.0;
  for (const Image& img : frames) {
    Eigen::VectorXd z = bottleneck_eval(p, img, nullptr);
    Eigen::VectorXd recon = p.dec_W * z + p.dec_b;
    loss += (recon - recon_target(img, p.downsample)).squaredNorm();
  }
  return loss;
}

BaselineAeParams train_baseline_ae(const Dataset& ds, const TrainHyper& hyper,
                                   std::uint64_t seed, const TrainCallbacks& cb) {
  Rng rng(seed);
  const int D = hyper.downsample > 0 ? hyper.downsample : ds.image_size / 4;
  BaselineAeParams p = init_baseline_ae(ds.image_size, hyper.channels, D, 8, rng);

  std::vector<std::pair<int, int>> all;  // (episode, frame)
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
    for (std::size_t t = 0; t < ds.episodes[e].frames.size(); ++t) {
      all.emplace_back(static_cast<int>(e), static_cast<int>(t));
    }
  }
  if (all.empty()) throw InvalidInput("train_baseline_ae: empty dataset");

  const int batch_frames = std::max(4, hyper.batch_size * 3);
  DsaeGrads vel;  // reuses the conv/bn slots; decoder slots resized below
  vel.g1.init_like(p.conv1);
  vel.g2.init_like(p.conv2);
  vel.g3.init_like(p.conv3);
  vel.b1.init_like(p.bn1);
  vel.b2.init_like(p.bn2);
  vel.b3.init_like(p.bn3);
  vel.d_dec_W = Eigen::MatrixXd::Zero(p.dec_W.rows(), p.dec_W.cols());
  vel.d_dec_b = Eigen::VectorXd::Zero(p.dec_b.size());

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = all.size(); i > 1; --i) {
      std::swap(all[i - 1], all[rng.uniform_int(i)]);
    }
    int nbatch = static_cast<int>((all.size() + batch_frames - 1) / batch_frames);
    if (hyper.max_batches_per_epoch > 0) nbatch = std::min(nbatch, hyper.max_batches_per_epoch);

    double epoch_loss = 0.0;
    std::size_t epoch_frames = 0;
    for (int b = 0; b < nbatch; ++b) {
      const std::size_t lo = static_cast<std::size_t>(b) * batch_frames;
      const std::size_t hi = std::min(all.size(), lo + batch_frames);
      const std::size_t n = hi - lo;

      // Forward with batch statistics, serial per stage.
      std::vector<Image> imgs;
      imgs.reserve(n);
      for (std::size_t i = lo; i < hi; ++i) {
        imgs.push_back(dequantize(ds.episodes[all[i].first].frames[all[i].second]));
      }
      std::vector<Tensor3> x(n), a(n), xh1(n), y1(n), xh2(n), y2(n), xh3(n), y3(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = image_to_tensor(imgs[i]);
        a[i] = conv_forward(p.conv1, x[i]);
      }
      BnAccumulator acc1;
      for (auto& t : a) acc1.add(t);
      const BnStats st1 = acc1.finalize(p.bn1.eps);
      for (std::size_t i = 0; i < n; ++i) {
        bn_apply_train(st1, p.bn1, a[i], xh1[i], y1[i]);
        relu_inplace(y1[i]);
        a[i] = conv_forward(p.conv2, y1[i]);
      }
      BnAccumulator acc2;
      for (auto& t : a) acc2.add(t);
      const BnStats st2 = acc2.finalize(p.bn2.eps);
      for (std::size_t i = 0; i < n; ++i) {
        bn_apply_train(st2, p.bn2, a[i], xh2[i], y2[i]);
        relu_inplace(y2[i]);
        a[i] = conv_forward(p.conv3, y2[i]);
      }
      BnAccumulator acc3;
      for (auto& t : a) acc3.add(t);
      const BnStats st3 = acc3.finalize(p.bn3.eps);

      std::vector<std::vector<int>> argmax(n);
      std::vector<Eigen::VectorXd> z(n), drecon(n);
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        bn_apply_train(st3, p.bn3, a[i], xh3[i], y3[i]);
        relu_inplace(y3[i]);
        Tensor3 pooled = maxpool_forward(y3[i], p.pool_k, argmax[i]);
        z[i] = Eigen::Map<Eigen::VectorXd>(pooled.v.data(),
                                           static_cast<Eigen::Index>(pooled.v.size()));
        Eigen::VectorXd resid = p.dec_W * z[i] + p.dec_b - recon_target(imgs[i], p.downsample);
        loss += resid.squaredNorm();
        drecon[i] = 2.0 * resid;
      }
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "train_baseline_ae: loss diverged at epoch " << epoch << " (learning rate "
           << hyper.learning_rate << ")";
        throw PipelineAbort(os.str());
      }

      // Backward, serial fixed order.
      DsaeGrads g;
      g.g1.init_like(p.conv1);
      g.g2.init_like(p.conv2);
      g.g3.init_like(p.conv3);
      g.b1.init_like(p.bn1);
      g.b2.init_like(p.bn2);
      g.b3.init_like(p.bn3);
      g.d_dec_W = Eigen::MatrixXd::Zero(p.dec_W.rows(), p.dec_W.cols());
      g.d_dec_b = Eigen::VectorXd::Zero(p.dec_b.size());

      std::vector<Tensor3> dy(n);
      const int side = p.map_size / p.pool_k;
      for (std::size_t i = 0; i < n; ++i) {
        g.d_dec_W.noalias() += drecon[i] * z[i].transpose();
        g.d_dec_b += drecon[i];
        Eigen::VectorXd dz = p.dec_W.transpose() * drecon[i];
        Tensor3 dpool(p.channels, side, side);
        std::copy(dz.data(), dz.data() + dz.size(), dpool.v.begin());
        dy[i] = maxpool_backward(dpool, p.map_size, p.map_size, p.pool_k, argmax[i]);
        relu_backward_inplace(y3[i], dy[i]);
      }
      auto bn_stage = [&](const BatchNorm& bn, const BnStats& st, BnGrad& bg,
                          std::vector<Tensor3>& xhats) {
        std::vector<const Tensor3*> dys(n), xhp(n);
        for (std::size_t i = 0; i < n; ++i) {
          dys[i] = &dy[i];
          xhp[i] = &xhats[i];
        }
        const BnBackSums sums = bn_backward_reduce(dys, xhp);
        bg.dgamma += sums.sum_dy_xhat;
        bg.dbeta += sums.sum_dy;
        return sums;
      };
      const BnBackSums s3 = bn_stage(p.bn3, st3, g.b3, xh3);
      for (std::size_t i = 0; i < n; ++i) {
        bn_backward_apply(p.bn3, st3, s3, xh3[i], dy[i]);
        Tensor3 dprev = conv_backward(p.conv3, y2[i], dy[i], g.g3);
        relu_backward_inplace(y2[i], dprev);
        dy[i] = std::move(dprev);
      }
      const BnBackSums s2 = bn_stage(p.bn2, st2, g.b2, xh2);
      for (std::size_t i = 0; i < n; ++i) {
        bn_backward_apply(p.bn2, st2, s2, xh2[i], dy[i]);
        Tensor3 dprev = conv_backward(p.conv2, y1[i], dy[i], g.g2);
        relu_backward_inplace(y1[i], dprev);
        dy[i] = std::move(dprev);
      }
      const BnBackSums s1 = bn_stage(p.bn1, st1, g.b1, xh1);
      for (std::size_t i = 0; i < n; ++i) {
        bn_backward_apply(p.bn1, st1, s1, xh1[i], dy[i]);
        conv_backward_params(p.conv1, x[i], dy[i], g.g1);
      }

      const double inv = 1.0 / static_cast<double>(n);
      const double lr = hyper.learning_rate, mom = hyper.momentum;
      auto upd = [&](auto& param, auto& v, const auto& grad) {
        v = mom * v - lr * inv * grad;
        param += v;
      };
      upd(p.conv1.W, vel.g1.dW, g.g1.dW);
      upd(p.conv1.b, vel.g1.db, g.g1.db);
      upd(p.conv2.W, vel.g2.dW, g.g2.dW);
      upd(p.conv2.b, vel.g2.db, g.g2.db);
      upd(p.conv3.W, vel.g3.dW, g.g3.dW);
      upd(p.conv3.b, vel.g3.db, g.g3.db);
      upd(p.bn1.gamma, vel.b1.dgamma, g.b1.dgamma);
      upd(p.bn1.beta, vel.b1.dbeta, g.b1.dbeta);
      upd(p.bn2.gamma, vel.b2.dgamma, g.b2.dgamma);
      upd(p.bn2.beta, vel.b2.dbeta, g.b2.dbeta);
      upd(p.bn3.gamma, vel.b3.dgamma, g.b3.dgamma);
      upd(p.bn3.beta, vel.b3.dbeta, g.b3.dbeta);
      upd(p.dec_W, vel.d_dec_W, g.d_dec_W);
      upd(p.dec_b, vel.d_dec_b, g.d_dec_b);
      bn_update_running(p.bn1, st1);
      bn_update_running(p.bn2, st2);
      bn_update_running(p.bn3, st3);
      epoch_loss += loss;
      epoch_frames += n;
    }
    if (cb.on_epoch) cb.on_epoch(epoch, epoch_loss / static_cast<double>(epoch_frames));
  }
  return p;
}

void save_baseline_ae(const std::string& path, const BaselineAeParams& p) {
  TensorArchive a;
  a.put("meta", {5},
        {static_cast<double>(p.input_size), static_cast<double>(p.map_size),
         static_cast<double>(p.channels), static_cast<double>(p.pool_k),
         static_cast<double>(p.downsample)});
  auto put_matrix = [&](const std::string& name, const Eigen::MatrixXd& m) {
    std::vector<double> data(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        data[static_cast<std::size_t>(r) * m.cols() + c] = m(r, c);
      }
    }
    a.put(name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
          std::move(data));
  };
  auto put_vec = [&](const std::string& name, const Eigen::VectorXd& v) {
    a.put(name, {static_cast<std::uint64_t>(v.size())},
          std::vector<double>(v.data(), v.data() + v.size()));
  };
  auto save_conv = [&](const std::string& prefix, const ConvLayer& l) {
    put_matrix(prefix + "_W", l.W);
    put_vec(prefix + "_b", l.b);
  };
  save_conv("conv1", p.conv1);
  save_conv("conv2", p.conv2);
  save_conv("conv3", p.conv3);
  auto save_bn = [&](const std::string& prefix, const BatchNorm& bn) {
    put_vec(prefix + "_gamma", bn.gamma);
    put_vec(prefix + "_beta", bn.beta);
    put_vec(prefix + "_mean", bn.running_mean);
    put_vec(prefix + "_var", bn.running_var);
  };
  save_bn("bn1", p.bn1);
  save_bn("bn2", p.bn2);
  save_bn("bn3", p.bn3);
  put_matrix("dec_W", p.dec_W);
  put_vec("dec_b", p.dec_b);
  a.save(path);
}

}  // namespace dsrl
