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

#include <cmath>
#include <sstream>
#include <utility>

#include "dsrl/dsae.hpp"

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

// Softmax over one activation plane plus expected point; raw-pointer twin
// of the public spatial_softmax/expected_points pair, used on the hot path.
void softmax_plane(const double* a, int m, double alpha, double* s, Eigen::Vector2d& f) {
  const std::size_t n = static_cast<std::size_t>(m) * m;
  double amax = a[0];
  for (std::size_t i = 1; i < n; ++i) amax = std::max(amax, a[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = std::exp((a[i] - amax) / alpha);
    total += s[i];
  }
  const double inv = 1.0 / total;
  double fx = 0.0, fy = 0.0;
  const double gscale = m > 1 ? 2.0 / (m - 1) : 0.0;
  std::size_t idx = 0;
  for (int y = 0; y < m; ++y) {
    const double gy = m > 1 ? -1.0 + gscale * y : 0.0;
    for (int x = 0; x < m; ++x, ++idx) {
      s[idx] *= inv;
      const double gx = m > 1 ? -1.0 + gscale * x : 0.0;
      fx += gx * s[idx];
      fy += gy * s[idx];
    }
  }
  f = {fx, fy};
}

struct FrameCache {
  Tensor3 x;
  Tensor3 a1, a2, a3;     // pre-batchnorm conv outputs (dropped after stats)
  Tensor3 xh1, xh2, xh3;  // normalized activations, kept for backward
  Tensor3 y1, y2, y3;     // post-ReLU stage outputs
  Tensor3 s;              // softmax probability maps
  Eigen::VectorXd f;      // interleaved feature points, 2C
  Eigen::VectorXd drecon; // 2*(recon - target)
  double recon_loss = 0.0;
  Eigen::VectorXd df;     // gradient wrt f
  Tensor3 dy;             // gradient flowing backward through the stages
};

struct Window {
  int start = 0;  // index into the flattened frame list
  int len = 0;
};

// Training-mode forward (and optional backward) over one minibatch. All
// frames share batch statistics. Returns the summed loss; per-frame work
// runs under parallel_for while every reduction is a fixed-order serial
// loop, so results are bitwise reproducible for any thread count.
double engine_run(const DsaeParams& p, const std::vector<const Image*>& frames,
                  const std::vector<Window>& windows, double slowness_weight,
                  DsaeGrads* grads, BnStats stats_out[3]) {
  const std::size_t n = frames.size();
  if (n == 0) throw InvalidInput("dsae engine: empty batch");
  const double alpha = p.alpha();
  const int C = p.channels;
  std::vector<FrameCache> fc(n);

  parallel_for(n, [&](std::size_t i) {
    fc[i].x = image_to_tensor(*frames[i]);
    fc[i].a1 = conv_forward(p.conv1, fc[i].x);
  });
  BnAccumulator acc1;
  for (std::size_t i = 0; i < n; ++i) acc1.add(fc[i].a1);
  const BnStats st1 = acc1.finalize(p.bn1.eps);

  parallel_for(n, [&](std::size_t i) {
    bn_apply_train(st1, p.bn1, fc[i].a1, fc[i].xh1, fc[i].y1);
    fc[i].a1 = Tensor3();
    relu_inplace(fc[i].y1);
    fc[i].a2 = conv_forward(p.conv2, fc[i].y1);
  });
  BnAccumulator acc2;
  for (std::size_t i = 0; i < n; ++i) acc2.add(fc[i].a2);
  const BnStats st2 = acc2.finalize(p.bn2.eps);

  parallel_for(n, [&](std::size_t i) {
    bn_apply_train(st2, p.bn2, fc[i].a2, fc[i].xh2, fc[i].y2);
    fc[i].a2 = Tensor3();
    relu_inplace(fc[i].y2);
    fc[i].a3 = conv_forward(p.conv3, fc[i].y2);
  });
  BnAccumulator acc3;
  for (std::size_t i = 0; i < n; ++i) acc3.add(fc[i].a3);
  const BnStats st3 = acc3.finalize(p.bn3.eps);

  const int m = p.map_size;
  parallel_for(n, [&](std::size_t i) {
    bn_apply_train(st3, p.bn3, fc[i].a3, fc[i].xh3, fc[i].y3);
    fc[i].a3 = Tensor3();
    relu_inplace(fc[i].y3);
    fc[i].s = Tensor3(C, m, m);
    fc[i].f.resize(2 * C);
    for (int c = 0; c < C; ++c) {
      Eigen::Vector2d f2;
      softmax_plane(fc[i].y3.plane(c), m, alpha, fc[i].s.plane(c), f2);
      fc[i].f[2 * c] = f2.x();
      fc[i].f[2 * c + 1] = f2.y();
    }
    Eigen::VectorXd recon = p.dec_W * fc[i].f + p.dec_b;
    Eigen::VectorXd resid = recon - recon_target(*frames[i], p.downsample);
    fc[i].recon_loss = resid.squaredNorm();
    fc[i].drecon = 2.0 * resid;
  });

  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) loss += fc[i].recon_loss;
  double slow = 0.0;
  for (const Window& w : windows) {
    for (int t = 1; t + 1 < w.len; ++t) {
      slow += (fc[w.start + t + 1].f - 2.0 * fc[w.start + t].f + fc[w.start + t - 1].f)
                  .squaredNorm();
    }
  }
  loss += slowness_weight * slow;

  if (stats_out) {
    stats_out[0] = st1;
    stats_out[1] = st2;
    stats_out[2] = st3;
  }
  if (!grads) return loss;

  // Backward. Decoder and slowness terms first (cheap, serial).
  for (std::size_t i = 0; i < n; ++i) fc[i].df = Eigen::VectorXd::Zero(2 * C);
  for (const Window& w : windows) {
    for (int t = 1; t + 1 < w.len; ++t) {
      const Eigen::VectorXd d =
          fc[w.start + t + 1].f - 2.0 * fc[w.start + t].f + fc[w.start + t - 1].f;
      fc[w.start + t + 1].df += 2.0 * slowness_weight * d;
      fc[w.start + t].df -= 4.0 * slowness_weight * d;
      fc[w.start + t - 1].df += 2.0 * slowness_weight * d;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    grads->d_dec_W.noalias() += fc[i].drecon * fc[i].f.transpose();
    grads->d_dec_b += fc[i].drecon;
    fc[i].df.noalias() += p.dec_W.transpose() * fc[i].drecon;
  }

  // Softmax-expectation backward; z = y3/alpha, d_rho = -sum(dz * z).
  std::vector<double> drho(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    fc[i].dy = Tensor3(C, m, m);
    const double gscale = m > 1 ? 2.0 / (m - 1) : 0.0;
    double dr = 0.0;
    for (int c = 0; c < C; ++c) {
      const double* s = fc[i].s.plane(c);
      const double* y3 = fc[i].y3.plane(c);
      double* dz = fc[i].dy.plane(c);
      const double dfx = fc[i].df[2 * c], dfy = fc[i].df[2 * c + 1];
      const double fx = fc[i].f[2 * c], fy = fc[i].f[2 * c + 1];
      std::size_t idx = 0;
      for (int y = 0; y < m; ++y) {
        const double gy = m > 1 ? -1.0 + gscale * y : 0.0;
        for (int x = 0; x < m; ++x, ++idx) {
          const double gx = m > 1 ? -1.0 + gscale * x : 0.0;
          const double d = s[idx] * ((gx - fx) * dfx + (gy - fy) * dfy);
          dz[idx] = d / alpha;
          dr -= d * (y3[idx] / alpha);
        }
      }
    }
    drho[i] = dr;
    relu_backward_inplace(fc[i].y3, fc[i].dy);
    fc[i].s = Tensor3();
  });

  std::vector<ConvGrad> g1(n), g2(n), g3(n);
  auto bn_stage = [&](const BatchNorm& bn, const BnStats& st, BnGrad& bg,
                      Tensor3 FrameCache::* xhat) {
    std::vector<const Tensor3*> dys(n), xhats(n);
    for (std::size_t i = 0; i < n; ++i) {
      dys[i] = &fc[i].dy;
      xhats[i] = &(fc[i].*xhat);
    }
    const BnBackSums sums = bn_backward_reduce(dys, xhats);
    bg.dgamma += sums.sum_dy_xhat;
    bg.dbeta += sums.sum_dy;
    return sums;
  };

  const BnBackSums s3 = bn_stage(p.bn3, st3, grads->b3, &FrameCache::xh3);
  parallel_for(n, [&](std::size_t i) {
    g3[i].init_like(p.conv3);
    bn_backward_apply(p.bn3, st3, s3, fc[i].xh3, fc[i].dy);
    fc[i].xh3 = Tensor3();
    Tensor3 dprev = conv_backward(p.conv3, fc[i].y2, fc[i].dy, g3[i]);
    fc[i].y3 = Tensor3();
    relu_backward_inplace(fc[i].y2, dprev);
    fc[i].dy = std::move(dprev);
  });

  const BnBackSums s2 = bn_stage(p.bn2, st2, grads->b2, &FrameCache::xh2);
  parallel_for(n, [&](std::size_t i) {
    g2[i].init_like(p.conv2);
    bn_backward_apply(p.bn2, st2, s2, fc[i].xh2, fc[i].dy);
    fc[i].xh2 = Tensor3();
    Tensor3 dprev = conv_backward(p.conv2, fc[i].y1, fc[i].dy, g2[i]);
    fc[i].y2 = Tensor3();
    relu_backward_inplace(fc[i].y1, dprev);
    fc[i].dy = std::move(dprev);
  });

  const BnBackSums s1 = bn_stage(p.bn1, st1, grads->b1, &FrameCache::xh1);
  parallel_for(n, [&](std::size_t i) {
    g1[i].init_like(p.conv1);
    bn_backward_apply(p.bn1, st1, s1, fc[i].xh1, fc[i].dy);
    fc[i].xh1 = Tensor3();
    conv_backward_params(p.conv1, fc[i].x, fc[i].dy, g1[i]);
    fc[i].y1 = Tensor3();
    fc[i].x = Tensor3();
    fc[i].dy = Tensor3();
  });

  for (std::size_t i = 0; i < n; ++i) {
    grads->g1.add(g1[i]);
    grads->g2.add(g2[i]);
    grads->g3.add(g3[i]);
    grads->drho += drho[i];
  }
  return loss;
}

void check_sequences(const std::vector<ImageSeq>& sequences) {
  if (sequences.empty()) throw InvalidInput("dsae: no sequences");
  for (const auto& s : sequences) {
    if (s.empty()) throw InvalidInput("dsae: empty sequence");
  }
}

}  // namespace

double dsae_loss_grad(const DsaeParams& p, const std::vector<ImageSeq>& sequences,
                      double slowness_weight, DsaeGrads& grads) {
  check_sequences(sequences);
  std::vector<const Image*> frames;
  std::vector<Window> windows;
  for (const ImageSeq& seq : sequences) {
    windows.push_back({static_cast<int>(frames.size()), static_cast<int>(seq.size())});
    for (const Image& img : seq) frames.push_back(&img);
  }
  return engine_run(p, frames, windows, slowness_weight, &grads, nullptr);
}

double dsae_loss(const DsaeParams& p, const std::vector<ImageSeq>& sequences,
                 double slowness_weight) {
  check_sequences(sequences);
  // Streaming evaluation: four passes with O(1 frame) memory so the full
  // 5000-frame dataset can be scored. Per-layer recomputation keeps the
  // arithmetic identical to the batched engine (same accumulation order).
  std::vector<const Image*> frames;
  std::vector<Window> windows;
  for (const ImageSeq& seq : sequences) {
    windows.push_back({static_cast<int>(frames.size()), static_cast<int>(seq.size())});
    for (const Image& img : seq) frames.push_back(&img);
  }
  const std::size_t n = frames.size();
  const double alpha = p.alpha();

  auto stage1 = [&](std::size_t i) { return conv_forward(p.conv1, image_to_tensor(*frames[i])); };
  BnAccumulator acc1;
  for (std::size_t i = 0; i < n; ++i) acc1.add(stage1(i));
  const BnStats st1 = acc1.finalize(p.bn1.eps);

  auto stage2 = [&](std::size_t i) {
    Tensor3 a1 = stage1(i), xh, y;
    bn_apply_train(st1, p.bn1, a1, xh, y);
    relu_inplace(y);
    return conv_forward(p.conv2, y);
  };
  BnAccumulator acc2;
  for (std::size_t i = 0; i < n; ++i) acc2.add(stage2(i));
  const BnStats st2 = acc2.finalize(p.bn2.eps);

  auto stage3 = [&](std::size_t i) {
    Tensor3 a2 = stage2(i), xh, y;
    bn_apply_train(st2, p.bn2, a2, xh, y);
    relu_inplace(y);
    return conv_forward(p.conv3, y);
  };
  BnAccumulator acc3;
  for (std::size_t i = 0; i < n; ++i) acc3.add(stage3(i));
  const BnStats st3 = acc3.finalize(p.bn3.eps);

  const int m = p.map_size;
  std::vector<Eigen::VectorXd> fs(n);
  double loss = 0.0;
  std::vector<double> smap(static_cast<std::size_t>(m) * m);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor3 a3 = stage3(i), xh, y3;
    bn_apply_train(st3, p.bn3, a3, xh, y3);
    relu_inplace(y3);
    Eigen::VectorXd f(2 * p.channels);
    for (int c = 0; c < p.channels; ++c) {
      Eigen::Vector2d f2;
      softmax_plane(y3.plane(c), m, alpha, smap.data(), f2);
      f[2 * c] = f2.x();
      f[2 * c + 1] = f2.y();
    }
    Eigen::VectorXd recon = p.dec_W * f + p.dec_b;
    loss += (recon - recon_target(*frames[i], p.downsample)).squaredNorm();
    fs[i] = std::move(f);
  }
  for (const Window& w : windows) {
    for (int t = 1; t + 1 < w.len; ++t) {
      loss += slowness_weight *
              (fs[w.start + t + 1] - 2.0 * fs[w.start + t] + fs[w.start + t - 1]).squaredNorm();
    }
  }
  return loss;
}

namespace {

void sgd_update(Eigen::MatrixXd& param, Eigen::MatrixXd& vel, const Eigen::MatrixXd& grad,
                double lr, double mom, double inv_n) {
  vel = mom * vel - lr * inv_n * grad;
  param += vel;
}

void sgd_update(Eigen::VectorXd& param, Eigen::VectorXd& vel, const Eigen::VectorXd& grad,
                double lr, double mom, double inv_n) {
  vel = mom * vel - lr * inv_n * grad;
  param += vel;
}

}  // namespace

DsaeParams train_dsae(const Dataset& ds, const TrainHyper& hyper, std::uint64_t seed,
                      const DsaeParams* init, const TrainCallbacks& cb) {
  int usable = 0;
  for (const auto& ep : ds.episodes) {
    if (ep.frames.size() >= 3) ++usable;
  }
  if (usable < 2) throw InvalidInput("train_dsae: need at least 2 sequences of 3+ frames");

  Rng rng(seed);
  const int D = hyper.downsample > 0 ? hyper.downsample : ds.image_size / 4;
  DsaeParams p = init ? *init : init_dsae(ds.image_size, hyper.channels, D, rng);

  DsaeGrads vel;
  vel.init_like(p);
  double vel_rho = 0.0;

  struct EpWindow {
    int ep, start, len;
  };
  const int wl = std::max(3, hyper.window_len);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::vector<EpWindow> wins;
    for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
      const int L = static_cast<int>(ds.episodes[e].frames.size());
      // Seam positions move between epochs so that every slowness triple
      // is eventually covered.
      const int off = L > wl ? static_cast<int>(rng.uniform_int(wl)) : 0;
      int s = 0;
      if (off > 0) {
        wins.push_back({static_cast<int>(e), 0, off});
        s = off;
      }
      while (s < L) {
        const int len = std::min(wl, L - s);
        wins.push_back({static_cast<int>(e), s, len});
        s += len;
      }
    }
    for (std::size_t i = wins.size(); i > 1; --i) {
      std::swap(wins[i - 1], wins[rng.uniform_int(i)]);
    }

    const int bs = std::max(1, hyper.batch_size);
    int nbatch = static_cast<int>((wins.size() + bs - 1) / bs);
    if (hyper.max_batches_per_epoch > 0) {
      nbatch = std::min(nbatch, hyper.max_batches_per_epoch);
    }

    double epoch_loss = 0.0;
    std::size_t epoch_frames = 0;
    for (int b = 0; b < nbatch; ++b) {
      std::vector<Image> storage;
      std::vector<const Image*> frames;
      std::vector<Window> windows;
      for (int wi = b * bs; wi < std::min<int>((b + 1) * bs, static_cast<int>(wins.size()));
           ++wi) {
        const EpWindow& w = wins[wi];
        windows.push_back({static_cast<int>(frames.size()), w.len});
        for (int t = 0; t < w.len; ++t) {
          storage.push_back(dequantize(ds.episodes[w.ep].frames[w.start + t]));
        }
      }
      frames.reserve(storage.size());
      for (const Image& img : storage) frames.push_back(&img);

      DsaeGrads g;
      g.init_like(p);
      BnStats st[3];
      const double loss = engine_run(p, frames, windows, hyper.slowness_weight, &g, st);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "train_dsae: loss diverged at epoch " << epoch << " (learning rate "
           << hyper.learning_rate << ")";
        throw PipelineAbort(os.str());
      }
      const double inv = 1.0 / static_cast<double>(frames.size());
      const double lr = hyper.learning_rate, mom = hyper.momentum;
      sgd_update(p.conv1.W, vel.g1.dW, g.g1.dW, lr, mom, inv);
      sgd_update(p.conv1.b, vel.g1.db, g.g1.db, lr, mom, inv);
      sgd_update(p.conv2.W, vel.g2.dW, g.g2.dW, lr, mom, inv);
      sgd_update(p.conv2.b, vel.g2.db, g.g2.db, lr, mom, inv);
      sgd_update(p.conv3.W, vel.g3.dW, g.g3.dW, lr, mom, inv);
      sgd_update(p.conv3.b, vel.g3.db, g.g3.db, lr, mom, inv);
      sgd_update(p.bn1.gamma, vel.b1.dgamma, g.b1.dgamma, lr, mom, inv);
      sgd_update(p.bn1.beta, vel.b1.dbeta, g.b1.dbeta, lr, mom, inv);
      sgd_update(p.bn2.gamma, vel.b2.dgamma, g.b2.dgamma, lr, mom, inv);
      sgd_update(p.bn2.beta, vel.b2.dbeta, g.b2.dbeta, lr, mom, inv);
      sgd_update(p.bn3.gamma, vel.b3.dgamma, g.b3.dgamma, lr, mom, inv);
      sgd_update(p.bn3.beta, vel.b3.dbeta, g.b3.dbeta, lr, mom, inv);
      sgd_update(p.dec_W, vel.d_dec_W, g.d_dec_W, lr, mom, inv);
      sgd_update(p.dec_b, vel.d_dec_b, g.d_dec_b, lr, mom, inv);
      vel_rho = mom * vel_rho - lr * inv * g.drho;
      p.rho += vel_rho;
      bn_update_running(p.bn1, st[0]);
      bn_update_running(p.bn2, st[1]);
      bn_update_running(p.bn3, st[2]);
      epoch_loss += loss;
      epoch_frames += frames.size();
    }
    if (cb.on_epoch) cb.on_epoch(epoch, epoch_loss / static_cast<double>(epoch_frames));
  }
  return p;
}

DsaeParams train_dsae(const Dataset& ds, const TrainHyper& hyper, std::uint64_t seed,
                      const TrainCallbacks& cb) {
  return train_dsae(ds, hyper, seed, nullptr, cb);
}

}  // namespace dsrl
