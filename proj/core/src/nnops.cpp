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

#include "dsrl/nnops.hpp"

#include <algorithm>
#include <cmath>

namespace dsrl {

void im2col(const Tensor3& x, int k, int stride, int pad, Eigen::MatrixXd& cols) {
  const int oh = (x.h + 2 * pad - k) / stride + 1;
  const int ow = (x.w + 2 * pad - k) / stride + 1;
  cols.resize(static_cast<Eigen::Index>(x.c) * k * k, static_cast<Eigen::Index>(oh) * ow);
  for (int ci = 0; ci < x.c; ++ci) {
    const double* plane = x.plane(ci);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(ci) * k + ky) * k + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          double* dst = &cols(row, static_cast<Eigen::Index>(oy) * ow);
          if (iy < 0 || iy >= x.h) {
            for (int ox = 0; ox < ow; ++ox) dst[static_cast<Eigen::Index>(ox) * cols.rows()] = 0.0;
            continue;
          }
          const double* src = &plane[static_cast<std::size_t>(iy) * x.w];
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            dst[static_cast<Eigen::Index>(ox) * cols.rows()] =
                (ix < 0 || ix >= x.w) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const Eigen::MatrixXd& cols, int k, int stride, int pad, Tensor3& dx) {
  const int oh = (dx.h + 2 * pad - k) / stride + 1;
  const int ow = (dx.w + 2 * pad - k) / stride + 1;
  std::fill(dx.v.begin(), dx.v.end(), 0.0);
  for (int ci = 0; ci < dx.c; ++ci) {
    double* plane = dx.plane(ci);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(ci) * k + ky) * k + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= dx.h) continue;
          double* dst = &plane[static_cast<std::size_t>(iy) * dx.w];
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= dx.w) continue;
            dst[ix] += cols(row, static_cast<Eigen::Index>(oy) * ow + ox);
          }
        }
      }
    }
  }
}

Tensor3 conv_forward(const ConvLayer& l, const Tensor3& x) {
  if (x.c != l.in_c) throw InvalidInput("conv_forward: channel mismatch");
  const int oh = l.out_h(x.h), ow = l.out_w(x.w);
  Eigen::MatrixXd cols;
  im2col(x, l.k, l.stride, l.pad, cols);
  Eigen::MatrixXd y = l.W * cols;  // out_c x (oh*ow)
  y.colwise() += l.b;
  Tensor3 out(l.out_c, oh, ow);
  // y is column-major: y(o, p). Copy per output channel row.
  for (int o = 0; o < l.out_c; ++o) {
    double* plane = out.plane(o);
    for (Eigen::Index p = 0; p < y.cols(); ++p) plane[p] = y(o, p);
  }
  return out;
}

namespace {

Eigen::MatrixXd dy_as_matrix(const ConvLayer& l, const Tensor3& dy) {
  const Eigen::Index npix = static_cast<Eigen::Index>(dy.h) * dy.w;
  Eigen::MatrixXd dy_mat(l.out_c, npix);
  for (int o = 0; o < l.out_c; ++o) {
    const double* plane = dy.plane(o);
    for (Eigen::Index p = 0; p < npix; ++p) dy_mat(o, p) = plane[p];
  }
  return dy_mat;
}

}  // namespace

Tensor3 conv_backward(const ConvLayer& l, const Tensor3& x, const Tensor3& dy,
                      ConvGrad& g) {
  if (dy.c != l.out_c) throw InvalidInput("conv_backward: channel mismatch");
  Eigen::MatrixXd dy_mat = dy_as_matrix(l, dy);
  Eigen::MatrixXd cols;
  im2col(x, l.k, l.stride, l.pad, cols);
  g.dW.noalias() += dy_mat * cols.transpose();
  g.db.noalias() += dy_mat.rowwise().sum();
  Eigen::MatrixXd dcols = l.W.transpose() * dy_mat;
  Tensor3 dx(x.c, x.h, x.w);
  col2im(dcols, l.k, l.stride, l.pad, dx);
  return dx;
}

void conv_backward_params(const ConvLayer& l, const Tensor3& x, const Tensor3& dy,
                          ConvGrad& g) {
  if (dy.c != l.out_c) throw InvalidInput("conv_backward_params: channel mismatch");
  Eigen::MatrixXd dy_mat = dy_as_matrix(l, dy);
  Eigen::MatrixXd cols;
  im2col(x, l.k, l.stride, l.pad, cols);
  g.dW.noalias() += dy_mat * cols.transpose();
  g.db.noalias() += dy_mat.rowwise().sum();
}

void BnAccumulator::add(const Tensor3& x) {
  if (count == 0) {
    sum = Eigen::VectorXd::Zero(x.c);
    sumsq = Eigen::VectorXd::Zero(x.c);
  }
  const std::size_t per = static_cast<std::size_t>(x.h) * x.w;
  for (int ci = 0; ci < x.c; ++ci) {
    const double* p = x.plane(ci);
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      s += p[i];
      s2 += p[i] * p[i];
    }
    sum[ci] += s;
    sumsq[ci] += s2;
  }
  count += per;
}

BnStats BnAccumulator::finalize(double eps) const {
  if (count == 0) throw InvalidInput("BnAccumulator: no samples");
  BnStats st;
  st.count = count;
  const double n = static_cast<double>(count);
  st.mean = sum / n;
  st.invstd.resize(sum.size());
  for (Eigen::Index ci = 0; ci < sum.size(); ++ci) {
    const double var = std::max(0.0, sumsq[ci] / n - st.mean[ci] * st.mean[ci]);
    st.invstd[ci] = 1.0 / std::sqrt(var + eps);
  }
  return st;
}

BnStats bn_compute_stats(const std::vector<const Tensor3*>& xs, double eps) {
  if (xs.empty()) throw InvalidInput("bn_compute_stats: empty batch");
  BnAccumulator acc;
  for (const Tensor3* x : xs) acc.add(*x);
  return acc.finalize(eps);
}

void bn_apply_train(const BnStats& st, const BatchNorm& bn, const Tensor3& x,
                    Tensor3& xhat, Tensor3& y) {
  xhat = Tensor3(x.c, x.h, x.w);
  y = Tensor3(x.c, x.h, x.w);
  const std::size_t per = static_cast<std::size_t>(x.h) * x.w;
  for (int ci = 0; ci < x.c; ++ci) {
    const double m = st.mean[ci], is = st.invstd[ci];
    const double g = bn.gamma[ci], b = bn.beta[ci];
    const double* px = x.plane(ci);
    double* ph = xhat.plane(ci);
    double* py = y.plane(ci);
    for (std::size_t i = 0; i < per; ++i) {
      const double h = (px[i] - m) * is;
      ph[i] = h;
      py[i] = g * h + b;
    }
  }
}

void bn_update_running(BatchNorm& bn, const BnStats& st) {
  const double m = bn.momentum;
  for (Eigen::Index ci = 0; ci < bn.gamma.size(); ++ci) {
    const double var = 1.0 / (st.invstd[ci] * st.invstd[ci]) - bn.eps;
    bn.running_mean[ci] = (1.0 - m) * bn.running_mean[ci] + m * st.mean[ci];
    bn.running_var[ci] = (1.0 - m) * bn.running_var[ci] + m * std::max(var, 0.0);
  }
}

void bn_apply_eval(const BatchNorm& bn, Tensor3& x) {
  const std::size_t per = static_cast<std::size_t>(x.h) * x.w;
  for (int ci = 0; ci < x.c; ++ci) {
    const double m = bn.running_mean[ci];
    const double is = 1.0 / std::sqrt(bn.running_var[ci] + bn.eps);
    const double g = bn.gamma[ci], b = bn.beta[ci];
    double* p = x.plane(ci);
    for (std::size_t i = 0; i < per; ++i) p[i] = g * (p[i] - m) * is + b;
  }
}

BnBackSums bn_backward_reduce(const std::vector<const Tensor3*>& dys,
                              const std::vector<const Tensor3*>& xhats) {
  const int c = dys[0]->c;
  const std::size_t per = static_cast<std::size_t>(dys[0]->h) * dys[0]->w;
  BnBackSums s;
  s.sum_dy = Eigen::VectorXd::Zero(c);
  s.sum_dy_xhat = Eigen::VectorXd::Zero(c);
  for (std::size_t n = 0; n < dys.size(); ++n) {
    for (int ci = 0; ci < c; ++ci) {
      const double* pd = dys[n]->plane(ci);
      const double* ph = xhats[n]->plane(ci);
      double a = 0.0, b = 0.0;
      for (std::size_t i = 0; i < per; ++i) {
        a += pd[i];
        b += pd[i] * ph[i];
      }
      s.sum_dy[ci] += a;
      s.sum_dy_xhat[ci] += b;
    }
  }
  return s;
}

void bn_backward_apply(const BatchNorm& bn, const BnStats& st, const BnBackSums& sums,
                       const Tensor3& xhat, Tensor3& dy) {
  const std::size_t per = static_cast<std::size_t>(dy.h) * dy.w;
  const double n = static_cast<double>(st.count);
  for (int ci = 0; ci < dy.c; ++ci) {
    const double g = bn.gamma[ci], is = st.invstd[ci];
    const double sd = sums.sum_dy[ci], sdh = sums.sum_dy_xhat[ci];
    const double* ph = xhat.plane(ci);
    double* pd = dy.plane(ci);
    for (std::size_t i = 0; i < per; ++i) {
      // dx = gamma*invstd/n * (n*dy - sum(dy) - xhat*sum(dy*xhat))
      pd[i] = g * is / n * (n * pd[i] - sd - ph[i] * sdh);
    }
  }
}

void relu_inplace(Tensor3& x) {
  for (double& v : x.v) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Tensor3& y_post, Tensor3& dy) {
  for (std::size_t i = 0; i < dy.v.size(); ++i) {
    if (y_post.v[i] <= 0.0) dy.v[i] = 0.0;
  }
}

Tensor3 maxpool_forward(const Tensor3& x, int k, std::vector<int>& argmax) {
  if (x.h % k != 0 || x.w % k != 0) throw InvalidInput("maxpool: size not divisible");
  const int oh = x.h / k, ow = x.w / k;
  Tensor3 out(x.c, oh, ow);
  argmax.assign(out.size(), 0);
  std::size_t oi = 0;
  for (int ci = 0; ci < x.c; ++ci) {
    const double* plane = x.plane(ci);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox, ++oi) {
        double best = -1e300;
        int best_idx = 0;
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) {
            const int idx = (oy * k + dy) * x.w + ox * k + dx;
            if (plane[idx] > best) {
              best = plane[idx];
              best_idx = idx;
            }
          }
        }
        out.v[oi] = best;
        argmax[oi] = best_idx;
      }
    }
  }
  return out;
}

Tensor3 maxpool_backward(const Tensor3& dy, int in_h, int in_w, int k,
                         const std::vector<int>& argmax) {
  Tensor3 dx(dy.c, in_h, in_w);
  std::size_t oi = 0;
  for (int ci = 0; ci < dy.c; ++ci) {
    double* plane = dx.plane(ci);
    const double* dplane = dy.plane(ci);
    const std::size_t per = static_cast<std::size_t>(dy.h) * dy.w;
    for (std::size_t p = 0; p < per; ++p, ++oi) plane[argmax[oi]] += dplane[p];
  }
  return dx;
}

}  // namespace dsrl
