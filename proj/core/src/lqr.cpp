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

#include "dsrl/lqr.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "dsrl/common.hpp"

namespace dsrl {

LinearGaussianPolicy lqr_backward(const LinearDynamics& dyn, const QuadraticCost& cost) {
  const int T = cost.horizon();
  if (T < 1 || dyn.fx.empty() || dyn.horizon() < T - 1) {
    throw InvalidInput("lqr_backward: dynamics must cover t = 1..T-1");
  }
  const int nm = static_cast<int>(cost.Cxx[0].rows());
  const int n = static_cast<int>(dyn.fx[0].cols());
  const int m = nm - n;
  if (m < 1) throw InvalidInput("lqr_backward: action dimension must be positive");

  LinearGaussianPolicy pol;
  pol.K.resize(T);
  pol.k.resize(T);
  pol.C.resize(T);

  Mat V = Mat::Zero(n, n);
  Vec v = Vec::Zero(n);
  for (int t = T - 1; t >= 0; --t) {
    Mat Q = cost.Cxx[t];
    Vec q = cost.cx[t];
    if (t < T - 1) {
      // No dynamics follow the last step, its Q-function is the cost alone.
      Mat G(n, nm);
      G << dyn.fx[t], dyn.fu[t];
      Q += G.transpose() * V * G;
      q += G.transpose() * (V * dyn.fc[t] + v);
    }
    Q = 0.5 * (Q + Q.transpose());

    Mat Quu = Q.bottomRightCorner(m, m);
    Mat Qux = Q.bottomLeftCorner(m, n);
    Vec qu = q.tail(m);

    double mu = 0.0;
    Eigen::LLT<Mat> llt(Quu);
    while (llt.info() != Eigen::Success) {
      mu = (mu == 0.0) ? 1e-6 : 2.0 * mu;
      if (mu > 1e2) throw PipelineAbort("lqr_backward: Quu not positive definite at t=" + std::to_string(t));
      llt.compute(Mat(Quu + mu * Mat::Identity(m, m)));
    }
    pol.K[t] = -llt.solve(Qux);
    pol.k[t] = -llt.solve(qu);
    Mat C = llt.solve(Mat::Identity(m, m));
    pol.C[t] = 0.5 * (C + C.transpose());

    // Plug u = Kx + k back in for the value function at t.
    const Mat& K = pol.K[t];
    Mat Qxx = Q.topLeftCorner(n, n);
    Vec qx = q.head(n);
    Mat Quu_r = Quu + mu * Mat::Identity(m, m);
    V = Qxx + Qux.transpose() * K + K.transpose() * Qux + K.transpose() * Quu_r * K;
    V = 0.5 * (V + V.transpose());
    v = qx + Qux.transpose() * pol.k[t] + K.transpose() * (qu + Quu_r * pol.k[t]);
  }
  return pol;
}

double trajectory_kl(const LinearGaussianPolicy& p, const LinearGaussianPolicy& pbar,
                     const LinearDynamics& dyn, const Vec& x0_mean, const Mat& x0_cov) {
  const int T = p.horizon();
  if (pbar.horizon() != T) throw InvalidInput("trajectory_kl: controllers must share horizon");
  if (T > 0 && dyn.horizon() < T - 1) throw InvalidInput("trajectory_kl: dynamics too short");
  const int m = T > 0 ? static_cast<int>(p.k[0].size()) : 0;

  Vec mu = x0_mean;
  Mat S = 0.5 * (x0_cov + x0_cov.transpose());
  double kl = 0.0;
  for (int t = 0; t < T; ++t) {
    Eigen::LLT<Mat> llt_bar(pbar.C[t]);
    Eigen::LLT<Mat> llt_p(p.C[t]);
    if (llt_bar.info() != Eigen::Success || llt_p.info() != Eigen::Success) {
      throw InvalidInput("trajectory_kl: controller covariance not SPD at t=" + std::to_string(t));
    }
    Mat Cbar_inv = llt_bar.solve(Mat::Identity(m, m));
    double logdet_bar = 2.0 * Mat(llt_bar.matrixL()).diagonal().array().log().sum();
    double logdet_p = 2.0 * Mat(llt_p.matrixL()).diagonal().array().log().sum();

    Mat dK = p.K[t] - pbar.K[t];
    Vec dm = dK * mu + (p.k[t] - pbar.k[t]);
    double quad = (Cbar_inv * (dK * S * dK.transpose())).trace() + dm.dot(Cbar_inv * dm);
    kl += 0.5 * ((Cbar_inv * p.C[t]).trace() + quad - m + logdet_bar - logdet_p);

    if (t < T - 1) {
      Mat A = dyn.fx[t] + dyn.fu[t] * p.K[t];
      mu = A * mu + dyn.fu[t] * p.k[t] + dyn.fc[t];
      S = A * S * A.transpose() + dyn.fu[t] * p.C[t] * dyn.fu[t].transpose() + dyn.F[t];
      S = 0.5 * (S + S.transpose());
    }
  }
  return kl;
}

LinearGaussianPolicy init_pd_controller(const Vec& x_init, int T, int du, double kp, double kd,
                                        double noise_std) {
  const int dx = static_cast<int>(x_init.size());
  if (dx < 2 * du) throw InvalidInput("init_pd_controller: state must hold positions and velocities");
  if (T < 1 || noise_std <= 0.0) throw InvalidInput("init_pd_controller: bad horizon or noise");

  Mat K = Mat::Zero(du, dx);
  K.block(0, 0, du, du) = -kp * Mat::Identity(du, du);
  K.block(0, du, du, du) = -kd * Mat::Identity(du, du);
  Vec k = kp * x_init.head(du);
  Mat C = noise_std * noise_std * Mat::Identity(du, du);

  LinearGaussianPolicy pol;
  pol.K.assign(T, K);
  pol.k.assign(T, k);
  pol.C.assign(T, C);
  return pol;
}

}  // namespace dsrl
