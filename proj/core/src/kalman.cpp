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

#include "dsrl/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dsrl/common.hpp"

namespace dsrl {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::Matrix3d sym(const Eigen::Matrix3d& m) { return 0.5 * (m + m.transpose()); }

// Raises the smallest eigenvalue to `floor` only when it is below it, so
// the adjustment is inactive on healthy updates (EM monotonicity is only
// touched when the exact update was already degenerate).
Eigen::Matrix3d floor_spd(const Eigen::Matrix3d& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  if (es.eigenvalues().minCoeff() >= floor) return m;
  Eigen::Vector3d ev = es.eigenvalues().cwiseMax(floor);
  return sym(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

struct FilterInternals {
  std::vector<Eigen::Vector3d> m_pred, m_filt;
  std::vector<Eigen::Matrix3d> P_pred, P_filt;
  Eigen::Vector3d K_last = Eigen::Vector3d::Zero();  // gain at the final frame
  bool last_updated = false;
  double loglik = 0.0;
};

FilterInternals run_filter(const Lds1d& m, const std::vector<double>& y,
                           const std::vector<bool>& present) {
  if (y.size() != present.size()) throw InvalidInput("kalman: mask length mismatch");
  const std::size_t T = y.size();
  FilterInternals f;
  f.m_pred.resize(T);
  f.P_pred.resize(T);
  f.m_filt.resize(T);
  f.P_filt.resize(T);
  Eigen::Vector3d mean = m.mu1;
  Eigen::Matrix3d cov = m.P1;
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      mean = m.A * mean;
      cov = sym(m.A * cov * m.A.transpose() + m.Q);
    }
    f.m_pred[t] = mean;
    f.P_pred[t] = cov;
    f.K_last.setZero();
    f.last_updated = false;
    if (present[t]) {
      const double S = (m.H * cov * m.H.transpose())(0) + m.R;
      const double innov = y[t] - (m.H * mean)(0);
      f.loglik += -0.5 * (kLog2Pi + std::log(S) + innov * innov / S);
      const Eigen::Vector3d K = cov * m.H.transpose() / S;
      mean += K * innov;
      // Joseph form keeps the covariance symmetric positive definite.
      const Eigen::Matrix3d IKH = Eigen::Matrix3d::Identity() - K * m.H;
      cov = sym(IKH * cov * IKH.transpose() + K * m.R * K.transpose());
      f.K_last = K;
      f.last_updated = true;
    }
    f.m_filt[t] = mean;
    f.P_filt[t] = cov;
  }
  return f;
}

struct SmoothInternals {
  std::vector<Eigen::Vector3d> mean;
  std::vector<Eigen::Matrix3d> cov, lag_one;
  double loglik = 0.0;
};

SmoothInternals run_smoother(const Lds1d& m, const std::vector<double>& y,
                             const std::vector<bool>& present) {
  const FilterInternals f = run_filter(m, y, present);
  const std::size_t T = y.size();
  SmoothInternals s;
  s.loglik = f.loglik;
  s.mean.resize(T);
  s.cov.resize(T);
  s.lag_one.assign(T, Eigen::Matrix3d::Zero());
  if (T == 0) return s;
  s.mean[T - 1] = f.m_filt[T - 1];
  s.cov[T - 1] = f.P_filt[T - 1];
  std::vector<Eigen::Matrix3d> J(T, Eigen::Matrix3d::Zero());
  for (std::size_t t = T - 1; t-- > 0;) {
    // J_t = P_{t|t} A' P_{t+1|t}^{-1}
    J[t] = f.P_filt[t] * m.A.transpose() * f.P_pred[t + 1].inverse();
    s.mean[t] = f.m_filt[t] + J[t] * (s.mean[t + 1] - f.m_pred[t + 1]);
    s.cov[t] = sym(f.P_filt[t] + J[t] * (s.cov[t + 1] - f.P_pred[t + 1]) * J[t].transpose());
  }
  if (T >= 2) {
    const Eigen::Matrix3d IKH =
        Eigen::Matrix3d::Identity() - f.K_last * m.H * (f.last_updated ? 1.0 : 0.0);
    s.lag_one[T - 1] = IKH * m.A * f.P_filt[T - 2];
    for (std::size_t t = T - 1; t-- > 1;) {
      s.lag_one[t] = f.P_filt[t] * J[t - 1].transpose() +
                     J[t] * (s.lag_one[t + 1] - m.A * f.P_filt[t]) * J[t - 1].transpose();
    }
  }
  return s;
}

}  // namespace

Lds1d make_const_accel_model(double dt) {
  Lds1d m;
  m.A << 1, dt, 0.5 * dt * dt, 0, 1, dt, 0, 0, 1;
  m.H << 1, 0, 0;
  m.Q = Eigen::Matrix3d::Identity() * 1e-4;
  m.R = 1e-2;
  m.mu1.setZero();
  m.P1 = Eigen::Matrix3d::Identity() * 0.1;
  return m;
}

Filter1dResult kalman_filter_1d(const Lds1d& m, const std::vector<double>& y,
                                const std::vector<bool>& present) {
  const FilterInternals f = run_filter(m, y, present);
  return {f.m_filt, f.P_filt, f.loglik};
}

Smooth1dResult kalman_smooth_1d(const Lds1d& m, const std::vector<double>& y,
                                const std::vector<bool>& present) {
  const SmoothInternals s = run_smoother(m, y, present);
  return {s.mean, s.cov, s.lag_one, s.loglik};
}

Lds1d kalman_em_1d(const std::vector<std::vector<double>>& ys,
                   const std::vector<std::vector<bool>>& present, double dt,
                   int max_iters, std::vector<double>* ll_trace) {
  if (ys.empty() || ys.size() != present.size()) {
    throw InvalidInput("kalman_em: need matching observation and mask sequences");
  }
  std::size_t max_present = 0, total_frames = 0;
  double obs_sum = 0.0, obs_sumsq = 0.0;
  std::size_t obs_n = 0;
  double first_obs = 0.0;
  bool have_first = false;
  for (std::size_t s = 0; s < ys.size(); ++s) {
    if (ys[s].size() != present[s].size()) throw InvalidInput("kalman_em: mask length mismatch");
    std::size_t n = 0;
    for (std::size_t t = 0; t < ys[s].size(); ++t) {
      if (present[s][t]) {
        ++n;
        obs_sum += ys[s][t];
        obs_sumsq += ys[s][t] * ys[s][t];
        ++obs_n;
        if (!have_first) {
          first_obs = ys[s][t];
          have_first = true;
        }
      }
    }
    max_present = std::max(max_present, n);
    total_frames += ys[s].size();
  }
  if (max_present < 3) {
    throw InvalidInput("kalman_em: need a sequence with at least 3 present observations");
  }

  Lds1d m = make_const_accel_model(dt);
  const double obs_var =
      obs_n > 0 ? std::max(1e-8, obs_sumsq / obs_n - (obs_sum / obs_n) * (obs_sum / obs_n))
                : 1.0;
  m.R = std::max(1e-6, 0.1 * obs_var);
  m.mu1 << first_obs, 0, 0;
  m.P1 = Eigen::Matrix3d::Identity() * std::max(1e-4, obs_var);

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    // E-step.
    double ll = 0.0;
    Eigen::Matrix3d S11 = Eigen::Matrix3d::Zero();  // sum E[x_t x_t'] over t>=2
    Eigen::Matrix3d S10 = Eigen::Matrix3d::Zero();  // sum E[x_t x_{t-1}']
    Eigen::Matrix3d S00 = Eigen::Matrix3d::Zero();  // sum E[x_{t-1} x_{t-1}']
    double r_acc = 0.0;
    std::size_t n_trans = 0, n_obs = 0;
    Eigen::Vector3d mu1_acc = Eigen::Vector3d::Zero();
    Eigen::Matrix3d p1_acc = Eigen::Matrix3d::Zero();
    std::vector<Eigen::Vector3d> first_means(ys.size());
    std::vector<Eigen::Matrix3d> first_covs(ys.size());

    for (std::size_t s = 0; s < ys.size(); ++s) {
      const SmoothInternals sm = run_smoother(m, ys[s], present[s]);
      ll += sm.loglik;
      const std::size_t T = ys[s].size();
      for (std::size_t t = 1; t < T; ++t) {
        S11 += sm.cov[t] + sm.mean[t] * sm.mean[t].transpose();
        S10 += sm.lag_one[t] + sm.mean[t] * sm.mean[t - 1].transpose();
        S00 += sm.cov[t - 1] + sm.mean[t - 1] * sm.mean[t - 1].transpose();
        ++n_trans;
      }
      for (std::size_t t = 0; t < T; ++t) {
        if (!present[s][t]) continue;
        const double hx = (m.H * sm.mean[t])(0);
        const double exx = (m.H * (sm.cov[t] + sm.mean[t] * sm.mean[t].transpose()) *
                            m.H.transpose())(0);
        r_acc += ys[s][t] * ys[s][t] - 2.0 * ys[s][t] * hx + exx;
        ++n_obs;
      }
      if (T > 0) {
        first_means[s] = sm.mean[0];
        first_covs[s] = sm.cov[0];
        mu1_acc += sm.mean[0];
      }
    }
    if (ll_trace) ll_trace->push_back(ll);
    if (iter > 0 && ll - prev_ll < 1e-6 * static_cast<double>(total_frames)) {
      prev_ll = ll;
      break;
    }
    prev_ll = ll;

    // M-step (A, H held fixed).
    if (n_trans > 0) {
      Eigen::Matrix3d Q = (S11 - S10 * m.A.transpose() - m.A * S10.transpose() +
                           m.A * S00 * m.A.transpose()) /
                          static_cast<double>(n_trans);
      m.Q = floor_spd(sym(Q), 1e-12);
    }
    if (n_obs > 0) m.R = std::max(1e-12, r_acc / static_cast<double>(n_obs));
    const double ns = static_cast<double>(ys.size());
    const Eigen::Vector3d mu1 = mu1_acc / ns;
    Eigen::Matrix3d P1 = Eigen::Matrix3d::Zero();
    for (std::size_t s = 0; s < ys.size(); ++s) {
      const Eigen::Vector3d d = first_means[s] - mu1;
      P1 += first_covs[s] + d * d.transpose();
    }
    m.mu1 = mu1;
    m.P1 = floor_spd(sym(P1 / ns), 1e-12);
  }
  return m;
}

KalmanModel kalman_em(const std::vector<std::vector<Eigen::Vector2d>>& obs,
                      const std::vector<std::vector<bool>>& present, double dt,
                      int max_iters, std::vector<double>* ll_trace_x,
                      std::vector<double>* ll_trace_y) {
  std::vector<std::vector<double>> xs(obs.size()), ys(obs.size());
  for (std::size_t s = 0; s < obs.size(); ++s) {
    xs[s].reserve(obs[s].size());
    ys[s].reserve(obs[s].size());
    for (const auto& p : obs[s]) {
      xs[s].push_back(p.x());
      ys[s].push_back(p.y());
    }
  }
  KalmanModel m;
  m.dt = dt;
  m.x = kalman_em_1d(xs, present, dt, max_iters, ll_trace_x);
  m.y = kalman_em_1d(ys, present, dt, max_iters, ll_trace_y);
  return m;
}

FilteredTrack kalman_filter(const KalmanModel& m, const std::vector<Eigen::Vector2d>& obs,
                            const std::vector<bool>& present) {
  std::vector<double> xs(obs.size()), ys(obs.size());
  for (std::size_t t = 0; t < obs.size(); ++t) {
    xs[t] = obs[t].x();
    ys[t] = obs[t].y();
  }
  const Filter1dResult fx = kalman_filter_1d(m.x, xs, present);
  const Filter1dResult fy = kalman_filter_1d(m.y, ys, present);
  FilteredTrack out;
  out.position.resize(obs.size());
  out.velocity.resize(obs.size());
  for (std::size_t t = 0; t < obs.size(); ++t) {
    out.position[t] = {fx.mean[t][0], fy.mean[t][0]};
    out.velocity[t] = {fx.mean[t][1], fy.mean[t][1]};
  }
  return out;
}

void OnlineKalman::reset() {
  mx_ = m_.x.mu1;
  Px_ = m_.x.P1;
  my_ = m_.y.mu1;
  Py_ = m_.y.P1;
  first_ = true;
}

namespace {

void online_axis_step(const Lds1d& m, double y, bool present, bool first,
                      Eigen::Vector3d& mean, Eigen::Matrix3d& cov) {
  if (!first) {
    mean = m.A * mean;
    cov = sym(m.A * cov * m.A.transpose() + m.Q);
  }
  if (present) {
    const double S = (m.H * cov * m.H.transpose())(0) + m.R;
    const Eigen::Vector3d K = cov * m.H.transpose() / S;
    mean += K * (y - (m.H * mean)(0));
    const Eigen::Matrix3d IKH = Eigen::Matrix3d::Identity() - K * m.H;
    cov = sym(IKH * cov * IKH.transpose() + K * m.R * K.transpose());
  }
}

}  // namespace

std::pair<Eigen::Vector2d, Eigen::Vector2d> OnlineKalman::step(const Eigen::Vector2d& obs,
                                                               bool present) {
  online_axis_step(m_.x, obs.x(), present, first_, mx_, Px_);
  online_axis_step(m_.y, obs.y(), present, first_, my_, Py_);
  first_ = false;
  return {{mx_[0], my_[0]}, {mx_[1], my_[1]}};
}

}  // namespace dsrl
