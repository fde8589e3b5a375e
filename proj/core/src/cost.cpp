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

#include "dsrl/cost.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "dsrl/common.hpp"

namespace dsrl {
namespace {

void check_cost(const TaskCost& cost, const Vec& x) {
  if (cost.alpha <= 0.0) throw InvalidInput("task_cost: alpha must be positive");
  if (cost.w_l2 < 0.0 || cost.w_log < 0.0 || cost.w_u < 0.0) {
    throw InvalidInput("task_cost: weights must be nonnegative");
  }
  if (static_cast<int>(cost.point_idx.size()) != cost.target.size()) {
    throw InvalidInput("task_cost: point_idx and target sizes differ");
  }
  for (int idx : cost.point_idx) {
    if (idx < 0 || idx >= x.size()) throw InvalidInput("task_cost: point index out of range");
  }
}

}  // namespace

CostEval task_cost(const TaskCost& cost, const Vec& x, const Vec& u, int t) {
  check_cost(cost, x);
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(u.size());
  const int p = static_cast<int>(cost.point_idx.size());
  const Vec& tgt = cost.target_at(t);

  Vec e(p);
  for (int j = 0; j < p; ++j) e[j] = x[cost.point_idx[j]] - tgt[j];
  const double s = e.squaredNorm();

  CostEval out;
  out.value = cost.w_l2 * s + cost.w_log * std::log(s + cost.alpha) + cost.w_u * u.squaredNorm();
  out.grad = Vec::Zero(n + m);
  out.hess = Mat::Zero(n + m, n + m);

  // d value / d s, with s = |e|^2.
  const double gs = cost.w_l2 + cost.w_log / (s + cost.alpha);
  const double gss = -cost.w_log / ((s + cost.alpha) * (s + cost.alpha));
  for (int j = 0; j < p; ++j) out.grad[cost.point_idx[j]] = 2.0 * gs * e[j];
  for (int j = 0; j < p; ++j) {
    for (int l = 0; l < p; ++l) {
      out.hess(cost.point_idx[j], cost.point_idx[l]) = 4.0 * gss * e[j] * e[l];
    }
    out.hess(cost.point_idx[j], cost.point_idx[j]) += 2.0 * gs;
  }
  out.grad.tail(m) = 2.0 * cost.w_u * u;
  out.hess.bottomRightCorner(m, m) = 2.0 * cost.w_u * Mat::Identity(m, m);
  return out;
}

double task_cost_value(const TaskCost& cost, const Vec& x, const Vec& u, int t) {
  check_cost(cost, x);
  const Vec& tgt = cost.target_at(t);
  double s = 0.0;
  for (int j = 0; j < static_cast<int>(cost.point_idx.size()); ++j) {
    double d = x[cost.point_idx[j]] - tgt[j];
    s += d * d;
  }
  return cost.w_l2 * s + cost.w_log * std::log(s + cost.alpha) + cost.w_u * u.squaredNorm();
}

double trajectory_cost(const TaskCost& cost, const Trajectory& tr) {
  double total = 0.0;
  for (int t = 0; t < tr.horizon(); ++t) total += task_cost_value(cost, tr.states[t], tr.actions[t], t);
  return total;
}

QuadraticCost quadratize_cost(const TaskCost& cost, const std::vector<Trajectory>& samples) {
  if (samples.empty()) throw InvalidInput("quadratize_cost: need at least one sample");
  const int T = samples[0].horizon();
  const int n = static_cast<int>(samples[0].states[0].size());
  const int m = static_cast<int>(samples[0].actions[0].size());
  for (const Trajectory& tr : samples) {
    if (tr.horizon() != T) throw InvalidInput("quadratize_cost: horizons differ");
  }
  const double inv_n = 1.0 / samples.size();

  QuadraticCost q;
  q.Cxx.resize(T);
  q.cx.resize(T);
  for (int t = 0; t < T; ++t) {
    Vec zbar = Vec::Zero(n + m);
    for (const Trajectory& tr : samples) {
      zbar.head(n) += tr.states[t];
      zbar.tail(m) += tr.actions[t];
    }
    zbar *= inv_n;

    Mat H = Mat::Zero(n + m, n + m);
    Vec g = Vec::Zero(n + m);
    for (const Trajectory& tr : samples) {
      CostEval e = task_cost(cost, tr.states[t], tr.actions[t], t);
      Vec z(n + m);
      z << tr.states[t], tr.actions[t];
      // Expansion taken at z, re-centered at zbar.
      H += e.hess;
      g += e.grad + e.hess * (zbar - z);
    }
    H *= inv_n;
    g *= inv_n;
    H = 0.5 * (H + H.transpose());

    Mat uu = H.bottomRightCorner(m, m);
    Eigen::SelfAdjointEigenSolver<Mat> es(uu);
    if (es.eigenvalues().minCoeff() < 1e-6) {
      Vec ev = es.eigenvalues().cwiseMax(1e-6);
      H.bottomRightCorner(m, m) = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }

    // cost(z) ~ 1/2 z'Hz + (g - H zbar)'z + const, in absolute coordinates.
    q.Cxx[t] = H;
    q.cx[t] = g - H * zbar;
  }
  return q;
}

}  // namespace dsrl
