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

#include "dsrl/dynfit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dsrl/common.hpp"

namespace dsrl {
namespace {

Mat floor_spd(const Mat& c, double floor) {
  Mat s = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  if (es.eigenvalues().minCoeff() >= floor) return s;
  Vec ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Vec transition_vec(const Trajectory& tr, int t) {
  const int T = tr.horizon();
  const Vec& next = (t + 1 < T) ? tr.states[t + 1] : tr.terminal_state;
  Vec z(tr.states[t].size() + tr.actions[t].size() + next.size());
  z << tr.states[t], tr.actions[t], next;
  return z;
}

bool lex_less(const Vec& a, const Vec& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

}  // namespace

std::vector<Vec> pooled_transitions(const std::vector<Trajectory>& trajs) {
  std::vector<Vec> out;
  for (const Trajectory& tr : trajs) {
    for (int t = 0; t < tr.horizon(); ++t) out.push_back(transition_vec(tr, t));
  }
  return out;
}

LinearDynamics fit_dynamics(const std::vector<Trajectory>& samples, const GmmPrior& prior) {
  if (samples.size() < 2) throw InvalidInput("fit_dynamics: need at least 2 trajectories");
  const int T = samples[0].horizon();
  const int dx = static_cast<int>(samples[0].states[0].size());
  const int du = static_cast<int>(samples[0].actions[0].size());
  for (const Trajectory& tr : samples) {
    if (tr.horizon() != T || tr.terminal_state.size() != dx) {
      throw InvalidInput("fit_dynamics: trajectories must share horizon and state dim");
    }
  }
  const int dz = 2 * dx + du;
  if (prior.n0 > 0.0 && prior.gmm.components() == 0) {
    throw InvalidInput("fit_dynamics: n0 > 0 requires a fitted mixture");
  }
  if (prior.n0 > 0.0 && prior.gmm.dim() != dz) {
    throw InvalidInput("fit_dynamics: prior dimension mismatch");
  }

  const int N = static_cast<int>(samples.size());
  const int radius = (N < dz) ? 1 : 0;

  LinearDynamics dyn;
  dyn.fx.resize(T);
  dyn.fu.resize(T);
  dyn.fc.resize(T);
  dyn.F.resize(T);
  for (int t = 0; t < T; ++t) {
    std::vector<Vec> zs;
    for (int s = std::max(0, t - radius); s <= std::min(T - 1, t + radius); ++s) {
      for (const Trajectory& tr : samples) zs.push_back(transition_vec(tr, s));
    }
    // Canonical order makes the accumulated moments independent of the
    // caller's trajectory ordering, bitwise.
    std::sort(zs.begin(), zs.end(), lex_less);
    const double cnt = static_cast<double>(zs.size());

    Vec emp_mu = Vec::Zero(dz);
    Mat emp_scatter = Mat::Zero(dz, dz);
    for (const Vec& z : zs) {
      emp_mu += z;
      emp_scatter += z * z.transpose();
    }
    emp_mu /= cnt;

    Vec mu;
    Mat second;  // E[z z^T] of the blended posterior
    if (prior.n0 > 0.0) {
      Vec rbar = Vec::Zero(prior.gmm.components());
      for (const Vec& z : zs) rbar += gmm_responsibilities(prior.gmm, z);
      rbar /= cnt;
      Vec mu0 = Vec::Zero(dz);
      Mat m2_0 = Mat::Zero(dz, dz);
      for (int k = 0; k < prior.gmm.components(); ++k) {
        mu0 += rbar[k] * prior.gmm.means[k];
        m2_0 += rbar[k] * (prior.gmm.covs[k] + prior.gmm.means[k] * prior.gmm.means[k].transpose());
      }
      const double denom = prior.n0 + cnt;
      mu = (prior.n0 * mu0 + cnt * emp_mu) / denom;
      second = (prior.n0 * m2_0 + emp_scatter) / denom;
    } else {
      mu = emp_mu;
      second = emp_scatter / cnt;
    }
    Mat joint = second - mu * mu.transpose();

    const int dv = dx + du;
    double reg = 1e-6;
    for (;;) {
      Mat J = floor_spd(joint, reg);
      Mat Svv = J.topLeftCorner(dv, dv);
      Mat Svy = J.topRightCorner(dv, dx);
      Mat Syy = J.bottomRightCorner(dx, dx);
      Eigen::LLT<Mat> llt(Svv);
      bool ok = llt.info() == Eigen::Success;
      if (ok) {
        Mat gain = llt.solve(Svy).transpose();  // dx x dv
        Vec fc = mu.tail(dx) - gain * mu.head(dv);
        Mat F = floor_spd(Mat(Syy - gain * Svy), reg);
        if (gain.allFinite() && fc.allFinite() && F.allFinite()) {
          dyn.fx[t] = gain.leftCols(dx);
          dyn.fu[t] = gain.rightCols(du);
          dyn.fc[t] = fc;
          dyn.F[t] = F;
          break;
        }
        ok = false;
      }
      if (!ok) {
        if (reg >= 1e-2) {
          throw PipelineAbort("fit_dynamics: joint covariance singular at timestep " +
                              std::to_string(t) + " even at floor 1e-2");
        }
        reg *= 10.0;
      }
    }
  }
  return dyn;
}

}  // namespace dsrl
