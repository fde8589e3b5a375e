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

#include "dsrl/klstep.hpp"

#include <cmath>
#include <cstdio>

#include <Eigen/Cholesky>

#include "dsrl/common.hpp"
#include "dsrl/lqr.hpp"

namespace dsrl {

KlUpdateResult kl_constrained_update(const LinearGaussianPolicy& prev, const LinearDynamics& dyn,
                                     const QuadraticCost& cexp, double eps, const Vec& x0_mean,
                                     const Mat& x0_cov) {
  if (eps <= 0.0) throw InvalidInput("kl_constrained_update: eps must be positive");
  const int T = cexp.horizon();
  if (prev.horizon() != T) throw InvalidInput("kl_constrained_update: horizon mismatch");
  const int nm = static_cast<int>(cexp.Cxx[0].rows());
  const int m = T > 0 ? static_cast<int>(prev.k[0].size()) : 0;
  const int n = nm - m;

  // -log prev(u|x) as a quadratic in z = [x; u] (constants dropped):
  //   1/2 z' (M' Cinv M) z - (M' Cinv kbar)' z  with  M = [-Kbar I].
  std::vector<Mat> H(T);
  std::vector<Vec> g(T);
  for (int t = 0; t < T; ++t) {
    Eigen::LLT<Mat> llt(prev.C[t]);
    if (llt.info() != Eigen::Success) {
      throw InvalidInput("kl_constrained_update: prev covariance not SPD");
    }
    Mat Cinv = llt.solve(Mat::Identity(m, m));
    Mat M(m, nm);
    M << -prev.K[t], Mat::Identity(m, m);
    H[t] = M.transpose() * Cinv * M;
    g[t] = -M.transpose() * (Cinv * prev.k[t]);
  }

  auto solve_at = [&](double eta) {
    QuadraticCost surr;
    surr.Cxx.resize(T);
    surr.cx.resize(T);
    const double inv = 1.0 / (1.0 + eta);
    for (int t = 0; t < T; ++t) {
      surr.Cxx[t] = (cexp.Cxx[t] + eta * H[t]) * inv;
      surr.cx[t] = (cexp.cx[t] + eta * g[t]) * inv;
    }
    KlUpdateResult r;
    r.controller = lqr_backward(dyn, surr);
    r.eta = eta;
    r.kl = trajectory_kl(r.controller, prev, dyn, x0_mean, x0_cov);
    return r;
  };

  int evals = 0;
  const int max_evals = 50;

  // Unconstrained first: if it already fits inside eps we are done.
  bool have_unconstrained = false;
  KlUpdateResult cand;
  try {
    cand = solve_at(0.0);
    ++evals;
    have_unconstrained = true;
  } catch (const PipelineAbort&) {
    // Quu without the prior-likelihood term can be indefinite; the dual
    // search below cures that by construction.
  }
  if (have_unconstrained && cand.kl <= eps) return cand;

  // Bracket: grow eta until the KL drops to 1.1 eps or below.
  double lo = 1e-6;  // infeasible side (KL too large, or backward failed)
  double eta = 1.0;
  KlUpdateResult feasible;
  bool have_feasible = false;
  double hi = 0.0;
  while (evals < max_evals) {
    bool failed = false;
    KlUpdateResult r;
    try {
      r = solve_at(eta);
      ++evals;
    } catch (const PipelineAbort&) {
      ++evals;
      failed = true;
    }
    if (failed || r.kl > 1.1 * eps) {
      lo = eta;
      eta *= 10.0;
      continue;
    }
    feasible = r;
    have_feasible = true;
    hi = eta;
    if (r.kl >= 0.9 * eps) return r;
    break;
  }

  // Bisect on log eta between the infeasible and feasible sides.
  while (have_feasible && evals < max_evals) {
    double mid = std::sqrt(lo * hi);
    bool failed = false;
    KlUpdateResult r;
    try {
      r = solve_at(mid);
      ++evals;
    } catch (const PipelineAbort&) {
      ++evals;
      failed = true;
    }
    if (failed || r.kl > 1.1 * eps) {
      lo = mid;
    } else {
      feasible = r;
      hi = mid;
      if (r.kl >= 0.9 * eps) return r;
    }
    if (hi / lo < 1.0 + 1e-12) break;
  }

  if (have_feasible) {
    std::fprintf(stderr,
                 "kl_constrained_update: dual search hit %d evals, returning feasible eta=%g "
                 "(kl=%g, eps=%g)\n",
                 evals, feasible.eta, feasible.kl, eps);
    return feasible;
  }
  throw PipelineAbort("kl_constrained_update: no feasible controller found in dual search");
}

}  // namespace dsrl
