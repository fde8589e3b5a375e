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

#include "dsrl/rl_loop.hpp"

#include <algorithm>
#include <cstdio>

#include "dsrl/common.hpp"
#include "dsrl/dynfit.hpp"
#include "dsrl/klstep.hpp"
#include "dsrl/lqr.hpp"

namespace dsrl {

RlResult rl_iterate(ControlEnv& env, const LinearGaussianPolicy& init, const TaskCost& cost,
                    int N, double eps, int iters, std::uint64_t seed, const RlOptions& opts) {
  if (N < 2) throw InvalidInput("rl_iterate: need at least 2 rollouts per iteration");
  if (iters < 1 || eps <= 0.0) throw InvalidInput("rl_iterate: bad iteration count or eps");
  if (init.horizon() != env.horizon()) throw InvalidInput("rl_iterate: controller horizon mismatch");

  Rng rng(seed);
  RlResult out;
  out.controller = init;

  std::vector<Vec> history;  // all transitions gathered so far, pooled
  const int dz = 2 * env.state_dim() + env.action_dim();

  for (int it = 0; it < iters; ++it) {
    std::vector<Trajectory> samples;
    samples.reserve(N);
    bool retried = false;
    while (static_cast<int>(samples.size()) < N) {
      std::uint64_t s = rng.next();
      try {
        samples.push_back(env.rollout(out.controller, s));
      } catch (const EnvFailure& e) {
        if (retried) {
          throw PipelineAbort(std::string("rl_iterate: repeated environment failure: ") + e.what());
        }
        retried = true;
        std::fprintf(stderr, "rl_iterate: rollout failed (%s), resampling once\n", e.what());
      }
    }

    double mean_cost = 0.0;
    for (const Trajectory& tr : samples) mean_cost += trajectory_cost(cost, tr);
    mean_cost /= N;

    for (const Vec& z : pooled_transitions(samples)) history.push_back(z);

    // The mixture needs K (dim+1) samples; shrink K early on rather than fail.
    GmmPrior prior;
    const int max_k = static_cast<int>(history.size()) / (dz + 1);
    const int K = std::min(opts.gmm_components, max_k);
    if (K >= 1 && opts.prior_strength > 0.0) {
      prior.gmm = fit_gmm(history, K, rng.next(), opts.gmm_max_iters);
      prior.n0 = opts.prior_strength;
    } else {
      prior.n0 = 0.0;
      rng.next();  // keep the seed stream aligned either way
    }

    LinearDynamics dyn = fit_dynamics(samples, prior);
    QuadraticCost cexp = quadratize_cost(cost, samples);

    Vec x0_mean = Vec::Zero(env.state_dim());
    for (const Trajectory& tr : samples) x0_mean += tr.states[0];
    x0_mean /= N;
    Mat x0_cov = Mat::Zero(env.state_dim(), env.state_dim());
    for (const Trajectory& tr : samples) {
      Vec c = tr.states[0] - x0_mean;
      x0_cov += c * c.transpose();
    }
    x0_cov /= N;
    x0_cov.diagonal().array() += 1e-6;

    KlUpdateResult step = kl_constrained_update(out.controller, dyn, cexp, eps, x0_mean, x0_cov);
    out.controller = step.controller;
    out.curve.push_back({it, mean_cost, step.kl, step.eta});
  }
  return out;
}

std::string format_learning_curve(const std::vector<RlIterationStats>& curve) {
  std::string s = "iteration\tmean_cost\tkl\teta\n";
  char buf[160];
  for (const RlIterationStats& r : curve) {
    std::snprintf(buf, sizeof(buf), "%d\t%.9g\t%.9g\t%.9g\n", r.iteration, r.mean_cost, r.kl, r.eta);
    s += buf;
  }
  return s;
}

}  // namespace dsrl
