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

#include "dsrl/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dsrl/common.hpp"

namespace dsrl {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kCovFloor = 1e-6;

// Symmetrize, then raise eigenvalues to the floor only if one sits below it.
// Healthy M-step outputs pass through exactly, which keeps the EM objective
// monotone in the common case.
Mat floor_cov(const Mat& c) {
  Mat s = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  if (es.eigenvalues().minCoeff() >= kCovFloor) return s;
  Vec ev = es.eigenvalues().cwiseMax(kCovFloor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct CholCache {
  Mat L;           // lower Cholesky factor of the covariance
  double log_det;  // log determinant of the covariance
};

CholCache chol_of(const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) {
    // Only reachable if a caller hands us a non-SPD covariance directly.
    llt.compute(floor_cov(cov));
  }
  CholCache c;
  c.L = llt.matrixL();
  c.log_det = 2.0 * c.L.diagonal().array().log().sum();
  return c;
}

double log_gauss(const Vec& x, const Vec& mu, const CholCache& c) {
  Vec w = c.L.triangularView<Eigen::Lower>().solve(x - mu);
  return -0.5 * (x.size() * kLog2Pi + c.log_det + w.squaredNorm());
}

// k-means++ seeding followed by Lloyd refinement. Returns hard assignments.
std::vector<int> kmeans(const std::vector<Vec>& data, int K, Rng& rng, std::vector<Vec>* centers_out) {
  const int n = static_cast<int>(data.size());
  std::vector<Vec> centers;
  centers.reserve(K);
  centers.push_back(data[rng.uniform_int(static_cast<std::uint64_t>(n))]);
  std::vector<double> d2(n);
  for (int k = 1; k < K; ++k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec& c : centers) best = std::min(best, (data[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // All points coincide with existing centers; duplicate one.
      centers.push_back(centers[0]);
      continue;
    }
    double target = rng.uniform() * total;
    int pick = n - 1;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= target) {
        pick = i;
        break;
      }
    }
    centers.push_back(data[pick]);
  }

  std::vector<int> assign(n, 0);
  for (int it = 0; it < 20; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best_k = 0;
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        double d = (data[i] - centers[k]).squaredNorm();
        if (d < best) {
          best = d;
          best_k = k;
        }
      }
      if (assign[i] != best_k) {
        assign[i] = best_k;
        changed = true;
      }
    }
    std::vector<int> count(K, 0);
    std::vector<Vec> sum(K, Vec::Zero(data[0].size()));
    for (int i = 0; i < n; ++i) {
      count[assign[i]] += 1;
      sum[assign[i]] += data[i];
    }
    for (int k = 0; k < K; ++k) {
      if (count[k] == 0) {
        // Empty cluster: seize the point farthest from its center.
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          double d = (data[i] - centers[assign[i]]).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centers[k] = data[far_i];
        assign[far_i] = k;
        changed = true;
      } else {
        centers[k] = sum[k] / count[k];
      }
    }
    if (!changed && it > 0) break;
  }
  if (centers_out) *centers_out = centers;
  return assign;
}

}  // namespace

Vec gmm_responsibilities(const Gmm& g, const Vec& x) {
  const int K = g.components();
  Vec lp(K);
  for (int k = 0; k < K; ++k) {
    lp[k] = std::log(g.weights[k]) + log_gauss(x, g.means[k], chol_of(g.covs[k]));
  }
  double m = lp.maxCoeff();
  Vec r = (lp.array() - m).exp();
  return r / r.sum();
}

double gmm_loglik(const Gmm& g, const Vec& x) {
  const int K = g.components();
  Vec lp(K);
  for (int k = 0; k < K; ++k) {
    lp[k] = std::log(g.weights[k]) + log_gauss(x, g.means[k], chol_of(g.covs[k]));
  }
  double m = lp.maxCoeff();
  return m + std::log((lp.array() - m).exp().sum());
}

Gmm fit_gmm(const std::vector<Vec>& data, int K, std::uint64_t seed, int max_iters, double tol,
            std::vector<double>* ll_trace) {
  if (data.empty() || K < 1) throw InvalidInput("fit_gmm: need data and K >= 1");
  const int n = static_cast<int>(data.size());
  const int d = static_cast<int>(data[0].size());
  for (const Vec& x : data) {
    if (x.size() != d || !x.allFinite()) throw InvalidInput("fit_gmm: inconsistent or non-finite sample");
  }
  if (n < K * (d + 1)) throw InvalidInput("fit_gmm: need at least K*(dim+1) samples");

  Rng rng(seed);
  std::vector<Vec> centers;
  std::vector<int> assign = kmeans(data, K, rng, &centers);

  Gmm g;
  g.weights.assign(K, 0.0);
  g.means.assign(K, Vec::Zero(d));
  g.covs.assign(K, Mat::Zero(d, d));
  {
    std::vector<int> count(K, 0);
    for (int i = 0; i < n; ++i) count[assign[i]] += 1;
    for (int k = 0; k < K; ++k) {
      g.weights[k] = static_cast<double>(std::max(count[k], 1)) / n;
      g.means[k] = centers[k];
    }
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    for (double& w : g.weights) w /= wsum;
    for (int i = 0; i < n; ++i) {
      Vec c = data[i] - g.means[assign[i]];
      g.covs[assign[i]] += c * c.transpose();
    }
    for (int k = 0; k < K; ++k) {
      g.covs[k] = floor_cov(count[k] > 0 ? Mat(g.covs[k] / count[k]) : Mat::Identity(d, d));
    }
  }

  Mat resp(n, K);
  double prev_ll = -std::numeric_limits<double>::infinity();
  bool just_split = false;
  for (int iter = 0; iter < max_iters; ++iter) {
    // E-step with cached Cholesky factors.
    std::vector<CholCache> chol(K);
    Vec log_w(K);
    for (int k = 0; k < K; ++k) {
      chol[k] = chol_of(g.covs[k]);
      log_w[k] = std::log(g.weights[k]);
    }
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      Vec lp(K);
      for (int k = 0; k < K; ++k) lp[k] = log_w[k] + log_gauss(data[i], g.means[k], chol[k]);
      double m = lp.maxCoeff();
      double z = (lp.array() - m).exp().sum();
      ll += m + std::log(z);
      resp.row(i) = ((lp.array() - m).exp() / z).transpose();
    }
    if (ll_trace) ll_trace->push_back(ll);
    if (iter > 0 && !just_split && ll - prev_ll < tol * n) break;
    prev_ll = ll;
    just_split = false;

    // M-step.
    Vec nk = resp.colwise().sum().transpose();
    for (int k = 0; k < K; ++k) {
      if (nk[k] < 1e-8 * n) {
        // Collapsed component: split the heaviest one along its widest axis.
        int big = 0;
        for (int j = 1; j < K; ++j) {
          if (g.weights[j] > g.weights[big]) big = j;
        }
        Eigen::SelfAdjointEigenSolver<Mat> es(g.covs[big]);
        Vec dir = es.eigenvectors().col(d - 1) * std::sqrt(std::max(es.eigenvalues()[d - 1], kCovFloor));
        g.means[k] = g.means[big] + dir;
        g.means[big] -= dir;
        g.covs[k] = g.covs[big];
        g.weights[k] = g.weights[big] = 0.5 * g.weights[big];
        std::fprintf(stderr, "fit_gmm: component %d collapsed, split component %d\n", k, big);
        just_split = true;
        continue;
      }
      g.weights[k] = nk[k] / n;
      Vec mu = Vec::Zero(d);
      for (int i = 0; i < n; ++i) mu += resp(i, k) * data[i];
      mu /= nk[k];
      Mat cov = Mat::Zero(d, d);
      for (int i = 0; i < n; ++i) {
        Vec c = data[i] - mu;
        cov += resp(i, k) * (c * c.transpose());
      }
      g.means[k] = mu;
      g.covs[k] = floor_cov(Mat(cov / nk[k]));
    }
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    for (double& w : g.weights) w /= wsum;
  }
  return g;
}

}  // namespace dsrl
