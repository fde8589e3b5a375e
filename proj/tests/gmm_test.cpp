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

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "dsrl/common.hpp"
#include "dsrl/gmm.hpp"

using namespace dsrl;

namespace {

std::vector<Vec> gaussian_cloud(const Vec& mean, const Mat& chol_lower, int n, Rng& rng) {
  std::vector<Vec> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vec z(mean.size());
    for (int j = 0; j < z.size(); ++j) z[j] = rng.normal();
    out.push_back(mean + chol_lower * z);
  }
  return out;
}

}  // namespace

TEST_SUITE("gmm") {

TEST_CASE("single component matches the sample moments") {
  Rng rng(8);
  Vec mu(3);
  mu << 1.0, -2.0, 0.5;
  Mat L = Mat::Identity(3, 3);
  L(1, 0) = 0.4;
  L(2, 2) = 0.7;
  std::vector<Vec> data = gaussian_cloud(mu, L, 400, rng);

  Gmm g = fit_gmm(data, 1, 3);
  REQUIRE(g.components() == 1);
  CHECK(g.weights[0] == doctest::Approx(1.0));

  Vec smean = Vec::Zero(3);
  for (const auto& x : data) smean += x;
  smean /= data.size();
  Mat scov = Mat::Zero(3, 3);
  for (const auto& x : data) scov += (x - smean) * (x - smean).transpose();
  scov /= data.size();

  CHECK((g.means[0] - smean).norm() < 1e-8);
  CHECK((g.covs[0] - scov).norm() < 1e-8);
}

TEST_CASE("two separated clusters are recovered") {
  Rng rng(9);
  Vec mu1(2), mu2(2);
  mu1 << -4.0, 0.0;
  mu2 << 4.0, 1.0;
  Mat L = Mat::Identity(2, 2) * 0.5;
  std::vector<Vec> data = gaussian_cloud(mu1, L, 300, rng);
  std::vector<Vec> d2 = gaussian_cloud(mu2, L, 300, rng);
  data.insert(data.end(), d2.begin(), d2.end());

  Gmm g = fit_gmm(data, 2, 17);
  REQUIRE(g.components() == 2);
  // Match components to planted means by x sign.
  int lo = g.means[0][0] < g.means[1][0] ? 0 : 1;
  int hi = 1 - lo;
  CHECK((g.means[lo] - mu1).norm() < 0.2);
  CHECK((g.means[hi] - mu2).norm() < 0.2);
  CHECK(g.weights[lo] == doctest::Approx(0.5).epsilon(0.05));
  // Posteriors are confident far from the boundary.
  Vec probe(2);
  probe << -4.0, 0.0;
  Vec r = gmm_responsibilities(g, probe);
  CHECK(r[lo] > 0.999);
  CHECK(r.sum() == doctest::Approx(1.0));
}

TEST_CASE("mean log likelihood is non-decreasing across iterations") {
  Rng rng(10);
  Vec mu1(3), mu2(3), mu3(3);
  mu1 << 0, 0, 0;
  mu2 << 2.5, -1, 0.5;
  mu3 << -2, 2, 1;
  Mat L = Mat::Identity(3, 3) * 0.8;
  std::vector<Vec> data = gaussian_cloud(mu1, L, 150, rng);
  for (const auto& x : gaussian_cloud(mu2, L, 150, rng)) data.push_back(x);
  for (const auto& x : gaussian_cloud(mu3, L * 0.3, 150, rng)) data.push_back(x);

  std::vector<double> trace;
  fit_gmm(data, 3, 12, 100, 1e-9, &trace);
  REQUIRE(trace.size() >= 2);
  for (size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] >= trace[i - 1] - 1e-9);
  }
}

TEST_CASE("fit is deterministic for a fixed seed") {
  Rng rng(11);
  Vec mu = Vec::Zero(2);
  std::vector<Vec> data = gaussian_cloud(mu, Mat::Identity(2, 2), 120, rng);
  Gmm a = fit_gmm(data, 2, 5);
  Gmm b = fit_gmm(data, 2, 5);
  for (int k = 0; k < 2; ++k) {
    CHECK(a.weights[k] == b.weights[k]);
    CHECK(a.means[k] == b.means[k]);
    CHECK(a.covs[k] == b.covs[k]);
  }
}

TEST_CASE("underdetermined fits are rejected") {
  Rng rng(12);
  std::vector<Vec> data = gaussian_cloud(Vec::Zero(4), Mat::Identity(4, 4), 9, rng);
  // 9 samples cannot support K=2 in dimension 4 (needs K*(dim+1) = 10).
  CHECK_THROWS_AS(fit_gmm(data, 2, 1), InvalidInput);
  CHECK_THROWS_AS(fit_gmm(data, 0, 1), InvalidInput);
}

TEST_CASE("loglik agrees with a hand-built mixture density") {
  Gmm g;
  g.weights = {0.3, 0.7};
  Vec m1(1), m2(1);
  m1 << 0.0;
  m2 << 2.0;
  g.means = {m1, m2};
  g.covs = {Mat::Identity(1, 1) * 0.25, Mat::Identity(1, 1) * 1.0};
  Vec x(1);
  x << 1.0;
  auto normal_pdf = [](double v, double mean, double var) {
    return std::exp(-0.5 * (v - mean) * (v - mean) / var) / std::sqrt(2 * M_PI * var);
  };
  double expect = std::log(0.3 * normal_pdf(1.0, 0.0, 0.25) + 0.7 * normal_pdf(1.0, 2.0, 1.0));
  CHECK(gmm_loglik(g, x) == doctest::Approx(expect));
}

}  // TEST_SUITE
