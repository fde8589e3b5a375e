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
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "dsrl/common.hpp"
#include "dsrl/dsae.hpp"
#include "dsrl/featsel.hpp"
#include "dsrl/image.hpp"

using namespace dsrl;

namespace {

// Hand-assembled two-channel encoder on 16x16 inputs. Channel 0 fires on the
// red color plane and channel 1 on the green one: every conv stage has a
// single center-tap delta filter, batch norms stay at their identity
// initialization, and a very negative rho makes the softmax effectively an
// argmax. A saturated dot at an even input pixel therefore yields presence
// close to 1 at the matching map cell, while a blank plane yields a uniform
// map with presence 9/64.
DsaeParams dot_tracker_net() {
  Rng rng(1);
  DsaeParams p = init_dsae(16, 2, 4, rng);
  p.conv1.W.setZero();
  p.conv1.b.setZero();
  // conv1: 7x7 stride 2, center tap (3,3); input plane 0 -> out 0, 1 -> 1.
  p.conv1.W(0, (0 * 7 + 3) * 7 + 3) = 1.0;
  p.conv1.W(1, (1 * 7 + 3) * 7 + 3) = 1.0;
  p.conv2.W.setZero();
  p.conv2.b.setZero();
  p.conv2.W(0, (0 * 5 + 2) * 5 + 2) = 1.0;
  p.conv2.W(1, (1 * 5 + 2) * 5 + 2) = 1.0;
  p.conv3.W.setZero();
  p.conv3.b.setZero();
  p.conv3.W(0, (0 * 5 + 2) * 5 + 2) = 1.0;
  p.conv3.W(1, (1 * 5 + 2) * 5 + 2) = 1.0;
  p.rho = -5.0;
  return p;
}

Image dot_frame(int red_x, int red_y, int green_x, int green_y) {
  Image img(16, 16);
  if (red_x >= 0) img.at(red_x, red_y, 0) = 1.0;
  if (green_x >= 0) img.at(green_x, green_y, 1) = 1.0;
  return img;
}

// Trajectories with layout [r1 r2 | f0 f1 f2 f3], du = 2. Feature 0 and 1
// are (noisy) linear functions of the robot state, feature 2 duplicates
// feature 0 exactly, feature 3 is pure noise.
RankInput rank_dataset(bool with_duplicate, std::uint64_t seed) {
  Rng rng(seed);
  RankInput in;
  in.robot_dim = 2;
  in.num_features = with_duplicate ? 4 : 3;
  const int T = 30;
  for (int e = 0; e < 4; ++e) {
    Trajectory tr;
    double r1 = rng.uniform(-1, 1), r2 = rng.uniform(-1, 1);
    auto make_state = [&](double a, double b) {
      Vec f0(2), f1(2), f3(2);
      f0 << 0.8 * a + 0.01 * rng.normal(), -0.3 * a + 0.01 * rng.normal();
      f1 << 0.5 * b + 0.05 * rng.normal(), 0.7 * b + 0.05 * rng.normal();
      f3 << 0.3 * rng.normal(), 0.3 * rng.normal();
      Vec x(2 + 2 * in.num_features);
      if (with_duplicate) {
        x << a, b, f0, f1, f0, f3;
      } else {
        x << a, b, f0, f1, f3;
      }
      return x;
    };
    for (int t = 0; t < T; ++t) {
      Vec u(2);
      u << 0.5 * rng.normal(), 0.5 * rng.normal();
      tr.states.push_back(make_state(r1, r2));
      tr.actions.push_back(u);
      r1 = 0.9 * r1 + 0.3 * u[0] + 0.02 * rng.normal();
      r2 = 0.85 * r2 + 0.4 * u[1] + 0.02 * rng.normal();
    }
    tr.terminal_state = make_state(r1, r2);
    in.trajs.push_back(std::move(tr));
  }
  return in;
}

int position_of(const std::vector<int>& order, int channel) {
  auto it = std::find(order.begin(), order.end(), channel);
  REQUIRE(it != order.end());
  return static_cast<int>(it - order.begin());
}

}  // namespace

TEST_SUITE("featsel") {

TEST_CASE("features present in every goal frame are kept") {
  DsaeParams p = dot_tracker_net();
  std::vector<Image> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(dot_frame(6, 4, 10, 12));
  FeatureSelection sel = prune_by_goal_presence(frames, p, 0.95);
  CHECK(sel.kept == std::vector<int>{0, 1});
  CHECK(sel.min_presence[0] > 0.99);
  CHECK(sel.min_presence[1] > 0.99);
  // The dot at input pixel (6, 4) peaks at map cell (3, 2) of an 8x8 map.
  CHECK(sel.goal_points[0].x() == doctest::Approx(-1.0 + 2.0 * 3 / 7).epsilon(1e-6));
  CHECK(sel.goal_points[0].y() == doctest::Approx(-1.0 + 2.0 * 2 / 7).epsilon(1e-6));
}

TEST_CASE("one bad goal frame prunes a feature") {
  DsaeParams p = dot_tracker_net();
  std::vector<Image> frames;
  for (int i = 0; i < 4; ++i) frames.push_back(dot_frame(6, 4, 10, 12));
  frames.push_back(dot_frame(6, 4, -1, -1));  // green dot missing once
  FeatureSelection sel = prune_by_goal_presence(frames, p, 0.95);
  CHECK(sel.kept == std::vector<int>{0});
  CHECK(sel.min_presence[1] < 0.5);
  CHECK(sel.mean_presence[1] > sel.min_presence[1]);
  std::string report = selection_report(sel);
  CHECK(report.find("kept\t0") != std::string::npos);
}

TEST_CASE("an empty kept set aborts with per channel diagnostics") {
  DsaeParams p = dot_tracker_net();
  std::vector<Image> frames(3, dot_frame(-1, -1, -1, -1));  // all blank
  CHECK_THROWS_AS(prune_by_goal_presence(frames, p, 0.95), PipelineAbort);
  FeatureSelection stats = goal_presence_stats(frames, p);
  CHECK(stats.kept.empty());
  CHECK(stats.min_presence[0] == doctest::Approx(9.0 / 64.0).epsilon(1e-3));
  CHECK(stats.min_presence[1] == doctest::Approx(9.0 / 64.0).epsilon(1e-3));
}

TEST_CASE("the kept set is invariant to goal frame ordering") {
  DsaeParams p = dot_tracker_net();
  std::vector<Image> frames;
  for (int i = 0; i < 4; ++i) frames.push_back(dot_frame(2 + 2 * i, 4, 10, 12));
  frames.push_back(dot_frame(6, 4, -1, -1));
  FeatureSelection fwd = prune_by_goal_presence(frames, p, 0.95);
  std::vector<Image> rev(frames.rbegin(), frames.rend());
  FeatureSelection bwd = prune_by_goal_presence(rev, p, 0.95);
  CHECK(fwd.kept == bwd.kept);
  for (size_t c = 0; c < fwd.min_presence.size(); ++c) {
    CHECK(fwd.min_presence[c] == bwd.min_presence[c]);
    CHECK((fwd.goal_points[c] - bwd.goal_points[c]).norm() < 1e-12);
  }
}

TEST_CASE("input validation of the presence stats") {
  DsaeParams p = dot_tracker_net();
  std::vector<Image> none;
  CHECK_THROWS_AS(goal_presence_stats(none, p), InvalidInput);
  std::vector<Image> one(1, dot_frame(6, 4, 10, 12));
  CHECK_THROWS_AS(goal_presence_stats(one, p, 0.0), InvalidInput);
  CHECK_THROWS_AS(goal_presence_stats(one, p, 1.5), InvalidInput);
}

TEST_CASE("selection io round trips") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "dsrl_test_featsel";
  fs::remove_all(dir);
  fs::create_directories(dir);
  FeatureSelection sel;
  sel.kept = {1, 3};
  sel.beta = 0.9;
  sel.goal_points = {{0.1, -0.2}, {0.3, 0.4}, {-0.5, 0.6}, {0.7, -0.8}};
  sel.min_presence = {0.5, 0.95, 0.2, 0.99};
  sel.mean_presence = {0.6, 0.97, 0.3, 0.995};
  std::string path = (dir / "sel.tsv").string();
  save_selection(sel, path);
  FeatureSelection back = load_selection(path);
  CHECK(back.kept == sel.kept);
  CHECK(back.beta == doctest::Approx(sel.beta));
  REQUIRE(back.goal_points.size() == 4);
  for (int c = 0; c < 4; ++c) {
    CHECK((back.goal_points[c] - sel.goal_points[c]).norm() < 1e-15);
    CHECK(back.min_presence[c] == doctest::Approx(sel.min_presence[c]).epsilon(1e-15));
    CHECK(back.mean_presence[c] == doctest::Approx(sel.mean_presence[c]).epsilon(1e-15));
  }
}

TEST_CASE("a duplicated channel cannot share the top half with its original") {
  RankInput in = rank_dataset(true, 51);
  RankResult r = predictiveness_rank(in, 5);
  REQUIRE(r.best_first.size() == 4);
  REQUIRE(r.removal_gain.size() == 4);
  int p0 = position_of(r.best_first, 0);
  int p2 = position_of(r.best_first, 2);
  CHECK(!(p0 <= 1 && p2 <= 1));
}

TEST_CASE("pure noise ranks below smooth functions of the state") {
  RankInput in = rank_dataset(false, 52);
  RankResult r = predictiveness_rank(in, 6);
  REQUIRE(r.best_first.size() == 3);
  // Channel 2 is i.i.d. noise; channels 0 and 1 are noisy linear readouts.
  CHECK(position_of(r.best_first, 2) > position_of(r.best_first, 0));
  CHECK(position_of(r.best_first, 2) > position_of(r.best_first, 1));
}

TEST_CASE("a single feature ranks trivially") {
  RankInput in = rank_dataset(false, 53);
  // Strip features 1 and 2 to leave one channel.
  for (auto& tr : in.trajs) {
    for (auto& x : tr.states) x = x.head(4).eval();
    tr.terminal_state = tr.terminal_state.head(4).eval();
  }
  in.num_features = 1;
  RankResult r = predictiveness_rank(in, 7);
  CHECK(r.best_first == std::vector<int>{0});
}

TEST_CASE("ranking is equivariant to channel relabeling") {
  RankInput in = rank_dataset(false, 54);
  RankResult base = predictiveness_rank(in, 9);

  // Swap channels 0 and 2 in the state layout.
  RankInput swapped = in;
  for (auto& tr : swapped.trajs) {
    auto permute = [](Vec& x) {
      Vec tmp = x.segment(2, 2).eval();
      x.segment(2, 2) = x.segment(6, 2);
      x.segment(6, 2) = tmp;
    };
    for (auto& x : tr.states) permute(x);
    permute(tr.terminal_state);
  }
  RankResult perm = predictiveness_rank(swapped, 9);
  auto relabel = [](int c) { return c == 0 ? 2 : (c == 2 ? 0 : c); };
  REQUIRE(perm.best_first.size() == base.best_first.size());
  for (size_t i = 0; i < base.best_first.size(); ++i) {
    CHECK(relabel(perm.best_first[i]) == base.best_first[i]);
  }
}

TEST_CASE("ranking rejects malformed inputs") {
  RankInput in = rank_dataset(false, 55);
  RankInput bad = in;
  bad.num_features = 5;  // state layout no longer matches
  CHECK_THROWS_AS(predictiveness_rank(bad, 1), InvalidInput);
  RankInput two;
  two.robot_dim = 2;
  two.num_features = 3;
  two.trajs = {in.trajs[0]};
  CHECK_THROWS_AS(predictiveness_rank(two, 1), InvalidInput);
}

}  // TEST_SUITE
