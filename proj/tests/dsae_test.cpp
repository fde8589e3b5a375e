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

#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "dsrl/common.hpp"
#include "dsrl/dsae.hpp"
#include "dsrl/image.hpp"
#include "dsrl/recording.hpp"

using namespace dsrl;

namespace {

Image random_image(int size, Rng& rng) {
  Image img(size, size);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

// A network whose conv weights are all zero produces constant activations,
// hence uniform softmax maps and features pinned at the origin.
DsaeParams zero_filter_net(int input_size, int channels, int downsample) {
  Rng rng(7);
  DsaeParams p = init_dsae(input_size, channels, downsample, rng);
  p.conv1.W.setZero();
  p.conv1.b.setZero();
  p.conv2.W.setZero();
  p.conv2.b.setZero();
  p.conv3.W.setZero();
  p.conv3.b.setZero();
  return p;
}

Dataset synthetic_dataset(int episodes, int frames, int size, std::uint64_t seed) {
  Dataset ds;
  ds.dt = 0.05;
  ds.image_size = size;
  ds.config_hash = "test";
  Rng rng(seed);
  for (int e = 0; e < episodes; ++e) {
    EpisodeRecord ep;
    for (int t = 0; t < frames; ++t) {
      ep.frames.push_back(quantize(random_image(size, rng)));
      ep.states.emplace_back();
      ep.actions.emplace_back(0.0, 0.0);
    }
    ds.episodes.push_back(std::move(ep));
  }
  return ds;
}

}  // namespace

TEST_SUITE("dsae") {

TEST_CASE("spatial softmax of a constant map is uniform") {
  Eigen::MatrixXd act = Eigen::MatrixXd::Constant(5, 7, 3.25);
  Eigen::MatrixXd s = spatial_softmax(act, 1.0);
  CHECK(s.sum() == doctest::Approx(1.0));
  for (int i = 0; i < s.size(); ++i) {
    CHECK(s.data()[i] == doctest::Approx(1.0 / 35.0));
  }
}

TEST_CASE("spatial softmax is invariant to constant shifts") {
  Rng rng(11);
  Eigen::MatrixXd act(4, 4);
  for (int i = 0; i < act.size(); ++i) act.data()[i] = rng.normal();
  Eigen::MatrixXd a = spatial_softmax(act, 0.5);
  Eigen::MatrixXd b = spatial_softmax(act.array() + 100.0, 0.5);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lower temperature concentrates mass on the peak") {
  Eigen::MatrixXd act = Eigen::MatrixXd::Zero(6, 6);
  act(2, 3) = 1.0;
  double loose = spatial_softmax(act, 1.0)(2, 3);
  double sharp = spatial_softmax(act, 0.05)(2, 3);
  CHECK(sharp > loose);
  CHECK(sharp > 0.999);
  CHECK_THROWS_AS(spatial_softmax(act, 0.0), InvalidInput);
}

TEST_CASE("expected points of a uniform map sit at the origin") {
  Eigen::MatrixXd uni = Eigen::MatrixXd::Constant(8, 8, 1.0 / 64.0);
  Eigen::Vector2d f = expected_points(uni);
  CHECK(f.x() == doctest::Approx(0.0));
  CHECK(f.y() == doctest::Approx(0.0));
}

TEST_CASE("expected points map deltas to the corner grid values") {
  const int n = 8;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  m(0, 0) = 1.0;  // top-left: row 0 -> y = -1, col 0 -> x = -1
  Eigen::Vector2d tl = expected_points(m);
  CHECK(tl.x() == doctest::Approx(-1.0));
  CHECK(tl.y() == doctest::Approx(-1.0));

  m.setZero();
  m(n - 1, n - 1) = 1.0;
  Eigen::Vector2d br = expected_points(m);
  CHECK(br.x() == doctest::Approx(1.0));
  CHECK(br.y() == doctest::Approx(1.0));

  m.setZero();  // equal mass in the two top corners: x averages out
  m(0, 0) = 0.5;
  m(0, n - 1) = 0.5;
  Eigen::Vector2d split = expected_points(m);
  CHECK(split.x() == doctest::Approx(0.0));
  CHECK(split.y() == doctest::Approx(-1.0));
}

TEST_CASE("expected points reject unnormalized maps") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(4, 4, 0.1);
  CHECK_THROWS_AS(expected_points(m), InvalidInput);
}

TEST_CASE("feature point to pixel conversions follow the conv geometry") {
  const int map = 8, input = 16;
  Eigen::Vector2d lo = feature_to_map_px(Eigen::Vector2d(-1, -1), map);
  CHECK(lo.x() == doctest::Approx(0.0));
  CHECK(lo.y() == doctest::Approx(0.0));
  Eigen::Vector2d hi = feature_to_map_px(Eigen::Vector2d(1, 1), map);
  CHECK(hi.x() == doctest::Approx(map - 1));
  CHECK(hi.y() == doctest::Approx(map - 1));
  // Map cell (i, j) is centered on input pixel (2i, 2j).
  Eigen::Vector2d in_hi = feature_to_input_px(Eigen::Vector2d(1, 1), map, input);
  CHECK(in_hi.x() == doctest::Approx(2.0 * (map - 1)));
  CHECK(in_hi.y() == doctest::Approx(2.0 * (map - 1)));
}

TEST_CASE("presence captures the full mass of a delta even at corners") {
  const int n = 8;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  m(3, 5) = 1.0;
  CHECK(feature_presence(m, Eigen::Vector2d(5, 3)) == doctest::Approx(1.0));
  m.setZero();
  m(0, 0) = 1.0;  // clipped window still covers the delta
  CHECK(feature_presence(m, Eigen::Vector2d(0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("presence of a uniform map counts the clipped window area") {
  const int n = 8;
  Eigen::MatrixXd uni = Eigen::MatrixXd::Constant(n, n, 1.0 / (n * n));
  CHECK(feature_presence(uni, Eigen::Vector2d(4, 4)) == doctest::Approx(9.0 / 64.0));
  CHECK(feature_presence(uni, Eigen::Vector2d(0, 0)) == doctest::Approx(4.0 / 64.0));
  CHECK(feature_presence(uni, Eigen::Vector2d(0, 4)) == doctest::Approx(6.0 / 64.0));
}

TEST_CASE("zero filters give uniform maps and origin features") {
  DsaeParams p = zero_filter_net(16, 2, 4);
  Rng rng(3);
  Image img = random_image(16, rng);
  EncodeResult r = encode(p, img);
  REQUIRE(static_cast<int>(r.softmax_maps.size()) == 2);
  const double uni = 1.0 / (p.map_size * p.map_size);
  CHECK((r.softmax_maps[0].array() - uni).abs().maxCoeff() < 1e-12);
  CHECK(r.features.points[0].norm() < 1e-12);
  CHECK(r.features.points[1].norm() < 1e-12);
  CHECK(r.feature_vec.size() == 4);
}

TEST_CASE("decode with zero weights returns the bias") {
  DsaeParams p = zero_filter_net(16, 2, 4);
  p.dec_W.setZero();
  p.dec_b.setConstant(0.75);
  Eigen::VectorXd out = decode(p, Eigen::VectorXd::Zero(p.feature_dim()));
  CHECK(out.size() == 16);
  CHECK((out.array() - 0.75).abs().maxCoeff() == 0.0);
}

TEST_CASE("reconstruction target averages grayscale blocks") {
  Image img(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = (x < 4) ? 1.0 : 0.0;
  Eigen::VectorXd t = recon_target(img, 4);
  REQUIRE(t.size() == 16);
  // Left half white, right half black, row-major 4x4 target.
  for (int y = 0; y < 4; ++y) {
    CHECK(t[y * 4 + 0] == doctest::Approx(1.0));
    CHECK(t[y * 4 + 3] == doctest::Approx(0.0));
  }
}

TEST_CASE("slowness term vanishes when features are constant") {
  DsaeParams p = zero_filter_net(16, 2, 4);
  Rng rng(5);
  std::vector<ImageSeq> seqs(1);
  for (int t = 0; t < 4; ++t) seqs[0].push_back(random_image(16, rng));
  double off = dsae_loss(p, seqs, 0.0);
  double on = dsae_loss(p, seqs, 1.0);
  CHECK(off == doctest::Approx(on));
}

TEST_CASE("slowness term needs at least three frames per sequence") {
  Rng rng(17);
  DsaeParams p = init_dsae(16, 2, 4, rng);
  std::vector<ImageSeq> seqs(3);
  for (auto& s : seqs)
    for (int t = 0; t < 2; ++t) s.push_back(random_image(16, rng));
  CHECK(dsae_loss(p, seqs, 0.0) == doctest::Approx(dsae_loss(p, seqs, 5.0)));
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(23);
  DsaeParams p = init_dsae(16, 2, 4, rng);
  std::vector<ImageSeq> seqs(1);
  for (int t = 0; t < 3; ++t) seqs[0].push_back(random_image(16, rng));
  const double w_slow = 0.7;

  DsaeGrads g;
  g.init_like(p);
  dsae_loss_grad(p, seqs, w_slow, g);

  const double h = 1e-5;
  auto fd_check = [&](double* param, double analytic) {
    double orig = *param;
    *param = orig + h;
    double up = dsae_loss(p, seqs, w_slow);
    *param = orig - h;
    double dn = dsae_loss(p, seqs, w_slow);
    *param = orig;
    double fd = (up - dn) / (2 * h);
    double scale = std::max({1.0, std::abs(fd), std::abs(analytic)});
    CHECK(std::abs(fd - analytic) / scale < 1e-4);
  };

  Rng pick(99);
  for (int i = 0; i < 4; ++i) {
    int j = pick.uniform_int(static_cast<int>(p.conv1.W.size()));
    fd_check(p.conv1.W.data() + j, g.g1.dW.data()[j]);
    j = pick.uniform_int(static_cast<int>(p.conv3.W.size()));
    fd_check(p.conv3.W.data() + j, g.g3.dW.data()[j]);
    j = pick.uniform_int(static_cast<int>(p.dec_W.size()));
    fd_check(p.dec_W.data() + j, g.d_dec_W.data()[j]);
  }
  fd_check(p.conv2.b.data(), g.g2.db.data()[0]);
  fd_check(p.bn1.gamma.data(), g.b1.dgamma.data()[0]);
  fd_check(p.bn2.beta.data(), g.b2.dbeta.data()[0]);
  fd_check(p.bn3.gamma.data() + 1, g.b3.dgamma.data()[1]);
  fd_check(p.dec_b.data(), g.d_dec_b.data()[0]);
  fd_check(&p.rho, g.drho);
}

TEST_CASE("training is deterministic for a fixed seed") {
  Dataset ds = synthetic_dataset(2, 6, 16, 64);
  TrainHyper hy;
  hy.channels = 2;
  hy.downsample = 4;
  hy.epochs = 1;
  hy.window_len = 3;
  hy.batch_size = 2;
  hy.learning_rate = 1e-3;
  DsaeParams a = train_dsae(ds, hy, 5);
  DsaeParams b = train_dsae(ds, hy, 5);
  CHECK(a.conv1.W == b.conv1.W);
  CHECK(a.conv3.W == b.conv3.W);
  CHECK(a.dec_W == b.dec_W);
  CHECK(a.rho == b.rho);
  CHECK(a.bn3.running_mean == b.bn3.running_mean);
}

TEST_CASE("training reduces the epoch loss on a small dataset") {
  Dataset ds = synthetic_dataset(2, 8, 16, 65);
  TrainHyper hy;
  hy.channels = 2;
  hy.downsample = 4;
  hy.epochs = 6;
  hy.window_len = 4;
  hy.batch_size = 2;
  hy.learning_rate = 2e-3;
  std::vector<double> losses;
  TrainCallbacks cb;
  cb.on_epoch = [&](int, double l) { losses.push_back(l); };
  train_dsae(ds, hy, 5, cb);
  REQUIRE(losses.size() == 6);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("training aborts on divergence") {
  Dataset ds = synthetic_dataset(2, 6, 16, 66);
  TrainHyper hy;
  hy.channels = 2;
  hy.downsample = 4;
  // Batch norm keeps activations bounded after the gains explode, so the
  // loss climbs by orders of magnitude per step rather than in one; give it
  // enough steps to overflow.
  hy.epochs = 40;
  hy.window_len = 3;
  hy.batch_size = 2;
  hy.learning_rate = 1e12;
  CHECK_THROWS_AS(train_dsae(ds, hy, 5), PipelineAbort);
}

TEST_CASE("model io round trips parameters bitwise") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "dsrl_test_dsae_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(31);
  DsaeParams p = init_dsae(16, 3, 4, rng);
  p.rho = -0.4;
  std::string path = (dir / "m.tnsr").string();
  save_dsae(path, p);
  CHECK(fs::exists(dir / "m.tnsr.json"));
  DsaeParams q = load_dsae(path);
  CHECK(q.arch_hash() == p.arch_hash());
  CHECK(q.conv1.W == p.conv1.W);
  CHECK(q.conv2.b == p.conv2.b);
  CHECK(q.bn2.running_var == p.bn2.running_var);
  CHECK(q.rho == p.rho);
  CHECK(q.dec_W == p.dec_W);
  Rng ir(4);
  Image img = random_image(16, ir);
  CHECK(encode(p, img).feature_vec == encode(q, img).feature_vec);
}

}  // TEST_SUITE
