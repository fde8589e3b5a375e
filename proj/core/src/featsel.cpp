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

#include "dsrl/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>

#include "dsrl/common.hpp"
#include "dsrl/dynfit.hpp"
#include "dsrl/gmm.hpp"

namespace dsrl {

FeatureSelection goal_presence_stats(const std::vector<Image>& goal_frames,
                                     const DsaeParams& params, double beta) {
  if (goal_frames.empty()) throw InvalidInput("goal_presence_stats: no goal frames");
  if (beta <= 0.0 || beta > 1.0) throw InvalidInput("goal_presence_stats: beta out of (0,1]");
  const int C = params.channels;

  FeatureSelection sel;
  sel.beta = beta;
  sel.goal_points.assign(C, Eigen::Vector2d::Zero());
  sel.min_presence.assign(C, 1.0);
  sel.mean_presence.assign(C, 0.0);

  for (const Image& img : goal_frames) {
    EncodeResult enc = encode(params, img);
    for (int c = 0; c < C; ++c) {
      sel.goal_points[c] += enc.features.points[c];
      sel.min_presence[c] = std::min(sel.min_presence[c], enc.features.presence[c]);
      sel.mean_presence[c] += enc.features.presence[c];
    }
  }
  for (int c = 0; c < C; ++c) {
    sel.goal_points[c] /= static_cast<double>(goal_frames.size());
    sel.mean_presence[c] /= static_cast<double>(goal_frames.size());
  }
  return sel;
}

FeatureSelection prune_by_goal_presence(const std::vector<Image>& goal_frames,
                                        const DsaeParams& params, double beta) {
  FeatureSelection sel = goal_presence_stats(goal_frames, params, beta);
  for (int c = 0; c < params.channels; ++c) {
    if (sel.min_presence[c] >= beta) sel.kept.push_back(c);
  }
  if (sel.kept.empty()) {
    throw PipelineAbort("prune_by_goal_presence: no feature present in every goal frame\n" +
                        selection_report(sel));
  }
  return sel;
}

std::string selection_report(const FeatureSelection& sel) {
  std::ostringstream os;
  os << "beta\t" << sel.beta << "\n";
  os << "kept";
  for (int c : sel.kept) os << "\t" << c;
  os << "\n";
  os << "channel\tmin_presence\tmean_presence\tgoal_x\tgoal_y\n";
  for (size_t c = 0; c < sel.min_presence.size(); ++c) {
    os << c << "\t" << sel.min_presence[c] << "\t" << sel.mean_presence[c] << "\t"
       << sel.goal_points[c].x() << "\t" << sel.goal_points[c].y() << "\n";
  }
  return os.str();
}

void save_selection(const FeatureSelection& sel, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("save_selection: cannot open " + path);
  f.precision(17);
  f << selection_report(sel);
}

FeatureSelection load_selection(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("load_selection: cannot open " + path);
  FeatureSelection sel;
  std::string line;
  if (!std::getline(f, line)) throw InvalidInput("load_selection: truncated file");
  {
    std::istringstream is(line);
    std::string tag;
    is >> tag >> sel.beta;
    if (tag != "beta") throw InvalidInput("load_selection: bad header");
  }
  if (!std::getline(f, line)) throw InvalidInput("load_selection: truncated file");
  {
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    int c;
    while (is >> c) sel.kept.push_back(c);
  }
  std::getline(f, line);  // column header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    int c;
    double minp, meanp, gx, gy;
    if (!(is >> c >> minp >> meanp >> gx >> gy)) break;
    sel.min_presence.push_back(minp);
    sel.mean_presence.push_back(meanp);
    sel.goal_points.push_back({gx, gy});
  }
  return sel;
}

namespace {

// Gaussian log-likelihood of rows of Y given predictions from rows of X via
// ridge regression (with intercept). Returns the total over samples.
double regression_loglik(const Mat& X, const Mat& Y) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  const int q = static_cast<int>(Y.cols());
  if (q == 0) return 0.0;

  Mat Xa(n, p + 1);
  Xa.leftCols(p) = X;
  Xa.col(p).setOnes();
  Mat G = Xa.transpose() * Xa;
  G.diagonal().array() += 1e-6;  // ridge keeps this solvable for collinear features
  Mat W = G.ldlt().solve(Xa.transpose() * Y);
  Mat R = Y - Xa * W;
  Mat S = (R.transpose() * R) / n;
  S = 0.5 * (S + S.transpose());
  S.diagonal().array() += 1e-6;

  Eigen::LLT<Mat> llt(S);
  Mat L = llt.matrixL();
  double logdet = 2.0 * L.diagonal().array().log().sum();
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec w = L.triangularView<Eigen::Lower>().solve(R.row(i).transpose());
    quad += w.squaredNorm();
  }
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  return -0.5 * (n * (q * kLog2Pi + logdet) + quad);
}

// Log-likelihood of the fitted time-varying dynamics on the fitting samples.
double dynamics_loglik(const std::vector<Trajectory>& trajs, const LinearDynamics& dyn) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  double total = 0.0;
  const int T = trajs[0].horizon();
  for (int t = 0; t < T; ++t) {
    Eigen::LLT<Mat> llt(dyn.F[t]);
    Mat L = llt.matrixL();
    double logdet = 2.0 * L.diagonal().array().log().sum();
    const int dx = static_cast<int>(dyn.fc[t].size());
    for (const Trajectory& tr : trajs) {
      const Vec& next = (t + 1 < T) ? tr.states[t + 1] : tr.terminal_state;
      Vec r = next - (dyn.fx[t] * tr.states[t] + dyn.fu[t] * tr.actions[t] + dyn.fc[t]);
      Vec w = L.triangularView<Eigen::Lower>().solve(r);
      total += -0.5 * (dx * kLog2Pi + logdet + w.squaredNorm());
    }
  }
  return total;
}

}  // namespace

RankResult predictiveness_rank(const RankInput& in, std::uint64_t seed) {
  const int C = in.num_features;
  if (C < 1) throw InvalidInput("predictiveness_rank: no features");
  if (in.trajs.size() < 2) throw InvalidInput("predictiveness_rank: need at least 2 trajectories");
  const int dx = static_cast<int>(in.trajs[0].states[0].size());
  if (dx != in.robot_dim + 2 * C) throw InvalidInput("predictiveness_rank: state layout mismatch");

  if (C == 1) return {{0}, {0.0}};

  const int T = in.trajs[0].horizon();
  int total_frames = 0;
  for (const Trajectory& tr : in.trajs) total_frames += tr.horizon();

  // Feature matrix over all frames, one row per frame, for the regression term.
  Mat feats(total_frames, 2 * C);
  {
    int row = 0;
    for (const Trajectory& tr : in.trajs) {
      for (int t = 0; t < tr.horizon(); ++t) {
        feats.row(row++) = tr.states[t].segment(in.robot_dim, 2 * C).transpose();
      }
    }
  }

  // Subset trajectories keep the robot block plus the chosen feature pairs.
  auto subset_trajs = [&](const std::vector<int>& keep) {
    std::vector<Trajectory> out(in.trajs.size());
    const int d = in.robot_dim + 2 * static_cast<int>(keep.size());
    for (size_t j = 0; j < in.trajs.size(); ++j) {
      const Trajectory& tr = in.trajs[j];
      out[j].actions = tr.actions;
      out[j].states.resize(tr.states.size());
      auto project = [&](const Vec& x) {
        Vec y(d);
        y.head(in.robot_dim) = x.head(in.robot_dim);
        for (size_t i = 0; i < keep.size(); ++i) {
          y.segment(in.robot_dim + 2 * i, 2) = x.segment(in.robot_dim + 2 * keep[i], 2);
        }
        return y;
      };
      for (size_t t = 0; t < tr.states.size(); ++t) out[j].states[t] = project(tr.states[t]);
      out[j].terminal_state = project(tr.terminal_state);
    }
    return out;
  };

  auto measure = [&](const std::vector<int>& keep, std::uint64_t s) {
    std::vector<Trajectory> sub = subset_trajs(keep);
    std::vector<Vec> pool = pooled_transitions(sub);
    const int dz = static_cast<int>(pool[0].size());
    GmmPrior prior;
    const int K = std::min(8, static_cast<int>(pool.size()) / (dz + 1));
    if (K >= 1) {
      prior.gmm = fit_gmm(pool, K, s, 30);
      prior.n0 = 1.0;
    } else {
      prior.n0 = 0.0;
    }
    double term1 = dynamics_loglik(sub, fit_dynamics(sub, prior));

    std::vector<int> dropped;
    for (int c = 0; c < C; ++c) {
      if (std::find(keep.begin(), keep.end(), c) == keep.end()) dropped.push_back(c);
    }
    Mat X(total_frames, 2 * keep.size());
    for (size_t i = 0; i < keep.size(); ++i) X.middleCols(2 * i, 2) = feats.middleCols(2 * keep[i], 2);
    Mat Y(total_frames, 2 * dropped.size());
    for (size_t i = 0; i < dropped.size(); ++i) {
      Y.middleCols(2 * i, 2) = feats.middleCols(2 * dropped[i], 2);
    }
    return term1 + regression_loglik(X, Y);
  };

  (void)T;
  Rng rng(seed);
  std::vector<int> active(C);
  for (int c = 0; c < C; ++c) active[c] = c;

  RankResult res;
  std::vector<int> eliminated;
  while (active.size() > 1) {
    // One shared seed per round keeps the candidate fits comparable.
    std::uint64_t s = rng.next();
    double best = -std::numeric_limits<double>::infinity();
    int best_c = active[0];
    for (int c : active) {
      std::vector<int> keep;
      for (int o : active) {
        if (o != c) keep.push_back(o);
      }
      double v = measure(keep, s);
      if (v > best + 1e-12) {
        best = v;
        best_c = c;
      }
    }
    eliminated.push_back(best_c);
    res.removal_gain.push_back(best);
    active.erase(std::find(active.begin(), active.end(), best_c));
  }
  eliminated.push_back(active[0]);
  res.removal_gain.push_back(0.0);

  res.best_first.assign(eliminated.rbegin(), eliminated.rend());
  std::reverse(res.removal_gain.begin(), res.removal_gain.end());
  return res;
}

}  // namespace dsrl
