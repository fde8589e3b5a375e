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

#include "dsrl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "dsrl/archive.hpp"
#include "dsrl/baseline_ae.hpp"
#include "dsrl/common.hpp"
#include "dsrl/lqr.hpp"
#include "dsrl/svgplot.hpp"

namespace dsrl {

namespace fs = std::filesystem;
using nlohmann::json;

void save_policy(const std::string& path, const LinearGaussianPolicy& pol) {
  const int T = pol.horizon();
  if (T < 1) throw InvalidInput("save_policy: empty controller");
  const int m = static_cast<int>(pol.k[0].size());
  const int n = static_cast<int>(pol.K[0].cols());
  TensorArchive ar;
  std::vector<double> K, k, C;
  K.reserve(static_cast<size_t>(T) * m * n);
  k.reserve(static_cast<size_t>(T) * m);
  C.reserve(static_cast<size_t>(T) * m * m);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) K.push_back(pol.K[t](i, j));
    }
    for (int i = 0; i < m; ++i) k.push_back(pol.k[t][i]);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) C.push_back(pol.C[t](i, j));
    }
  }
  ar.put("K", {static_cast<std::uint64_t>(T), static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(n)}, std::move(K));
  ar.put("k", {static_cast<std::uint64_t>(T), static_cast<std::uint64_t>(m)}, std::move(k));
  ar.put("C", {static_cast<std::uint64_t>(T), static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(m)}, std::move(C));
  ar.save(path);
}

LinearGaussianPolicy load_policy(const std::string& path) {
  TensorArchive ar = TensorArchive::load(path);
  const auto& K = ar.get("K");
  const auto& k = ar.get("k");
  const auto& C = ar.get("C");
  const int T = static_cast<int>(K.dims[0]);
  const int m = static_cast<int>(K.dims[1]);
  const int n = static_cast<int>(K.dims[2]);
  LinearGaussianPolicy pol;
  pol.K.resize(T);
  pol.k.resize(T);
  pol.C.resize(T);
  for (int t = 0; t < T; ++t) {
    pol.K[t] = Mat(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) pol.K[t](i, j) = K.data[(static_cast<size_t>(t) * m + i) * n + j];
    }
    pol.k[t] = Vec(m);
    for (int i = 0; i < m; ++i) pol.k[t][i] = k.data[static_cast<size_t>(t) * m + i];
    pol.C[t] = Mat(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) pol.C[t](i, j) = C.data[(static_cast<size_t>(t) * m + i) * m + j];
    }
  }
  return pol;
}

namespace {

void put_mat3(TensorArchive& ar, const std::string& name, const Eigen::Matrix3d& m) {
  std::vector<double> d(9);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) d[i * 3 + j] = m(i, j);
  }
  ar.put(name, {3, 3}, std::move(d));
}

Eigen::Matrix3d get_mat3(const TensorArchive& ar, const std::string& name) {
  const auto& e = ar.get(name);
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = e.data[i * 3 + j];
  }
  return m;
}

void put_axis(TensorArchive& ar, const std::string& prefix, const Lds1d& m) {
  put_mat3(ar, prefix + "/Q", m.Q);
  ar.put_scalar(prefix + "/R", m.R);
  ar.put(prefix + "/mu1", {3}, {m.mu1[0], m.mu1[1], m.mu1[2]});
  put_mat3(ar, prefix + "/P1", m.P1);
}

Lds1d get_axis(const TensorArchive& ar, const std::string& prefix, double dt) {
  Lds1d m = make_const_accel_model(dt);
  m.Q = get_mat3(ar, prefix + "/Q");
  m.R = ar.get_scalar(prefix + "/R");
  const auto& mu = ar.get(prefix + "/mu1");
  m.mu1 << mu.data[0], mu.data[1], mu.data[2];
  m.P1 = get_mat3(ar, prefix + "/P1");
  return m;
}

}  // namespace

void save_kalman_models(const std::string& path, const std::vector<KalmanModel>& models) {
  TensorArchive ar;
  ar.put_scalar("count", static_cast<double>(models.size()));
  for (size_t i = 0; i < models.size(); ++i) {
    std::string p = "m" + std::to_string(i);
    ar.put_scalar(p + "/dt", models[i].dt);
    put_axis(ar, p + "/x", models[i].x);
    put_axis(ar, p + "/y", models[i].y);
  }
  ar.save(path);
}

std::vector<KalmanModel> load_kalman_models(const std::string& path) {
  TensorArchive ar = TensorArchive::load(path);
  const int count = static_cast<int>(ar.get_scalar("count"));
  std::vector<KalmanModel> models(count);
  for (int i = 0; i < count; ++i) {
    std::string p = "m" + std::to_string(i);
    models[i].dt = ar.get_scalar(p + "/dt");
    models[i].x = get_axis(ar, p + "/x", models[i].dt);
    models[i].y = get_axis(ar, p + "/y", models[i].dt);
  }
  return models;
}

void save_cost(const std::string& path, const TaskCost& cost) {
  json j;
  j["point_idx"] = cost.point_idx;
  j["target"] = std::vector<double>(cost.target.data(), cost.target.data() + cost.target.size());
  j["target2"] = std::vector<double>(cost.target2.data(), cost.target2.data() + cost.target2.size());
  j["switch_t"] = cost.switch_t;
  j["w_l2"] = cost.w_l2;
  j["w_log"] = cost.w_log;
  j["w_u"] = cost.w_u;
  j["alpha"] = cost.alpha;
  std::ofstream f(path);
  if (!f) throw InvalidInput("save_cost: cannot open " + path);
  f << j.dump(2) << "\n";
}

TaskCost load_cost(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("load_cost: cannot open " + path);
  json j;
  f >> j;
  TaskCost cost;
  cost.point_idx = j["point_idx"].get<std::vector<int>>();
  std::vector<double> t = j["target"].get<std::vector<double>>();
  cost.target = Eigen::Map<Vec>(t.data(), t.size());
  std::vector<double> t2 = j["target2"].get<std::vector<double>>();
  cost.target2 = Eigen::Map<Vec>(t2.data(), t2.size());
  cost.switch_t = j["switch_t"].get<int>();
  cost.w_l2 = j["w_l2"].get<double>();
  cost.w_log = j["w_log"].get<double>();
  cost.w_u = j["w_u"].get<double>();
  cost.alpha = j["alpha"].get<double>();
  return cost;
}

FeatureTracks encode_dataset(const DsaeParams& params, const Dataset& ds) {
  FeatureTracks tracks;
  tracks.channels = params.channels;
  const int C = params.channels;
  tracks.points.reserve(ds.episodes.size());
  tracks.presence.reserve(ds.episodes.size());
  for (const EpisodeRecord& ep : ds.episodes) {
    const int T = static_cast<int>(ep.frames.size());
    Mat pts(T, 2 * C), pres(T, C);
    parallel_for(T, [&](int t) {
      EncodeResult enc = encode(params, dequantize(ep.frames[t]));
      for (int c = 0; c < C; ++c) {
        pts(t, 2 * c) = enc.features.points[c].x();
        pts(t, 2 * c + 1) = enc.features.points[c].y();
        pres(t, c) = enc.features.presence[c];
      }
    });
    tracks.points.push_back(std::move(pts));
    tracks.presence.push_back(std::move(pres));
  }
  return tracks;
}

void save_tracks(const std::string& path, const FeatureTracks& tracks) {
  TensorArchive ar;
  ar.put_scalar("channels", tracks.channels);
  ar.put_scalar("episodes", static_cast<double>(tracks.points.size()));
  char name[64];
  for (size_t e = 0; e < tracks.points.size(); ++e) {
    const Mat& p = tracks.points[e];
    const Mat& s = tracks.presence[e];
    std::vector<double> pd(p.size()), sd(s.size());
    for (int r = 0; r < p.rows(); ++r) {
      for (int c = 0; c < p.cols(); ++c) pd[r * p.cols() + c] = p(r, c);
    }
    for (int r = 0; r < s.rows(); ++r) {
      for (int c = 0; c < s.cols(); ++c) sd[r * s.cols() + c] = s(r, c);
    }
    std::snprintf(name, sizeof(name), "ep%04zu/points", e);
    ar.put(name, {static_cast<std::uint64_t>(p.rows()), static_cast<std::uint64_t>(p.cols())}, std::move(pd));
    std::snprintf(name, sizeof(name), "ep%04zu/presence", e);
    ar.put(name, {static_cast<std::uint64_t>(s.rows()), static_cast<std::uint64_t>(s.cols())}, std::move(sd));
  }
  ar.save(path);
}

FeatureTracks load_tracks(const std::string& path) {
  TensorArchive ar = TensorArchive::load(path);
  FeatureTracks tracks;
  tracks.channels = static_cast<int>(ar.get_scalar("channels"));
  const int episodes = static_cast<int>(ar.get_scalar("episodes"));
  char name[64];
  for (int e = 0; e < episodes; ++e) {
    std::snprintf(name, sizeof(name), "ep%04d/points", e);
    const auto& p = ar.get(name);
    std::snprintf(name, sizeof(name), "ep%04d/presence", e);
    const auto& s = ar.get(name);
    Mat pts(p.dims[0], p.dims[1]), pres(s.dims[0], s.dims[1]);
    for (int r = 0; r < pts.rows(); ++r) {
      for (int c = 0; c < pts.cols(); ++c) pts(r, c) = p.data[r * pts.cols() + c];
    }
    for (int r = 0; r < pres.rows(); ++r) {
      for (int c = 0; c < pres.cols(); ++c) pres(r, c) = s.data[r * pres.cols() + c];
    }
    tracks.points.push_back(std::move(pts));
    tracks.presence.push_back(std::move(pres));
  }
  return tracks;
}

WorldState initial_world_state(const ExperimentConfig&) { return WorldState{}; }

WorldState goal_world_state(const ExperimentConfig& cfg) {
  WorldState w;
  w.block_pos = {cfg.goal.block_x, cfg.goal.block_y};
  w.gripper_pos = {cfg.goal.gripper_x, cfg.goal.gripper_y};
  w.gripper_vel.setZero();
  w.block_vel.setZero();
  return w;
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, const std::string& stage) {
  std::uint64_t state = cfg.seed ^ fnv1a64(stage);
  return splitmix64(state);
}

std::vector<Image> render_goal_frames(const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  WorldState goal = goal_world_state(cfg);
  std::vector<Image> frames;
  frames.reserve(cfg.goal.goal_window);
  for (int i = 0; i < cfg.goal.goal_window; ++i) {
    Image img = render(goal, cfg.render);
    add_pixel_noise(img, cfg.render.noise_std, rng);
    frames.push_back(dequantize(quantize(img)));
  }
  return frames;
}

TaskCost blind_cost(const ExperimentConfig& cfg) {
  TaskCost cost;
  cost.point_idx = {0, 1};
  cost.target = Vec(2);
  cost.target << cfg.goal.blind_target_x, cfg.goal.blind_target_y;
  return cost;
}

TaskCost define_goal(const FeatureSelection& sel, const ExperimentConfig& cfg) {
  if (sel.kept.empty()) throw InvalidInput("define_goal: empty feature selection");
  const int k = static_cast<int>(sel.kept.size());
  TaskCost cost;
  cost.point_idx.reserve(2 + 2 * k);
  cost.target = Vec(2 + 2 * k);
  cost.point_idx.push_back(0);
  cost.point_idx.push_back(1);
  cost.target[0] = cfg.goal.gripper_x;
  cost.target[1] = cfg.goal.gripper_y;
  for (int i = 0; i < k; ++i) {
    cost.point_idx.push_back(4 + 2 * i);
    cost.point_idx.push_back(4 + 2 * i + 1);
    cost.target[2 + 2 * i] = sel.goal_points[sel.kept[i]].x();
    cost.target[2 + 2 * i + 1] = sel.goal_points[sel.kept[i]].y();
  }
  return cost;
}

double kl_epsilon(const ExperimentConfig& cfg) {
  return cfg.rl.eps_base * cfg.episode.T * 2.0;
}

namespace {

// Wraps the blind env so every training rollout lands in the dataset.
class RecordingBlindEnv : public ControlEnv {
 public:
  RecordingBlindEnv(Sim2dBlindEnv& inner, std::vector<EpisodeRecord>& sink)
      : inner_(inner), sink_(sink) {}

  int state_dim() const override { return inner_.state_dim(); }
  int action_dim() const override { return inner_.action_dim(); }
  int horizon() const override { return inner_.horizon(); }

  Trajectory rollout(const LinearGaussianPolicy& pol, std::uint64_t seed) override {
    EpisodeRecord rec;
    Trajectory tr = inner_.rollout_record(pol, seed, &rec.states, &rec.terminal_state);
    rec.actions.reserve(tr.actions.size());
    for (const Vec& u : tr.actions) rec.actions.push_back({u[0], u[1]});
    sink_.push_back(std::move(rec));
    return tr;
  }

 private:
  Sim2dBlindEnv& inner_;
  std::vector<EpisodeRecord>& sink_;
};

}  // namespace

BlindPhaseResult run_blind_phase(const ExperimentConfig& cfg) {
  const WorldState init = initial_world_state(cfg);
  Sim2dBlindEnv env(cfg.episode, init);
  LinearGaussianPolicy pd = init_pd_controller(Sim2dBlindEnv::observe(init), cfg.episode.T, 2,
                                               cfg.rl.pd_kp, cfg.rl.pd_kd, cfg.rl.pd_noise);

  BlindPhaseResult out;
  std::vector<EpisodeRecord> records;
  if (cfg.rl.blind_iters > 0) {
    RecordingBlindEnv rec_env(env, records);
    RlOptions opts;
    opts.gmm_components = cfg.rl.gmm_components;
    opts.prior_strength = cfg.rl.prior_strength;
    RlResult rl = rl_iterate(rec_env, pd, blind_cost(cfg), cfg.rl.num_samples, kl_epsilon(cfg),
                             cfg.rl.blind_iters, stage_seed(cfg, "blind-rl"), opts);
    out.controller = rl.controller;
    out.curve = rl.curve;
  } else {
    out.controller = pd;
  }

  // Top up with final-controller rollouts until the dataset has its trials.
  Rng extra(stage_seed(cfg, "collect-extra"));
  while (static_cast<int>(records.size()) < cfg.collect.trials) {
    EpisodeRecord rec;
    Trajectory tr = env.rollout_record(out.controller, extra.next(), &rec.states, &rec.terminal_state);
    rec.actions.reserve(tr.actions.size());
    for (const Vec& u : tr.actions) rec.actions.push_back({u[0], u[1]});
    records.push_back(std::move(rec));
  }

  // Render observations for every recorded step, with per-episode noise
  // streams so episode order cannot leak across frames.
  Rng frame_rng(stage_seed(cfg, "collect-frames"));
  for (size_t e = 0; e < records.size(); ++e) {
    Rng ep_rng = frame_rng.fork(e);
    records[e].frames.reserve(records[e].states.size());
    for (const WorldState& w : records[e].states) {
      Image img = render(w, cfg.render);
      add_pixel_noise(img, cfg.render.noise_std, ep_rng);
      records[e].frames.push_back(quantize(img));
    }
  }

  out.dataset.dt = cfg.episode.dt;
  out.dataset.image_size = cfg.render.image_size;
  out.dataset.config_hash = config_hash(cfg);
  out.dataset.episodes = std::move(records);
  return out;
}

std::vector<KalmanModel> fit_feature_kalman(const FeatureTracks& tracks,
                                            const std::vector<int>& channels, double beta,
                                            double dt, int train_episodes) {
  const int n_ep = std::min<int>(train_episodes, static_cast<int>(tracks.points.size()));
  if (n_ep < 1) throw InvalidInput("fit_feature_kalman: no episodes");
  std::vector<KalmanModel> models;
  models.reserve(channels.size());
  for (int c : channels) {
    std::vector<std::vector<Eigen::Vector2d>> obs(n_ep);
    std::vector<std::vector<bool>> present(n_ep);
    for (int e = 0; e < n_ep; ++e) {
      const Mat& p = tracks.points[e];
      const Mat& s = tracks.presence[e];
      obs[e].reserve(p.rows());
      present[e].reserve(p.rows());
      for (int t = 0; t < p.rows(); ++t) {
        obs[e].push_back({p(t, 2 * c), p(t, 2 * c + 1)});
        present[e].push_back(s(t, c) >= beta);
      }
    }
    models.push_back(kalman_em(obs, present, dt, 50));
  }
  return models;
}

VisionPhaseResult run_vision_phase(const ExperimentConfig& cfg, const DsaeParams& params,
                                   const FeatureSelection& sel,
                                   const std::vector<KalmanModel>& models, const TaskCost& cost) {
  const WorldState init = initial_world_state(cfg);
  Sim2dVisionEnv env(cfg.episode, cfg.render, params, sel, models, init);

  Vec x0 = Vec::Zero(env.state_dim());
  x0.head(4) = Sim2dBlindEnv::observe(init);
  LinearGaussianPolicy pd =
      init_pd_controller(x0, cfg.episode.T, 2, cfg.rl.pd_kp, cfg.rl.pd_kd, cfg.rl.pd_noise);

  RlOptions opts;
  opts.gmm_components = cfg.rl.gmm_components;
  opts.prior_strength = cfg.rl.prior_strength;
  RlResult rl = rl_iterate(env, pd, cost, cfg.rl.num_samples, kl_epsilon(cfg),
                           cfg.rl.vision_iters, stage_seed(cfg, "vision-rl"), opts);
  return {rl.controller, rl.curve};
}

EvalReport summarize_distances(const std::vector<double>& distances, double threshold) {
  EvalReport r;
  r.distances = distances;
  r.threshold = threshold;
  if (distances.empty()) return r;
  for (double d : distances) {
    r.mean += d;
    if (d <= threshold) ++r.successes;
  }
  r.mean /= distances.size();
  if (distances.size() > 1) {
    double ss = 0.0;
    for (double d : distances) ss += (d - r.mean) * (d - r.mean);
    r.sd = std::sqrt(ss / (distances.size() - 1));
  }
  return r;
}

namespace {

LinearGaussianPolicy mean_policy(const LinearGaussianPolicy& pol) {
  LinearGaussianPolicy p = pol;
  for (Mat& C : p.C) C = 1e-18 * Mat::Identity(C.rows(), C.cols());
  return p;
}

template <typename Env>
EvalReport eval_env(Env& env, const ExperimentConfig& cfg, const LinearGaussianPolicy& pol,
                    std::uint64_t seed) {
  LinearGaussianPolicy mp = mean_policy(pol);
  Rng rng(seed);
  std::vector<double> dists;
  dists.reserve(cfg.eval.trials);
  Eigen::Vector2d goal(cfg.goal.block_x, cfg.goal.block_y);
  for (int i = 0; i < cfg.eval.trials; ++i) {
    WorldState final_world;
    env.rollout_record(mp, rng.next(), nullptr, &final_world);
    dists.push_back((final_world.block_pos - goal).norm());
  }
  return summarize_distances(dists, cfg.eval.success_frac * cfg.episode.workspace.width());
}

}  // namespace

EvalReport evaluate_blind(const ExperimentConfig& cfg, const LinearGaussianPolicy& pol) {
  Sim2dBlindEnv env(cfg.episode, initial_world_state(cfg));
  return eval_env(env, cfg, pol, stage_seed(cfg, "eval-blind"));
}

EvalReport evaluate_vision(const ExperimentConfig& cfg, const DsaeParams& params,
                           const FeatureSelection& sel, const std::vector<KalmanModel>& models,
                           const LinearGaussianPolicy& pol) {
  Sim2dVisionEnv env(cfg.episode, cfg.render, params, sel, models, initial_world_state(cfg));
  return eval_env(env, cfg, pol, stage_seed(cfg, "eval-vision"));
}

std::string format_eval_table(const EvalReport& blind, const EvalReport& vision) {
  std::ostringstream os;
  os.precision(9);
  os << "controller\tmean_distance\tsd\tsuccesses\ttrials\tthreshold\n";
  os << "blind\t" << blind.mean << "\t" << blind.sd << "\t" << blind.successes << "\t"
     << blind.distances.size() << "\t" << blind.threshold << "\n";
  os << "vision\t" << vision.mean << "\t" << vision.sd << "\t" << vision.successes << "\t"
     << vision.distances.size() << "\t" << vision.threshold << "\n";
  return os.str();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open " + path.string());
  f << text;
}

void write_manifest(const fs::path& out, const std::string& stage, const ExperimentConfig& cfg,
                    const StageFlags& flags, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json j;
  j["stage"] = stage;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["stage_seed"] = stage_seed(cfg, stage);
  j["flags"] = {{"no_smooth", flags.no_smooth},
                {"no_prune", flags.no_prune},
                {"baseline_ae", flags.baseline_ae}};
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  write_text(out / (stage + ".manifest.json"), j.dump(2) + "\n");
}

Dataset training_subset(const Dataset& ds, int heldout) {
  Dataset t = ds;
  const int keep = std::max<int>(0, static_cast<int>(t.episodes.size()) - heldout);
  t.episodes.resize(keep);
  return t;
}

std::vector<RlIterationStats> parse_curve(const fs::path& path) {
  std::vector<RlIterationStats> curve;
  std::ifstream f(path);
  if (!f) return curve;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    RlIterationStats r;
    if (std::sscanf(line.c_str(), "%d\t%lf\t%lf\t%lf", &r.iteration, &r.mean_cost, &r.kl,
                    &r.eta) == 4) {
      curve.push_back(r);
    }
  }
  return curve;
}

void stage_collect(const ExperimentConfig& cfg, const fs::path& out, const StageFlags& flags) {
  BlindPhaseResult res = run_blind_phase(cfg);
  save_dataset((out / "dataset").string(), res.dataset);
  save_policy((out / "blind_ctrl.tnsr").string(), res.controller);
  write_text(out / "blind_curve.tsv", format_learning_curve(res.curve));
  write_manifest(out, "collect", cfg, flags, {},
                 {"dataset", "blind_ctrl.tnsr", "blind_curve.tsv"});
}

void stage_train_ae(const ExperimentConfig& cfg, const fs::path& out, const StageFlags& flags) {
  Dataset ds = load_dataset((out / "dataset").string());
  Dataset train = training_subset(ds, cfg.collect.heldout);
  TrainHyper hyper = cfg.dsae;
  if (flags.no_smooth) hyper.slowness_weight = 0.0;

  std::ostringstream curve;
  curve << "epoch\tmean_frame_loss\n";
  curve.precision(9);
  TrainCallbacks cb;
  cb.on_epoch = [&](int epoch, double loss) {
    curve << epoch << "\t" << loss << "\n";
    std::fprintf(stderr, "train-ae epoch %d loss %.6g\n", epoch, loss);
  };

  if (flags.baseline_ae) {
    BaselineAeParams p = train_baseline_ae(train, hyper, stage_seed(cfg, "train-ae"), cb);
    save_baseline_ae((out / "baseline_ae.tnsr").string(), p);
    write_text(out / "baseline_curve.tsv", curve.str());
    write_manifest(out, "train-ae", cfg, flags, {"dataset"},
                   {"baseline_ae.tnsr", "baseline_curve.tsv"});
    return;
  }
  DsaeParams p = train_dsae(train, hyper, stage_seed(cfg, "train-ae"), cb);
  save_dsae((out / "dsae.tnsr").string(), p);
  write_text(out / "ae_curve.tsv", curve.str());
  write_manifest(out, "train-ae", cfg, flags, {"dataset"}, {"dsae.tnsr", "ae_curve.tsv"});
}

void stage_prune(const ExperimentConfig& cfg, const fs::path& out, const StageFlags& flags) {
  DsaeParams params = load_dsae((out / "dsae.tnsr").string());
  Dataset ds = load_dataset((out / "dataset").string());
  FeatureTracks tracks = encode_dataset(params, ds);
  save_tracks((out / "tracks.tnsr").string(), tracks);

  std::vector<Image> goal_frames = render_goal_frames(cfg, stage_seed(cfg, "goal-frames"));
  FeatureSelection sel;
  if (flags.no_prune) {
    sel = goal_presence_stats(goal_frames, params, cfg.goal.beta);
    for (int c = 0; c < params.channels; ++c) sel.kept.push_back(c);
  } else {
    sel = prune_by_goal_presence(goal_frames, params, cfg.goal.beta);
  }
  save_selection(sel, (out / "selection.tsv").string());

  const int train_eps = static_cast<int>(ds.episodes.size()) - cfg.collect.heldout;
  std::vector<KalmanModel> models =
      fit_feature_kalman(tracks, sel.kept, cfg.goal.beta, cfg.episode.dt, train_eps);
  save_kalman_models((out / "kalman.tnsr").string(), models);

  save_cost((out / "goal_cost.json").string(), define_goal(sel, cfg));
  write_manifest(out, "prune", cfg, flags, {"dsae.tnsr", "dataset"},
                 {"tracks.tnsr", "selection.tsv", "kalman.tnsr", "goal_cost.json"});
}

void stage_train_ctrl(const ExperimentConfig& cfg, const fs::path& out, const StageFlags& flags) {
  DsaeParams params = load_dsae((out / "dsae.tnsr").string());
  FeatureSelection sel = load_selection((out / "selection.tsv").string());
  std::vector<KalmanModel> models = load_kalman_models((out / "kalman.tnsr").string());
  TaskCost cost = load_cost((out / "goal_cost.json").string());

  VisionPhaseResult res = run_vision_phase(cfg, params, sel, models, cost);
  save_policy((out / "vision_ctrl.tnsr").string(), res.controller);
  write_text(out / "vision_curve.tsv", format_learning_curve(res.curve));
  write_manifest(out, "train-ctrl", cfg, flags,
                 {"dsae.tnsr", "selection.tsv", "kalman.tnsr", "goal_cost.json"},
                 {"vision_ctrl.tnsr", "vision_curve.tsv"});
}

void stage_eval(const ExperimentConfig& cfg, const fs::path& out, const StageFlags& flags) {
  LinearGaussianPolicy blind = load_policy((out / "blind_ctrl.tnsr").string());
  LinearGaussianPolicy vision = load_policy((out / "vision_ctrl.tnsr").string());
  DsaeParams params = load_dsae((out / "dsae.tnsr").string());
  FeatureSelection sel = load_selection((out / "selection.tsv").string());
  std::vector<KalmanModel> models = load_kalman_models((out / "kalman.tnsr").string());

  EvalReport rb = evaluate_blind(cfg, blind);
  EvalReport rv = evaluate_vision(cfg, params, sel, models, vision);
  std::string table = format_eval_table(rb, rv);
  write_text(out / "eval.tsv", table);
  std::fputs(table.c_str(), stdout);
  write_manifest(out, "eval", cfg, flags,
                 {"blind_ctrl.tnsr", "vision_ctrl.tnsr", "dsae.tnsr", "selection.tsv", "kalman.tnsr"},
                 {"eval.tsv"});
}

void stage_rank(const ExperimentConfig& cfg, const fs::path& out, const StageFlags& flags) {
  FeatureTracks tracks = load_tracks((out / "tracks.tnsr").string());
  Dataset ds = load_dataset((out / "dataset").string(), false);
  const int C = tracks.channels;

  RankInput in;
  in.robot_dim = 4;
  in.num_features = C;
  for (size_t e = 0; e < ds.episodes.size(); ++e) {
    const EpisodeRecord& ep = ds.episodes[e];
    const Mat& pts = tracks.points[e];
    const int T = static_cast<int>(ep.actions.size());
    if (T < 2) continue;
    Trajectory tr;
    // The last recorded frame serves as the terminal state, so the
    // trajectory horizon is T-1.
    for (int t = 0; t < T; ++t) {
      Vec x(4 + 2 * C);
      x.head(4) = Sim2dBlindEnv::observe(ep.states[t]);
      x.tail(2 * C) = pts.row(t).transpose();
      if (t < T - 1) {
        tr.states.push_back(x);
        tr.actions.push_back(Vec(ep.actions[t]));
      } else {
        tr.terminal_state = x;
      }
    }
    in.trajs.push_back(std::move(tr));
  }

  RankResult res = predictiveness_rank(in, stage_seed(cfg, "rank-features"));
  std::ostringstream os;
  os.precision(9);
  os << "rank\tchannel\tmeasure_after_removal\n";
  for (size_t i = 0; i < res.best_first.size(); ++i) {
    os << i + 1 << "\t" << res.best_first[i] << "\t" << res.removal_gain[i] << "\n";
  }
  write_text(out / "ranking.tsv", os.str());
  write_manifest(out, "rank-features", cfg, flags, {"tracks.tnsr", "dataset"}, {"ranking.tsv"});
}

void stage_plot(const ExperimentConfig& cfg, const fs::path& out, const StageFlags& flags) {
  fs::create_directories(out / "plots");
  std::vector<std::string> outputs;

  std::vector<CurveSeries> series;
  auto add_curve = [&](const fs::path& p, const std::string& label, const std::string& color) {
    std::vector<RlIterationStats> curve = parse_curve(p);
    if (curve.empty()) return;
    CurveSeries s;
    s.label = label;
    s.color = color;
    for (const RlIterationStats& r : curve) {
      s.x.push_back(r.iteration);
      s.y.push_back(r.mean_cost);
    }
    series.push_back(std::move(s));
  };
  add_curve(out / "blind_curve.tsv", "blind", "#b23a1f");
  add_curve(out / "vision_curve.tsv", "vision", "#1f6fb2");
  if (!series.empty()) {
    write_curve_svg((out / "plots" / "learning_curves.svg").string(), "mean cost per iteration",
                    series);
    outputs.push_back("plots/learning_curves.svg");
  }

  if (fs::exists(out / "tracks.tnsr")) {
    FeatureTracks tracks = load_tracks((out / "tracks.tnsr").string());
    if (!tracks.points.empty()) {
      const Mat& pts = tracks.points.back();
      const int map_size = cfg.render.image_size / 2;
      std::vector<std::vector<Eigen::Vector2d>> px_tracks(tracks.channels);
      for (int c = 0; c < tracks.channels; ++c) {
        px_tracks[c].reserve(pts.rows());
        for (int t = 0; t < pts.rows(); ++t) {
          px_tracks[c].push_back(feature_to_input_px({pts(t, 2 * c), pts(t, 2 * c + 1)}, map_size,
                                                     cfg.render.image_size));
        }
      }
      write_feature_tracks_svg((out / "plots" / "feature_tracks.svg").string(),
                               "feature tracks, red start to green end", px_tracks,
                               cfg.render.image_size);
      outputs.push_back("plots/feature_tracks.svg");
    }
  }
  write_manifest(out, "plot", cfg, flags, {"blind_curve.tsv", "vision_curve.tsv", "tracks.tnsr"},
                 outputs);
}

}  // namespace

const std::vector<std::string>& all_stages() {
  static const std::vector<std::string> stages = {"collect",    "train-ae", "prune",
                                                  "train-ctrl", "eval",     "rank-features",
                                                  "plot"};
  return stages;
}

void run_stage(const std::string& stage, const ExperimentConfig& cfg, const std::string& out_dir,
               const StageFlags& flags) {
  fs::path out(out_dir);
  fs::create_directories(out);
  if (stage == "collect") {
    stage_collect(cfg, out, flags);
  } else if (stage == "train-ae") {
    stage_train_ae(cfg, out, flags);
  } else if (stage == "prune") {
    stage_prune(cfg, out, flags);
  } else if (stage == "train-ctrl") {
    stage_train_ctrl(cfg, out, flags);
  } else if (stage == "eval") {
    stage_eval(cfg, out, flags);
  } else if (stage == "rank-features") {
    stage_rank(cfg, out, flags);
  } else if (stage == "plot") {
    stage_plot(cfg, out, flags);
  } else {
    throw InvalidInput("run_stage: unknown stage " + stage);
  }
}

}  // namespace dsrl
