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

// Command line front end. Each subcommand runs one pipeline stage against an
// output directory; stages communicate only through the files they write, so
// any stage can be rerun in isolation. `run` chains the stages in order.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dsrl/common.hpp"
#include "dsrl/config.hpp"
#include "dsrl/pipeline.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "out";
  int threads = 0;
  std::string stop_stage;
  dsrl::StageFlags flags;
};

void add_shared_options(CLI::App* sub, CliArgs& args) {
  sub->add_option("--config", args.config_path, "Experiment config JSON; defaults apply if omitted")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", args.seed, "Override the config seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  sub->add_option("--out", args.out, "Artifact directory (default: out)");
  sub->add_option("--threads", args.threads, "Worker threads, 0 = hardware concurrency");
  sub->add_flag("--no-smooth", args.flags.no_smooth,
                "Train the autoencoder without the temporal smoothness penalty");
  sub->add_flag("--no-prune", args.flags.no_prune, "Keep every feature channel");
  sub->add_flag("--baseline-ae", args.flags.baseline_ae,
                "Train the dense-bottleneck baseline autoencoder instead");
}

dsrl::ExperimentConfig make_config(const CliArgs& args) {
  dsrl::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = dsrl::load_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

int run_one(const std::string& stage, const CliArgs& args) {
  if (args.threads > 0) dsrl::set_num_threads(args.threads);
  dsrl::ExperimentConfig cfg = make_config(args);
  std::fprintf(stderr, "[dsrl] stage %s -> %s (seed %llu)\n", stage.c_str(), args.out.c_str(),
               static_cast<unsigned long long>(cfg.seed));
  dsrl::run_stage(stage, cfg, args.out, args.flags);
  return 0;
}

int run_chain(const CliArgs& args) {
  if (args.threads > 0) dsrl::set_num_threads(args.threads);
  dsrl::ExperimentConfig cfg = make_config(args);
  for (const std::string& stage : dsrl::all_stages()) {
    std::fprintf(stderr, "[dsrl] stage %s -> %s (seed %llu)\n", stage.c_str(), args.out.c_str(),
                 static_cast<unsigned long long>(cfg.seed));
    dsrl::run_stage(stage, cfg, args.out, args.flags);
    if (stage == args.stop_stage) break;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dsrl: spatial-feature manipulation pipeline"};
  app.require_subcommand(1);

  CliArgs args;
  const char* stage_help[][2] = {
      {"collect", "Train the blind controller and record the image dataset"},
      {"train-ae", "Train the spatial autoencoder on the dataset"},
      {"prune", "Encode tracks, prune features by goal presence, fit smoothers"},
      {"train-ctrl", "Train the vision controller on the full state"},
      {"eval", "Evaluate blind and vision controllers on fresh trials"},
      {"rank-features", "Rank feature channels by predictiveness"},
      {"plot", "Render learning curves and feature tracks as SVG"},
  };
  for (const auto& s : stage_help) {
    CLI::App* sub = app.add_subcommand(s[0], s[1]);
    add_shared_options(sub, args);
    std::string name = s[0];
    sub->callback([&args, name]() { run_one(name, args); });
  }

  CLI::App* run = app.add_subcommand("run", "Run all stages in order");
  add_shared_options(run, args);
  run->add_option("--stage", args.stop_stage, "Stop after this stage")
      ->check(CLI::IsMember(dsrl::all_stages()));
  run->callback([&args]() { run_chain(args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const dsrl::PipelineAbort& e) {
    std::fprintf(stderr, "pipeline abort: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
