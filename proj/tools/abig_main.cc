// Copyright 2026 The ABIG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// abig: train, evaluate and inspect architect/builder pairs.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "abig/experiment.h"

int main(int argc, char** argv) {
  CLI::App app{"Architect-builder iterated guiding in BuildWorld"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  int jobs = 0;
  auto* train = app.add_subcommand("train", "Run ABIG and baselines for every seed");
  train->add_option("--config", config_path, "Experiment config file")->required();
  train->add_option("--seeds", seeds, "Override the seed list");
  train->add_option("--out", out_dir, "Override the output directory");
  train->add_option("--jobs", jobs, "Parallel seed workers");

  std::string run_dir;
  std::string task;
  int episodes = 50;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained run on a task");
  eval->add_option("--run", run_dir, "Run directory")->required();
  eval->add_option("--task", task, "Task, e.g. grasp or place@2,2")->required();
  eval->add_option("--episodes", episodes, "Episodes per seed and mode");

  std::string target;
  auto* transfer = app.add_subcommand("transfer", "Evaluate a frozen run on an unseen task");
  transfer->add_option("--run", run_dir, "Run directory")->required();
  transfer->add_option("--target", target, "Target task, e.g. hline")->required();
  transfer->add_option("--episodes", episodes, "Episodes per seed and mode");

  std::string instance;
  auto* oracle = app.add_subcommand("oracle", "BFS and value iteration on a small instance");
  oracle->add_option("--instance", instance,
                     "e.g. size=3x3;agent=0,0;blocks=2,2;task=grasp")
      ->required();

  int replay = 1;
  auto* inspect = app.add_subcommand("inspect", "Protocol statistics and episode replays");
  inspect->add_option("--run", run_dir, "Run directory")->required();
  inspect->add_option("--replay", replay, "Episodes to replay as ASCII");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      abig::ExperimentConfig cfg = abig::load_config(config_path);
      if (!seeds.empty()) cfg.seeds = seeds;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (jobs > 0) cfg.jobs = jobs;
      abig::cmd_train(cfg, std::cerr);
    } else if (*eval) {
      abig::cmd_eval(run_dir, task, episodes, std::cout);
    } else if (*transfer) {
      abig::cmd_transfer(run_dir, target, episodes, std::cout);
    } else if (*oracle) {
      abig::cmd_oracle(instance, std::cout);
    } else if (*inspect) {
      abig::cmd_inspect(run_dir, std::cout, replay);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
