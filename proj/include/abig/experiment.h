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

// Experiment front door: the flat key = value config file, run
// orchestration across seeds, and the on-disk run directory layout.

#ifndef ABIG_EXPERIMENT_H_
#define ABIG_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "abig/evalkit.h"
#include "abig/training.h"

namespace abig {

struct ExperimentConfig {
  AbigConfig abig;
  std::string out_dir = "runs/default";
  std::vector<std::uint64_t> seeds{0};
  int eval_episodes = 50;
  std::vector<ActMode> eval_modes{ActMode::kSample, ActMode::kArgmax};
  bool run_no_intent = true;
  bool run_random = true;
  std::optional<TaskSpec> transfer_task;
  int transfer_episodes = 50;
  int dump_episodes = 5;  // per (seed, variant, task, mode)
  int jobs = 1;

  // Throws ConfigError.
  void validate() const;
};

// Parses the key = value format ('#' starts a comment). Unknown keys,
// duplicate keys and malformed values raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical form: every key, fixed order, one per line.
std::string serialize_config(const ExperimentConfig& config);

// Parses "grasp", "place", "place@2,3", "hline", "vline", "shapes",
// "shapes@1,1;2,1;...". Missing parameters come from `defaults`.
TaskSpec parse_task(const std::string& text, const GridConfig& env);
std::string task_to_string(const TaskSpec& task);

struct SummaryRow {
  std::string run;
  std::uint64_t seed = 0;
  std::string variant;
  std::string task;
  double success_rate = 0.0;
  double mean_len = 0.0;
  std::string mode;
};

struct TrainOutcome {
  std::vector<SummaryRow> summary;
  std::filesystem::path run_dir;
};

// Runs every seed and enabled variant, evaluates, and writes config.cfg,
// metrics.jsonl, timing.jsonl, summary.csv, episodes.jsonl and checkpoints
// under config.out_dir.
TrainOutcome cmd_train(const ExperimentConfig& config, std::ostream& log);

// Loads the run's ABIG checkpoints for every seed and evaluates them.
// Throws ArgumentError when the run directory or checkpoints are missing.
std::vector<EvalReport> cmd_eval(const std::filesystem::path& run_dir, const std::string& task,
                                 int episodes, std::ostream& out);

struct TransferReport {
  std::uint64_t seed = 0;
  EvalReport transferred;
  EvalReport random_baseline;
};
std::vector<TransferReport> cmd_transfer(const std::filesystem::path& run_dir,
                                         const std::string& target, int episodes,
                                         std::ostream& out);

// Instance spec, e.g. "size=3x3;agent=0,0;blocks=2,2;task=grasp;gamma=0.95".
struct OracleReport {
  std::optional<int> bfs_length;
  double optimal_value = 0.0;
  std::optional<int> greedy_length;
  int n_states = 0;
};
OracleReport cmd_oracle(const std::string& instance, std::ostream& out);

struct InspectReport {
  ProtocolStats stats;
  std::size_t episodes = 0;
};
InspectReport cmd_inspect(const std::filesystem::path& run_dir, std::ostream& out,
                          int replay_episodes = 1);

}  // namespace abig

#endif  // ABIG_EXPERIMENT_H_
