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

// UCT Monte Carlo tree search over messages. The architect simulates the
// builder's reaction with its learned model, applies the true environment
// transition and scores the true task reward.

#ifndef ABIG_MCTS_H_
#define ABIG_MCTS_H_

#include <vector>

#include "abig/agents.h"
#include "abig/buildworld.h"

namespace abig {

struct MctsConfig {
  int simulations = 2000;
  int max_depth = 15;
  double uct_c = 1.4;
  double gamma = 0.95;
  // How simulated builder actions are drawn from the model.
  ActMode builder_mode = ActMode::kSample;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const MctsConfig&) const = default;
};

struct ChildStats {
  long long visits = 0;
  double total_return = 0.0;
  double mean() const { return visits > 0 ? total_return / static_cast<double>(visits) : 0.0; }
};

// +inf for unvisited children, else mean + c * sqrt(ln(parent) / n).
double uct_score(const ChildStats& child, long long parent_visits, double uct_c);

// The task reward as the architect sees it: the unit sparse reward of the
// task times a positive magnitude. Returns are divided by the magnitude
// inside the planner so that UCT always works on [0, 1] returns.
struct ArchitectReward {
  TaskSpec task;
  double magnitude = 1.0;

  StepOutcome operator()(const EnvState& prev, Action a, const EnvState& next,
                         const GridConfig& config) const;
};

struct PlanningProblem {
  GridConfig env;
  ArchitectReward reward;
};

struct PlanResult {
  int message = 0;
  std::vector<ChildStats> root_children;
  std::size_t tree_nodes = 0;
};

class MctsPlanner {
 public:
  MctsPlanner(const ActionModel& model, MctsConfig config);

  // Root message with the most visits, ties to the lowest index.
  PlanResult plan(const EnvState& state, const PlanningProblem& problem, Rng& rng) const;

  const MctsConfig& config() const { return config_; }

 private:
  const ActionModel& model_;
  MctsConfig config_;
};

Message mcts_plan(const EnvState& state, const TaskSpec& task, const GridConfig& env,
                  const ActionModel& model, const MctsConfig& config, Rng& rng);

}  // namespace abig

#endif  // ABIG_MCTS_H_
