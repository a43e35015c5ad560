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

#include <cmath>
#include <numeric>

#include "abig/mcts.h"
#include "doctest.h"
#include "oracles.h"

namespace abig {
namespace {

EnvState state_at(Cell agent, Cell block) {
  EnvState s;
  s.agent = agent;
  s.blocks = {{block, false}};
  return s;
}

// Message m acts as (m + x + 2y) mod 6 at agent cell (x, y), so which
// message does what changes from cell to cell.
Action mixing_rule(const EnvState& s, int m) {
  return action_from_index((m + s.agent.x + 2 * s.agent.y) % kNumActions);
}

ScriptedActionModel mixing_model(const GridConfig& env, int vocab) {
  return ScriptedActionModel(vocab, [env](const Observation& obs, int m) {
    return mixing_rule(state_from_observation(obs, env), m);
  });
}

TEST_CASE("uct_score") {
  CHECK(std::isinf(uct_score(ChildStats{}, 5, 1.4)));
  const ChildStats once{1, 0.5};
  const ChildStats four{4, 2.0};
  const double diff = uct_score(once, 8, 1.0) - uct_score(four, 8, 1.0);
  CHECK(diff == doctest::Approx(std::sqrt(std::log(8.0)) * 0.5));
  CHECK(uct_score(four, 8, 0.0) == doctest::Approx(0.5));
  CHECK(uct_score(ChildStats{3, 0.3}, 8, 0.0) < uct_score(four, 8, 0.0));
}

TEST_CASE("config validation") {
  MctsConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.simulations = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = MctsConfig{};
  cfg.max_depth = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = MctsConfig{};
  cfg.uct_c = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = MctsConfig{};
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("depth one: only message 2 grasps") {
  const GridConfig env{3, 3, 1, 40};
  const ScriptedActionModel model(6, [](const Observation&, int m) {
    return m == 2 ? Action::kToggleGripper : Action::kNoOp;
  });
  MctsConfig cfg;
  cfg.max_depth = 1;
  cfg.simulations = 50;
  Rng rng(1);
  const Message m = mcts_plan(state_at({1, 1}, {1, 1}), TaskSpec::grasp(), env, model, cfg, rng);
  CHECK(m.index() == 2);
}

TEST_CASE("no reachable reward returns message 0") {
  const GridConfig env{4, 4, 1, 40};
  const ScriptedActionModel model(5, [](const Observation&, int) { return Action::kNoOp; });
  MctsConfig cfg;
  cfg.simulations = 300;
  Rng rng(2);
  MctsPlanner planner(model, cfg);
  const PlanResult r = planner.plan(state_at({0, 0}, {3, 3}),
                                    PlanningProblem{env, ArchitectReward{TaskSpec::grasp(), 1.0}}, rng);
  CHECK(r.message == 0);
  for (const ChildStats& c : r.root_children) CHECK(c.total_return == 0.0);
}

TEST_CASE("root visits add up to the simulation budget") {
  const GridConfig env{5, 5, 1, 40};
  Rng rng(3);
  const UniformActionModel model(6);
  for (int sims : {1, 7, 100, 1000}) {
    MctsConfig cfg;
    cfg.simulations = sims;
    MctsPlanner planner(model, cfg);
    const EnvState s = reset(env, TaskSpec::grasp(), rng);
    const PlanResult r = planner.plan(s, PlanningProblem{env, ArchitectReward{TaskSpec::grasp(), 1.0}}, rng);
    long long total = 0;
    for (const ChildStats& c : r.root_children) {
      CHECK(c.visits >= 0);
      CHECK(c.mean() >= 0.0);
      CHECK(c.mean() <= 1.0);
      total += c.visits;
    }
    CHECK(total == sims);
    CHECK(r.tree_nodes >= 1);
  }
}

TEST_CASE("planning is deterministic in the seed") {
  const GridConfig env{5, 5, 1, 40};
  Rng init(4);
  const MessageConditionedNet net = MessageConditionedNet::fresh(init, observation_dim(1), 6, {16});
  MctsConfig cfg;
  cfg.simulations = 400;
  MctsPlanner planner(net, cfg);
  const PlanningProblem problem{env, ArchitectReward{TaskSpec::grasp(), 1.0}};
  for (int i = 0; i < 5; ++i) {
    const EnvState s = reset(env, TaskSpec::grasp(), init);
    Rng a(100 + i);
    Rng b(100 + i);
    const PlanResult ra = planner.plan(s, problem, a);
    const PlanResult rb = planner.plan(s, problem, b);
    CHECK(ra.message == rb.message);
    for (int m = 0; m < 6; ++m) {
      CHECK(ra.root_children[m].visits == rb.root_children[m].visits);
      CHECK(ra.root_children[m].total_return == rb.root_children[m].total_return);
    }
  }
}

TEST_CASE("reward magnitude does not change the search") {
  const GridConfig env{5, 5, 1, 40};
  const UniformActionModel model(6);
  MctsConfig cfg;
  cfg.simulations = 500;
  MctsPlanner planner(model, cfg);
  Rng init(5);
  const EnvState s = reset(env, TaskSpec::grasp(), init);
  Rng a(9);
  Rng b(9);
  const PlanResult unit = planner.plan(s, PlanningProblem{env, ArchitectReward{TaskSpec::grasp(), 1.0}}, a);
  const PlanResult big = planner.plan(s, PlanningProblem{env, ArchitectReward{TaskSpec::grasp(), 7.0}}, b);
  CHECK(unit.message == big.message);
  for (int m = 0; m < 6; ++m) CHECK(unit.root_children[m].visits == big.root_children[m].visits);
}

TEST_CASE("root choice matches depth-limited enumeration with a deterministic model") {
  const GridConfig env{4, 4, 1, 40};
  const int vocab = 4;
  const int depth = 5;
  const ScriptedActionModel model = mixing_model(env, vocab);
  MctsConfig cfg;
  cfg.max_depth = depth;
  cfg.simulations = 5000;
  cfg.uct_c = 3.0;
  cfg.builder_mode = ActMode::kArgmax;
  MctsPlanner planner(model, cfg);
  Rng rng(6);
  int matches = 0;
  const int trials = 12;
  for (int i = 0; i < trials; ++i) {
    const EnvState s = reset(env, TaskSpec::grasp(), rng);
    const std::vector<double> q =
        testing::enumerate_q(s, depth, env, TaskSpec::grasp(), vocab, cfg.gamma, mixing_rule);
    const PlanResult r = planner.plan(s, PlanningProblem{env, ArchitectReward{TaskSpec::grasp(), 1.0}}, rng);
    matches += std::abs(q[r.message] - *std::max_element(q.begin(), q.end())) < 1e-12;
  }
  CHECK(matches == trials);
}

TEST_CASE("greedy search at depth one matches one-step enumeration") {
  const GridConfig env{3, 3, 1, 40};
  const int vocab = 6;
  const ScriptedActionModel model = mixing_model(env, vocab);
  MctsConfig cfg;
  cfg.max_depth = 1;
  cfg.simulations = 30;
  cfg.uct_c = 0.0;
  cfg.builder_mode = ActMode::kArgmax;
  const MctsPlanner planner(model, cfg);
  Rng rng(8);
  int rewarded = 0;
  for (int x = 0; x < 3; ++x) {
    for (int y = 0; y < 3; ++y) {
      for (Cell block : {Cell{x, y}, Cell{(x + 1) % 3, y}}) {
        const EnvState s = state_at({x, y}, block);
        const std::vector<double> q =
            testing::enumerate_q(s, 1, env, TaskSpec::grasp(), vocab, cfg.gamma, mixing_rule);
        const PlanResult r =
            planner.plan(s, PlanningProblem{env, ArchitectReward{TaskSpec::grasp(), 1.0}}, rng);
        CHECK(q[r.message] == *std::max_element(q.begin(), q.end()));
        rewarded += q[r.message] == 1.0;
      }
    }
  }
  CHECK(rewarded == 9);
}

TEST_CASE("enumeration oracle sanity") {
  const GridConfig env{3, 3, 1, 40};
  // Message 0 always toggles: one step from a block, value 1 at any depth.
  auto toggler = [](const EnvState&, int m) { return m == 0 ? Action::kToggleGripper : Action::kLeft; };
  const auto q = testing::enumerate_q(state_at({1, 1}, {1, 1}), 1, env, TaskSpec::grasp(), 2, 0.9, toggler);
  CHECK(q[0] == 1.0);
  CHECK(q[1] == 0.0);
  // Block one cell to the left: move, then toggle.
  const auto q2 = testing::enumerate_q(state_at({1, 1}, {0, 1}), 2, env, TaskSpec::grasp(), 2, 0.9, toggler);
  CHECK(q2[1] == doctest::Approx(0.9));
}

}  // namespace
}  // namespace abig
