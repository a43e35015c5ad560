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

#include <algorithm>
#include <map>
#include <set>

#include "abig/buildworld.h"
#include "doctest.h"
#include "oracles.h"

namespace abig {
namespace {

EnvState make_state(Cell agent, std::vector<Block> blocks, int step_count = 0) {
  EnvState s;
  s.agent = agent;
  s.blocks = std::move(blocks);
  s.gripper_engaged = std::any_of(s.blocks.begin(), s.blocks.end(),
                                  [](const Block& b) { return b.grasped; });
  s.step_count = step_count;
  return s;
}

GridConfig grid(int w, int h, int n_blocks, int horizon = 40) {
  return GridConfig{w, h, n_blocks, horizon};
}

TEST_CASE("reset on a 1x1 world with no blocks puts the agent at the origin") {
  Rng rng(7);
  const EnvState s = reset(grid(1, 1, 0), TaskSpec::grasp(), rng);
  CHECK(s.agent == Cell{0, 0});
  CHECK(s.blocks.empty());
  CHECK_FALSE(s.gripper_engaged);
  CHECK(s.step_count == 0);
}

TEST_CASE("reset draws distinct cells and a clean gripper") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const GridConfig cfg = grid(5, 5, 2);
    const EnvState s = reset(cfg, TaskSpec::grasp(), rng);
    std::set<Cell> cells{s.agent};
    for (const Block& b : s.blocks) {
      cells.insert(b.cell);
      CHECK_FALSE(b.grasped);
    }
    CHECK(cells.size() == 3);
    CHECK(s.step_count == 0);
    CHECK(invariant_violations(s, cfg).empty());
  }
}

TEST_CASE("reset is uniform over the 72 layouts of a 3x3 world with one block") {
  const GridConfig cfg = grid(3, 3, 1);
  Rng rng(2024);
  std::map<std::pair<Cell, Cell>, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const EnvState s = reset(cfg, TaskSpec::grasp(), rng);
    counts[{s.agent, s.blocks[0].cell}] += 1;
  }
  const auto layouts = testing::initial_layouts(cfg);
  REQUIRE(layouts.size() == 72);
  CHECK(counts.size() == 72);
  const double p = 1.0 / 72.0;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (const EnvState& layout : layouts) {
    const int c = counts[{layout.agent, layout.blocks[0].cell}];
    CHECK(std::abs(c - n * p) < 5 * sigma);
  }
}

TEST_CASE("reset rejects grids without room") {
  Rng rng(0);
  CHECK_THROWS_AS(reset(grid(1, 1, 1), TaskSpec::grasp(), rng), ConfigError);
  CHECK_THROWS_AS(reset(grid(0, 3, 0), TaskSpec::grasp(), rng), ConfigError);
  CHECK_THROWS_AS(reset(grid(3, 3, 1), TaskSpec::place({3, 0}), rng), ConfigError);
  CHECK_THROWS_AS(reset(grid(3, 3, 2), TaskSpec::shapes({{0, 0}}), rng), ConfigError);
}

TEST_CASE("place resets never start solved") {
  const GridConfig cfg = grid(2, 2, 2);
  const TaskSpec task = TaskSpec::place({1, 1});
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) CHECK_FALSE(task_success(reset(cfg, task, rng), task));
}

TEST_CASE("step: noop only advances the clock") {
  const GridConfig cfg = grid(5, 5, 1);
  const EnvState s = make_state({2, 2}, {{{0, 0}, false}}, 3);
  EnvState expected = s;
  expected.step_count = 4;
  CHECK(step(s, Action::kNoOp, cfg) == expected);
}

TEST_CASE("step: moves are clamped at the border") {
  const GridConfig cfg = grid(5, 5, 0);
  const EnvState s = make_state({0, 3}, {});
  CHECK(step(s, Action::kLeft, cfg).agent == Cell{0, 3});
  CHECK(step(s, Action::kRight, cfg).agent == Cell{1, 3});
  CHECK(step(s, Action::kUp, cfg).agent == Cell{0, 2});
  CHECK(step(s, Action::kDown, cfg).agent == Cell{0, 4});
  CHECK(step(make_state({4, 4}, {}), Action::kDown, cfg).agent == Cell{4, 4});
}

TEST_CASE("step: toggling on a block grasps it, and it travels with the agent") {
  const GridConfig cfg = grid(5, 5, 1);
  const EnvState s = make_state({1, 1}, {{{1, 1}, false}});
  const EnvState held = step(s, Action::kToggleGripper, cfg);
  CHECK(held.gripper_engaged);
  CHECK(held.blocks[0] == Block{{1, 1}, true});
  const EnvState moved = step(held, Action::kRight, cfg);
  CHECK(moved.blocks[0].cell == Cell{2, 1});
  const EnvState dropped = step(moved, Action::kToggleGripper, cfg);
  CHECK_FALSE(dropped.gripper_engaged);
  CHECK(dropped.blocks[0] == Block{{2, 1}, false});
}

TEST_CASE("step: toggling on an empty cell does nothing") {
  const GridConfig cfg = grid(3, 3, 1);
  const EnvState s = make_state({0, 0}, {{{2, 2}, false}});
  EnvState expected = s;
  expected.step_count = 1;
  CHECK(step(s, Action::kToggleGripper, cfg) == expected);
}

TEST_CASE("step: releasing onto an occupied cell is a no-op") {
  const GridConfig cfg = grid(3, 3, 2);
  const EnvState s = make_state({1, 1}, {{{1, 1}, true}, {{1, 1}, false}});
  REQUIRE(invariant_violations(s, cfg).empty());
  const EnvState next = step(s, Action::kToggleGripper, cfg);
  CHECK(next.gripper_engaged);
  CHECK(next.blocks[0].grasped);
}

TEST_CASE("step: grasps the loose block even while carrying over another") {
  const GridConfig cfg = grid(3, 3, 2);
  const EnvState s = make_state({0, 0}, {{{1, 0}, false}, {{2, 0}, false}});
  EnvState t = step(s, Action::kRight, cfg);
  t = step(t, Action::kToggleGripper, cfg);
  CHECK(t.blocks[0].grasped);
  t = step(t, Action::kRight, cfg);
  CHECK(t.blocks[0].cell == Cell{2, 0});
  CHECK(t.blocks[1] == Block{{2, 0}, false});
  CHECK(invariant_violations(t, cfg).empty());
}

TEST_CASE("step past the horizon throws") {
  const GridConfig cfg = grid(2, 2, 0, 2);
  EnvState s = make_state({0, 0}, {});
  s = step(s, Action::kNoOp, cfg);
  s = step(s, Action::kNoOp, cfg);
  CHECK_THROWS_AS(step(s, Action::kNoOp, cfg), EpisodeExhaustedError);
}

TEST_CASE("observe encodes agent, gripper and blocks in spawn order") {
  const GridConfig cfg = grid(5, 5, 2);
  const EnvState s = make_state({4, 0}, {{{0, 0}, false}, {{2, 4}, false}});
  const Observation expected{1.0, 0.0, 0, 0.0, 0.0, 0, 0.5, 1.0, 0};
  CHECK(observe(s, cfg) == expected);
  CHECK(observe(make_state({0, 0}, {}), grid(3, 3, 0)).size() == 3);
}

TEST_CASE("observe is injective over every state of a 3x3 world with one block") {
  const GridConfig cfg = grid(3, 3, 1);
  const auto states = testing::all_states(cfg);
  std::set<Observation> seen;
  for (const EnvState& s : states) {
    const Observation obs = observe(s, cfg);
    CHECK(obs.size() == 6);
    CHECK(std::all_of(obs.begin(), obs.end(), [](double v) { return v >= 0.0 && v <= 1.0; }));
    CHECK(state_from_observation(obs, cfg) == s);
    seen.insert(obs);
  }
  CHECK(seen.size() == states.size());
}

TEST_CASE("task predicates") {
  SUBCASE("grasp") {
    CHECK(task_success(make_state({1, 1}, {{{1, 1}, true}}), TaskSpec::grasp()));
    CHECK_FALSE(task_success(make_state({1, 1}, {{{1, 1}, false}}), TaskSpec::grasp()));
  }
  SUBCASE("place counts only released blocks") {
    const TaskSpec task = TaskSpec::place({2, 2});
    CHECK(task_success(make_state({0, 0}, {{{2, 2}, false}}), task));
    CHECK_FALSE(task_success(make_state({2, 2}, {{{2, 2}, true}}), task));
  }
  SUBCASE("hline needs contiguity") {
    const TaskSpec task = TaskSpec::hline();
    CHECK(task_success(make_state({0, 0}, {{{1, 2}, false}, {{2, 2}, false}, {{3, 2}, false}}), task));
    CHECK(task_success(make_state({0, 0}, {{{3, 2}, false}, {{1, 2}, false}, {{2, 2}, false}}), task));
    CHECK_FALSE(task_success(make_state({0, 0}, {{{1, 2}, false}, {{3, 2}, false}, {{4, 2}, false}}), task));
    CHECK_FALSE(task_success(make_state({1, 2}, {{{1, 2}, true}, {{2, 2}, false}}), task));
  }
  SUBCASE("vline is the transpose") {
    CHECK(task_success(make_state({0, 0}, {{{3, 1}, false}, {{3, 2}, false}}), TaskSpec::vline()));
    CHECK_FALSE(task_success(make_state({0, 0}, {{{3, 1}, false}, {{4, 2}, false}}), TaskSpec::vline()));
  }
  SUBCASE("shapes needs the exact cell set") {
    const TaskSpec task = TaskSpec::shapes({{0, 0}, {1, 0}});
    CHECK(task_success(make_state({3, 3}, {{{1, 0}, false}, {{0, 0}, false}}), task));
    CHECK_FALSE(task_success(make_state({3, 3}, {{{1, 0}, false}, {{0, 1}, false}}), task));
    CHECK_FALSE(task_success(make_state({0, 0}, {{{1, 0}, false}, {{0, 0}, true}}), task));
  }
}

TEST_CASE("hline and vline agree with brute-force placement enumeration on 4x4") {
  const GridConfig cfg = grid(4, 4, 2);
  int h_count = 0;
  int v_count = 0;
  for (int a = 0; a < 16; ++a) {
    for (int b = 0; b < 16; ++b) {
      if (a == b) continue;
      const Cell ca{a % 4, a / 4};
      const Cell cb{b % 4, b / 4};
      const bool h_oracle = ca.y == cb.y && std::abs(ca.x - cb.x) == 1;
      const bool v_oracle = ca.x == cb.x && std::abs(ca.y - cb.y) == 1;
      const EnvState s = make_state({0, 0}, {{ca, false}, {cb, false}});
      CHECK(task_success(s, TaskSpec::hline()) == h_oracle);
      CHECK(task_success(s, TaskSpec::vline()) == v_oracle);
      h_count += task_success(s, TaskSpec::hline());
      v_count += task_success(s, TaskSpec::vline());
    }
  }
  (void)cfg;
  CHECK(h_count == 4 * 3 * 2);
  CHECK(v_count == 4 * 3 * 2);
}

TEST_CASE("reward is sparse and terminal") {
  const GridConfig cfg = grid(3, 3, 1, 5);
  const EnvState on_block = make_state({1, 1}, {{{1, 1}, false}});
  const EnvState held = step(on_block, Action::kToggleGripper, cfg);
  const StepOutcome success = reward(on_block, Action::kToggleGripper, held, TaskSpec::grasp(), cfg);
  CHECK(success.reward == 1.0);
  CHECK(success.done);

  const EnvState moved = step(on_block, Action::kLeft, cfg);
  const StepOutcome plain = reward(on_block, Action::kLeft, moved, TaskSpec::grasp(), cfg);
  CHECK(plain.reward == 0.0);
  CHECK_FALSE(plain.done);

  const EnvState late = make_state({0, 0}, {{{2, 2}, false}}, 4);
  const StepOutcome timeout = reward(late, Action::kNoOp, step(late, Action::kNoOp, cfg),
                                     TaskSpec::grasp(), cfg);
  CHECK(timeout.reward == 0.0);
  CHECK(timeout.done);

  // Staying in an already solved state ends the episode without reward.
  const StepOutcome stay = reward(held, Action::kNoOp, step(held, Action::kNoOp, cfg),
                                  TaskSpec::grasp(), cfg);
  CHECK(stay.reward == 0.0);
  CHECK(stay.done);
}

TEST_CASE("render_ascii format") {
  CHECK(render_ascii(make_state({0, 0}, {}), grid(2, 2, 0)) == "A.\n..");
  CHECK(render_ascii(make_state({1, 0}, {{{1, 0}, true}, {{0, 1}, false}}), grid(2, 2, 2)) ==
        ".G\nb.");
  CHECK_THROWS_AS(parse_ascii("A.\n.x"), ArgumentError);
  CHECK_THROWS_AS(parse_ascii("..\n.."), ArgumentError);
}

TEST_CASE("parse_ascii recovers cell occupancy for every 3x3 state") {
  const GridConfig cfg = grid(3, 3, 1);
  for (const EnvState& s : testing::all_states(cfg)) {
    const AsciiGrid g = parse_ascii(render_ascii(s, cfg));
    CHECK(g.width == 3);
    CHECK(g.height == 3);
    CHECK(g.agent == s.agent);
    CHECK(g.carrying == s.gripper_engaged);
    std::vector<Cell> loose;
    for (const Block& b : s.blocks) {
      // A loose block under the agent is hidden by the agent glyph.
      if (!b.grasped && b.cell != s.agent) loose.push_back(b.cell);
    }
    std::sort(loose.begin(), loose.end(), [](Cell a, Cell b) {
      return std::tie(a.y, a.x) < std::tie(b.y, b.x);
    });
    CHECK(g.loose_blocks == loose);
  }
}

TEST_CASE("random walks preserve invariants, sparsity and conservation") {
  Rng rng(11);
  std::uniform_int_distribution<int> action(0, kNumActions - 1);
  std::uniform_int_distribution<int> dim(1, 6);
  const std::vector<TaskSpec> tasks{TaskSpec::grasp(), TaskSpec::hline(), TaskSpec::vline()};
  long long steps = 0;
  while (steps < 20000) {
    GridConfig cfg{dim(rng), dim(rng), 0, 25};
    cfg.n_blocks = std::uniform_int_distribution<int>(0, std::min(3, cfg.num_cells() - 1))(rng);
    const TaskSpec& task = tasks[steps % tasks.size()];
    EnvState s = reset(cfg, task, rng);
    double total = 0.0;
    while (s.step_count < cfg.horizon) {
      const Action a = action_from_index(action(rng));
      const EnvState next = step(s, a, cfg);
      REQUIRE(invariant_violations(next, cfg).empty());
      CHECK(step(s, a, cfg) == next);
      for (std::size_t b = 0; b < s.blocks.size(); ++b) {
        if (a != Action::kToggleGripper) CHECK(s.blocks[b].grasped == next.blocks[b].grasped);
      }
      const StepOutcome out = reward(s, a, next, task, cfg);
      total += out.reward;
      s = next;
      ++steps;
      if (out.done) break;
    }
    CHECK((total == 0.0 || total == 1.0));
  }
}

}  // namespace
}  // namespace abig
