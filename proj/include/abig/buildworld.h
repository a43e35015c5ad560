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

// BuildWorld: a deterministic 2D grid with one builder agent, a gripper and
// a fixed number of blocks. Only the builder acts; tasks are judged by sparse
// success predicates that only the architect can evaluate.

#ifndef ABIG_BUILDWORLD_H_
#define ABIG_BUILDWORLD_H_

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abig/common.h"

namespace abig {

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

struct GridConfig {
  int width = 5;
  int height = 5;
  int n_blocks = 1;
  int horizon = 40;

  int num_cells() const { return width * height; }
  bool contains(Cell c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
  }
  // Throws ConfigError.
  void validate() const;
  bool operator==(const GridConfig&) const = default;
};

struct Block {
  Cell cell;
  bool grasped = false;
  bool operator==(const Block&) const = default;
};

struct EnvState {
  Cell agent;
  bool gripper_engaged = false;
  // Fixed spawn order for the whole episode.
  std::vector<Block> blocks;
  int step_count = 0;
  bool operator==(const EnvState&) const = default;
};

enum class Action : int {
  kUp = 0,
  kDown = 1,
  kLeft = 2,
  kRight = 3,
  kToggleGripper = 4,
  kNoOp = 5,
};
inline constexpr int kNumActions = 6;

inline constexpr Action action_from_index(int i) { return static_cast<Action>(i); }
inline constexpr int action_index(Action a) { return static_cast<int>(a); }
std::string_view action_name(Action a);

enum class TaskKind { kGrasp, kPlace, kHLine, kVLine, kShapes };

struct TaskSpec {
  TaskKind kind = TaskKind::kGrasp;
  std::optional<Cell> place_target;  // Place only
  std::vector<Cell> shape_cells;     // Shapes only, |cells| == n_blocks

  static TaskSpec grasp() { return {TaskKind::kGrasp, std::nullopt, {}}; }
  static TaskSpec place(Cell target) { return {TaskKind::kPlace, target, {}}; }
  static TaskSpec hline() { return {TaskKind::kHLine, std::nullopt, {}}; }
  static TaskSpec vline() { return {TaskKind::kVLine, std::nullopt, {}}; }
  static TaskSpec shapes(std::vector<Cell> cells) {
    return {TaskKind::kShapes, std::nullopt, std::move(cells)};
  }

  // Throws ConfigError when the parameters do not fit `config`.
  void validate(const GridConfig& config) const;
  bool operator==(const TaskSpec&) const = default;
};

std::string_view task_kind_name(TaskKind kind);
// Accepts "grasp", "place", "hline", "vline", "shapes". Throws ConfigError.
TaskKind parse_task_kind(std::string_view name);

// Flat vector [agent_x, agent_y, gripper, (block_x, block_y, grasped)...],
// coordinates normalized by (dim - 1) so every entry lies in [0, 1].
using Observation = std::vector<double>;

inline int observation_dim(int n_blocks) { return 3 + 3 * n_blocks; }

// Uniform over pairwise-distinct (agent, block...) layouts. For Place tasks,
// layouts that already satisfy the task are redrawn.
EnvState reset(const GridConfig& config, const TaskSpec& task, Rng& rng);

// Deterministic transition. Throws EpisodeExhaustedError at the horizon.
EnvState step(const EnvState& state, Action action, const GridConfig& config);

Observation observe(const EnvState& state, const GridConfig& config);

// Inverse of observe() for well-formed observations.
EnvState state_from_observation(const Observation& obs, const GridConfig& config,
                                int step_count = 0);

bool task_success(const EnvState& state, const TaskSpec& task);

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
};

// Sparse unit reward on the first transition into a success state. The
// episode ends on success or when next.step_count reaches the horizon.
StepOutcome reward(const EnvState& prev, Action action, const EnvState& next,
                   const TaskSpec& task, const GridConfig& config);

// 'A' agent, 'G' agent carrying a block, 'b' block, '.' empty. Rows top to
// bottom by increasing y, newline separated, no trailing newline.
std::string render_ascii(const EnvState& state, const GridConfig& config);

struct AsciiGrid {
  int width = 0;
  int height = 0;
  Cell agent;
  bool carrying = false;
  std::vector<Cell> loose_blocks;  // row-major order
};
// Parses the render_ascii format. Throws ArgumentError on malformed text.
AsciiGrid parse_ascii(std::string_view text);

// Returns human-readable descriptions of every violated state invariant.
std::vector<std::string> invariant_violations(const EnvState& state,
                                              const GridConfig& config);

// Compact byte key identifying a state up to step_count. Used for hashing
// in planners and oracles.
std::string state_key(const EnvState& state);

}  // namespace abig

#endif  // ABIG_BUILDWORLD_H_
