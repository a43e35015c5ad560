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

#include "abig/buildworld.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace abig {
namespace {

constexpr int kMaxResetAttempts = 100000;

bool same_row_contiguous(std::vector<Cell> cells) {
  if (cells.empty()) return true;
  std::sort(cells.begin(), cells.end(),
            [](Cell a, Cell b) { return a.x < b.x; });
  for (size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].y != cells[0].y) return false;
    if (cells[i].x != cells[0].x + static_cast<int>(i)) return false;
  }
  return true;
}

Cell transposed(Cell c) { return {c.y, c.x}; }

double normalized(int v, int dim) {
  return dim > 1 ? static_cast<double>(v) / (dim - 1) : 0.0;
}

int denormalized(double v, int dim) {
  return dim > 1 ? static_cast<int>(std::lround(v * (dim - 1))) : 0;
}

}  // namespace

void GridConfig::validate() const {
  if (width < 1 || height < 1) {
    throw ConfigError("grid must be at least 1x1, got " + std::to_string(width) +
                      "x" + std::to_string(height));
  }
  if (n_blocks < 0) throw ConfigError("n_blocks must be >= 0");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (num_cells() < n_blocks + 1) {
    throw ConfigError("grid " + std::to_string(width) + "x" +
                      std::to_string(height) + " has no room for the agent and " +
                      std::to_string(n_blocks) + " blocks");
  }
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::kUp: return "up";
    case Action::kDown: return "down";
    case Action::kLeft: return "left";
    case Action::kRight: return "right";
    case Action::kToggleGripper: return "toggle";
    case Action::kNoOp: return "noop";
  }
  return "?";
}

std::string_view task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kGrasp: return "grasp";
    case TaskKind::kPlace: return "place";
    case TaskKind::kHLine: return "hline";
    case TaskKind::kVLine: return "vline";
    case TaskKind::kShapes: return "shapes";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  for (TaskKind k : {TaskKind::kGrasp, TaskKind::kPlace, TaskKind::kHLine,
                     TaskKind::kVLine, TaskKind::kShapes}) {
    if (task_kind_name(k) == name) return k;
  }
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

void TaskSpec::validate(const GridConfig& config) const {
  const bool needs_target = kind == TaskKind::kPlace;
  const bool needs_shape = kind == TaskKind::kShapes;
  if (needs_target != place_target.has_value()) {
    throw ConfigError(needs_target ? "place task requires a target cell"
                                   : "only place tasks carry a target cell");
  }
  if (needs_target && !config.contains(*place_target)) {
    throw ConfigError("place target outside the grid");
  }
  if (!needs_shape && !shape_cells.empty()) {
    throw ConfigError("only shapes tasks carry shape cells");
  }
  if (needs_shape) {
    if (static_cast<int>(shape_cells.size()) != config.n_blocks) {
      throw ConfigError("shape needs exactly n_blocks = " +
                        std::to_string(config.n_blocks) + " cells");
    }
    std::vector<Cell> sorted = shape_cells;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("shape cells must be distinct");
    }
    for (Cell c : shape_cells) {
      if (!config.contains(c)) throw ConfigError("shape cell outside the grid");
    }
  }
}

EnvState reset(const GridConfig& config, const TaskSpec& task, Rng& rng) {
  config.validate();
  task.validate(config);
  const int n_cells = config.num_cells();
  std::vector<int> cells(n_cells);
  for (int attempt = 0; attempt < kMaxResetAttempts; ++attempt) {
    std::iota(cells.begin(), cells.end(), 0);
    // Partial Fisher-Yates: the first n_blocks + 1 slots are a uniformly
    // drawn ordered sample without replacement.
    for (int i = 0; i <= config.n_blocks; ++i) {
      std::uniform_int_distribution<int> pick(i, n_cells - 1);
      std::swap(cells[i], cells[pick(rng)]);
    }
    auto to_cell = [&](int idx) { return Cell{idx % config.width, idx / config.width}; };
    EnvState state;
    state.agent = to_cell(cells[0]);
    state.blocks.reserve(config.n_blocks);
    for (int b = 0; b < config.n_blocks; ++b) {
      state.blocks.push_back({to_cell(cells[b + 1]), false});
    }
    if (task.kind != TaskKind::kPlace || !task_success(state, task)) return state;
  }
  throw ConfigError("could not draw an initial layout that is not already solved");
}

EnvState step(const EnvState& state, Action action, const GridConfig& config) {
  if (state.step_count >= config.horizon) {
    throw EpisodeExhaustedError("step called at horizon " +
                                std::to_string(config.horizon));
  }
  EnvState next = state;
  next.step_count += 1;

  auto grasped = std::find_if(next.blocks.begin(), next.blocks.end(),
                              [](const Block& b) { return b.grasped; });
  auto loose_at = [&](Cell c) {
    return std::find_if(next.blocks.begin(), next.blocks.end(),
                        [c](const Block& b) { return !b.grasped && b.cell == c; });
  };

  Cell target = next.agent;
  switch (action) {
    case Action::kUp: target.y -= 1; break;
    case Action::kDown: target.y += 1; break;
    case Action::kLeft: target.x -= 1; break;
    case Action::kRight: target.x += 1; break;
    case Action::kToggleGripper:
      if (!next.gripper_engaged) {
        auto block = loose_at(next.agent);
        if (block != next.blocks.end()) {
          block->grasped = true;
          next.gripper_engaged = true;
        }
      } else if (loose_at(next.agent) == next.blocks.end()) {
        grasped->grasped = false;
        next.gripper_engaged = false;
      }
      return next;
    case Action::kNoOp:
      return next;
  }
  if (config.contains(target)) {
    next.agent = target;
    if (grasped != next.blocks.end()) grasped->cell = target;
  }
  return next;
}

Observation observe(const EnvState& state, const GridConfig& config) {
  Observation obs;
  obs.reserve(observation_dim(static_cast<int>(state.blocks.size())));
  obs.push_back(normalized(state.agent.x, config.width));
  obs.push_back(normalized(state.agent.y, config.height));
  obs.push_back(state.gripper_engaged ? 1.0 : 0.0);
  for (const Block& b : state.blocks) {
    obs.push_back(normalized(b.cell.x, config.width));
    obs.push_back(normalized(b.cell.y, config.height));
    obs.push_back(b.grasped ? 1.0 : 0.0);
  }
  return obs;
}

EnvState state_from_observation(const Observation& obs, const GridConfig& config,
                                int step_count) {
  if (obs.size() < 3 || (obs.size() - 3) % 3 != 0) {
    throw ArgumentError("observation length " + std::to_string(obs.size()) +
                        " is not 3 + 3*n_blocks");
  }
  EnvState s;
  s.agent = {denormalized(obs[0], config.width), denormalized(obs[1], config.height)};
  s.gripper_engaged = obs[2] > 0.5;
  for (size_t i = 3; i < obs.size(); i += 3) {
    s.blocks.push_back({{denormalized(obs[i], config.width),
                         denormalized(obs[i + 1], config.height)},
                        obs[i + 2] > 0.5});
  }
  s.step_count = step_count;
  return s;
}

bool task_success(const EnvState& state, const TaskSpec& task) {
  const auto& blocks = state.blocks;
  auto any_grasped = std::any_of(blocks.begin(), blocks.end(),
                                 [](const Block& b) { return b.grasped; });
  switch (task.kind) {
    case TaskKind::kGrasp:
      return any_grasped;
    case TaskKind::kPlace:
      return std::any_of(blocks.begin(), blocks.end(), [&](const Block& b) {
        return !b.grasped && b.cell == *task.place_target;
      });
    case TaskKind::kHLine:
    case TaskKind::kVLine: {
      if (any_grasped) return false;
      std::vector<Cell> cells;
      for (const Block& b : blocks) {
        cells.push_back(task.kind == TaskKind::kHLine ? b.cell : transposed(b.cell));
      }
      return same_row_contiguous(std::move(cells));
    }
    case TaskKind::kShapes: {
      std::vector<Cell> loose;
      for (const Block& b : blocks) {
        if (!b.grasped) loose.push_back(b.cell);
      }
      std::vector<Cell> shape = task.shape_cells;
      std::sort(loose.begin(), loose.end());
      std::sort(shape.begin(), shape.end());
      return loose == shape;
    }
  }
  return false;
}

StepOutcome reward(const EnvState& prev, Action /*action*/, const EnvState& next,
                   const TaskSpec& task, const GridConfig& config) {
  const bool now = task_success(next, task);
  if (now && !task_success(prev, task)) return {1.0, true};
  return {0.0, now || next.step_count >= config.horizon};
}

std::string render_ascii(const EnvState& state, const GridConfig& config) {
  std::vector<std::string> rows(config.height, std::string(config.width, '.'));
  for (const Block& b : state.blocks) {
    if (!b.grasped) rows[b.cell.y][b.cell.x] = 'b';
  }
  rows[state.agent.y][state.agent.x] = state.gripper_engaged ? 'G' : 'A';
  std::string out;
  for (int y = 0; y < config.height; ++y) {
    if (y > 0) out += '\n';
    out += rows[y];
  }
  return out;
}

AsciiGrid parse_ascii(std::string_view text) {
  AsciiGrid grid;
  std::vector<std::string> rows;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) rows.push_back(line);
  if (rows.empty() || rows[0].empty()) throw ArgumentError("empty grid text");
  grid.height = static_cast<int>(rows.size());
  grid.width = static_cast<int>(rows[0].size());
  int agents = 0;
  for (int y = 0; y < grid.height; ++y) {
    if (static_cast<int>(rows[y].size()) != grid.width) {
      throw ArgumentError("ragged grid row " + std::to_string(y));
    }
    for (int x = 0; x < grid.width; ++x) {
      switch (rows[y][x]) {
        case '.': break;
        case 'b': grid.loose_blocks.push_back({x, y}); break;
        case 'G': grid.carrying = true; [[fallthrough]];
        case 'A': grid.agent = {x, y}; ++agents; break;
        default:
          throw ArgumentError(std::string("unexpected grid character '") +
                              rows[y][x] + "'");
      }
    }
  }
  if (agents != 1) throw ArgumentError("grid must contain exactly one agent");
  return grid;
}

std::vector<std::string> invariant_violations(const EnvState& state,
                                              const GridConfig& config) {
  std::vector<std::string> out;
  if (!config.contains(state.agent)) out.push_back("agent out of bounds");
  if (static_cast<int>(state.blocks.size()) != config.n_blocks) {
    out.push_back("block count changed");
  }
  int n_grasped = 0;
  for (size_t i = 0; i < state.blocks.size(); ++i) {
    const Block& b = state.blocks[i];
    if (!config.contains(b.cell)) out.push_back("block " + std::to_string(i) + " out of bounds");
    if (b.grasped) {
      ++n_grasped;
      if (b.cell != state.agent) out.push_back("grasped block not under agent");
    }
    for (size_t j = i + 1; j < state.blocks.size(); ++j) {
      const Block& o = state.blocks[j];
      if (!b.grasped && !o.grasped && b.cell == o.cell) {
        out.push_back("blocks " + std::to_string(i) + " and " + std::to_string(j) +
                      " overlap");
      }
    }
  }
  if (n_grasped > 1) out.push_back("more than one block grasped");
  if (state.gripper_engaged != (n_grasped == 1)) {
    out.push_back("gripper flag disagrees with grasped blocks");
  }
  if (state.step_count < 0 || state.step_count > config.horizon) {
    out.push_back("step_count outside [0, horizon]");
  }
  return out;
}

std::string state_key(const EnvState& state) {
  std::string key;
  key.reserve(5 + 5 * state.blocks.size());
  auto put16 = [&](int v) {
    key.push_back(static_cast<char>(v & 0xff));
    key.push_back(static_cast<char>((v >> 8) & 0xff));
  };
  put16(state.agent.x);
  put16(state.agent.y);
  key.push_back(state.gripper_engaged ? 1 : 0);
  for (const Block& b : state.blocks) {
    put16(b.cell.x);
    put16(b.cell.y);
    key.push_back(b.grasped ? 1 : 0);
  }
  return key;
}

}  // namespace abig
