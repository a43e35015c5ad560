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

// Brute-force oracles shared by the test suites. These deliberately avoid the
// library's own enumeration and search helpers.

#ifndef ABIG_TESTS_ORACLES_H_
#define ABIG_TESTS_ORACLES_H_

#include <cmath>
#include <functional>
#include <algorithm>
#include <map>
#include <vector>

#include "abig/buildworld.h"

namespace abig::testing {

// Every well-formed state of the world (step_count 0): each agent cell, each
// block cell tuple with distinct loose cells, and each way of having one
// block held at the agent's cell.
inline std::vector<EnvState> all_states(const GridConfig& config) {
  std::vector<EnvState> out;
  const int n = config.num_cells();
  std::vector<int> cells(config.n_blocks, 0);
  auto cell = [&](int i) { return Cell{i % config.width, i / config.width}; };
  std::function<void(int)> fill = [&](int b) {
    if (b == config.n_blocks) {
      for (int agent = 0; agent < n; ++agent) {
        for (int held = -1; held < config.n_blocks; ++held) {
          EnvState s;
          s.agent = cell(agent);
          bool ok = true;
          for (int k = 0; k < config.n_blocks; ++k) {
            const bool grasped = k == held;
            if (grasped && cells[k] != agent) ok = false;
            for (int j = 0; j < k; ++j) {
              if (j != held && k != held && cells[j] == cells[k]) ok = false;
            }
            s.blocks.push_back({cell(cells[k]), grasped});
          }
          s.gripper_engaged = held >= 0;
          if (ok) out.push_back(s);
        }
      }
      return;
    }
    for (int c = 0; c < n; ++c) {
      cells[b] = c;
      fill(b + 1);
    }
  };
  fill(0);
  return out;
}

// Reset layouts: distinct cells for agent and every block, nothing held.
inline std::vector<EnvState> initial_layouts(const GridConfig& config) {
  std::vector<EnvState> out;
  for (const EnvState& s : all_states(config)) {
    if (s.gripper_engaged) continue;
    bool distinct = true;
    for (const Block& b : s.blocks) distinct = distinct && b.cell != s.agent;
    if (distinct) out.push_back(s);
  }
  return out;
}

// Exact probability that a uniformly random builder reaches a success state
// within `horizon` steps, averaged over the uniform reset distribution
// Meant for Grasp and Place, where no reset layout starts solved.
inline double random_builder_success_probability(const GridConfig& config, const TaskSpec& task) {
  std::map<std::string, double> within;  // P(success within k steps)
  const std::vector<EnvState> states = all_states(config);
  GridConfig free = config;
  free.horizon = 1;
  for (int k = 1; k <= config.horizon; ++k) {
    std::map<std::string, double> next;
    for (const EnvState& s : states) {
      double p = 0.0;
      for (int a = 0; a < kNumActions; ++a) {
        EnvState t = step(s, action_from_index(a), free);
        t.step_count = 0;
        if (task_success(t, task)) {
          p += 1.0 / kNumActions;
        } else {
          auto it = within.find(state_key(t));
          p += (it == within.end() ? 0.0 : it->second) / kNumActions;
        }
      }
      next[state_key(s)] = p;
    }
    within = std::move(next);
  }
  double total = 0.0;
  int count = 0;
  for (const EnvState& s : initial_layouts(config)) {
    // Only Place starts can be solved, and reset redraws those.
    if (task_success(s, task)) continue;
    total += within[state_key(s)];
    ++count;
  }
  return total / count;
}

// Depth-limited Q values of every message under a deterministic builder
// (`rule` maps state and message to an action), by full-width enumeration.
// Reward 1 on the first transition into success, episodes end on success or
// when the horizon runs out.
inline double enumerate_value(const EnvState& s, int depth, const GridConfig& config,
                              const TaskSpec& task, int vocab, double gamma,
                              const std::function<Action(const EnvState&, int)>& rule);

inline std::vector<double> enumerate_q(const EnvState& s, int depth, const GridConfig& config,
                                       const TaskSpec& task, int vocab, double gamma,
                                       const std::function<Action(const EnvState&, int)>& rule) {
  std::vector<double> q(vocab, 0.0);
  for (int m = 0; m < vocab; ++m) {
    const EnvState next = step(s, rule(s, m), config);
    if (!task_success(s, task) && task_success(next, task)) {
      q[m] = 1.0;
    } else if (!task_success(next, task) && next.step_count < config.horizon) {
      q[m] = gamma * enumerate_value(next, depth - 1, config, task, vocab, gamma, rule);
    }
  }
  return q;
}

inline double enumerate_value(const EnvState& s, int depth, const GridConfig& config,
                              const TaskSpec& task, int vocab, double gamma,
                              const std::function<Action(const EnvState&, int)>& rule) {
  if (depth == 0) return 0.0;
  const std::vector<double> q = enumerate_q(s, depth, config, task, vocab, gamma, rule);
  double best = 0.0;
  for (double v : q) best = std::max(best, v);
  return best;
}

// Binomial standard deviation of an empirical frequency.
inline double binomial_sigma(double p, int n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace abig::testing

#endif  // ABIG_TESTS_ORACLES_H_
