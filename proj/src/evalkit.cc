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

#include "abig/evalkit.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>

namespace abig {
namespace {

// Applies `a` ignoring the horizon; oracles work on layouts, not episodes.
EnvState layout_step(EnvState s, Action a, const GridConfig& config) {
  GridConfig unbounded = config;
  unbounded.horizon = 1;
  s.step_count = 0;
  EnvState next = step(s, a, unbounded);
  next.step_count = 0;
  return next;
}

double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log2(x);
  }
  return h;
}

// All pairwise-distinct ungrasped layouts, in lexicographic cell order.
void for_each_layout(const GridConfig& config,
                     const std::function<void(const EnvState&)>& visit) {
  const int n_cells = config.num_cells();
  std::vector<int> chosen;
  std::vector<bool> used(n_cells, false);
  std::function<void()> recurse = [&]() {
    if (static_cast<int>(chosen.size()) == config.n_blocks + 1) {
      EnvState s;
      auto to_cell = [&](int i) { return Cell{i % config.width, i / config.width}; };
      s.agent = to_cell(chosen[0]);
      for (int b = 1; b <= config.n_blocks; ++b) s.blocks.push_back({to_cell(chosen[b]), false});
      visit(s);
      return;
    }
    for (int c = 0; c < n_cells; ++c) {
      if (used[c]) continue;
      used[c] = true;
      chosen.push_back(c);
      recurse();
      chosen.pop_back();
      used[c] = false;
    }
  };
  recurse();
}

}  // namespace

EvalReport evaluate(MessageSource& architect, const ActionModel& builder, const GridConfig& env,
                    const TaskSpec& task, int episodes, ActMode mode, std::uint64_t seed,
                    std::vector<EpisodeRecord>* records) {
  if (episodes < 1) throw ArgumentError("evaluation needs at least one episode");
  Rng rng = make_rng(seed, 0xE7A1);
  EvalReport report;
  report.task = std::string(task_kind_name(task.kind));
  report.episodes = episodes;
  report.mode = mode;
  report.seed = seed;
  int successes = 0;
  long long steps = 0;
  for (int e = 0; e < episodes; ++e) {
    EpisodeRecord rec = run_episode(architect, builder, env, task, mode, rng, nullptr);
    successes += rec.success ? 1 : 0;
    steps += static_cast<long long>(rec.steps.size());
    if (records) records->push_back(std::move(rec));
  }
  report.success_rate = static_cast<double>(successes) / episodes;
  report.mean_length = static_cast<double>(steps) / episodes;
  return report;
}

EvalReport transfer_eval(const BuilderPolicy& builder, const BuilderModel& model,
                         const GridConfig& env, const TaskSpec& target, const MctsConfig& mcts,
                         int episodes, ActMode mode, std::uint64_t seed,
                         std::vector<EpisodeRecord>* records) {
  if (builder.net.obs_dim() != observation_dim(env.n_blocks) ||
      model.net.obs_dim() != builder.net.obs_dim()) {
    throw ArgumentError("builder/model observation size does not match the target world");
  }
  PlannerMessages architect(model.net, mcts, env);
  return evaluate(architect, builder.net, env, target, episodes, mode, seed, records);
}

std::optional<int> bfs_oracle(const EnvState& start, const TaskSpec& task,
                              const GridConfig& config, std::size_t state_limit) {
  EnvState origin = start;
  origin.step_count = 0;
  if (task_success(origin, task)) return 0;
  std::unordered_map<std::string, int> dist;
  std::deque<EnvState> frontier{origin};
  dist.emplace(state_key(origin), 0);
  while (!frontier.empty()) {
    const EnvState s = std::move(frontier.front());
    frontier.pop_front();
    const int d = dist.at(state_key(s));
    for (int a = 0; a < kNumActions; ++a) {
      EnvState next = layout_step(s, action_from_index(a), config);
      if (!dist.emplace(state_key(next), d + 1).second) continue;
      if (task_success(next, task)) return d + 1;
      if (dist.size() > state_limit) {
        throw OracleLimitError("BFS exceeded " + std::to_string(state_limit) + " states");
      }
      frontier.push_back(std::move(next));
    }
  }
  return std::nullopt;
}

std::vector<double> value_iteration(const TabularMdp& mdp, double gamma, double tol,
                                    int max_sweeps) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ArgumentError("value iteration needs gamma in [0, 1)");
  std::vector<double> v(mdp.n_states, 0.0);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double residual = 0.0;
    std::vector<double> updated(mdp.n_states, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.terminal[s]) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.n_actions; ++a) {
        const int k = s * mdp.n_actions + a;
        best = std::max(best, mdp.reward[k] + gamma * v[mdp.next[k]]);
      }
      updated[s] = best;
      residual = std::max(residual, std::abs(best - v[s]));
    }
    v = std::move(updated);
    if (residual < tol) return v;
  }
  throw NumericError("value iteration did not converge in " + std::to_string(max_sweeps) +
                     " sweeps");
}

double bellman_residual(const TabularMdp& mdp, const std::vector<double>& values, double gamma) {
  double worst = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.terminal[s]) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int k = s * mdp.n_actions + a;
      best = std::max(best, mdp.reward[k] + gamma * values[mdp.next[k]]);
    }
    worst = std::max(worst, std::abs(best - values[s]));
  }
  return worst;
}

int EnumeratedWorld::id_of(const EnvState& s) const {
  EnvState copy = s;
  copy.step_count = 0;
  auto it = index.find(state_key(copy));
  if (it == index.end()) throw ArgumentError("state not in the enumerated world");
  return it->second;
}

EnumeratedWorld enumerate_world(const GridConfig& config, const TaskSpec& task,
                                std::size_t state_limit) {
  config.validate();
  task.validate(config);
  EnumeratedWorld world;
  std::deque<int> frontier;
  auto intern = [&](const EnvState& s) {
    auto [it, inserted] = world.index.emplace(state_key(s), static_cast<int>(world.states.size()));
    if (inserted) {
      if (world.states.size() >= state_limit) {
        throw OracleLimitError("world has more than " + std::to_string(state_limit) + " states");
      }
      world.states.push_back(s);
      frontier.push_back(it->second);
    }
    return it->second;
  };
  for_each_layout(config, [&](const EnvState& s) { intern(s); });

  TabularMdp& mdp = world.mdp;
  mdp.n_actions = kNumActions;
  std::vector<std::array<int, kNumActions>> next_ids;
  while (!frontier.empty()) {
    const int id = frontier.front();
    frontier.pop_front();
    if (static_cast<int>(next_ids.size()) <= id) next_ids.resize(id + 1);
    for (int a = 0; a < kNumActions; ++a) {
      next_ids[id][a] = intern(layout_step(world.states[id], action_from_index(a), config));
    }
  }
  mdp.n_states = static_cast<int>(world.states.size());
  mdp.next.resize(static_cast<std::size_t>(mdp.n_states) * kNumActions);
  mdp.reward.assign(mdp.next.size(), 0.0);
  mdp.terminal.resize(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    mdp.terminal[s] = task_success(world.states[s], task);
    for (int a = 0; a < kNumActions; ++a) {
      const int k = s * kNumActions + a;
      mdp.next[k] = next_ids[s][a];
      if (!mdp.terminal[s] && task_success(world.states[next_ids[s][a]], task)) {
        mdp.reward[k] = 1.0;
      }
    }
  }
  return world;
}

std::optional<int> greedy_episode_length(const EnumeratedWorld& world,
                                         const std::vector<double>& values, double gamma,
                                         const EnvState& start, int max_steps) {
  const TabularMdp& mdp = world.mdp;
  int s = world.id_of(start);
  for (int t = 0; t <= max_steps; ++t) {
    if (mdp.terminal[s]) return t;
    int best_a = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int k = s * mdp.n_actions + a;
      const double q = mdp.reward[k] + gamma * values[mdp.next[k]];
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    s = mdp.next[s * mdp.n_actions + best_a];
  }
  return std::nullopt;
}

ProtocolStats protocol_stats(std::span<const InteractionTuple> rollouts, int vocab_size) {
  if (rollouts.empty()) throw ArgumentError("protocol statistics need at least one tuple");
  std::vector<std::vector<double>> joint(vocab_size, std::vector<double>(kNumActions, 0.0));
  for (const InteractionTuple& t : rollouts) {
    if (t.message < 0 || t.message >= vocab_size) throw ArgumentError("message outside vocabulary");
    joint[t.message][action_index(t.action)] += 1.0;
  }
  return protocol_stats_from_joint(joint);
}

ProtocolStats protocol_stats_from_joint(const std::vector<std::vector<double>>& joint) {
  if (joint.empty() || joint[0].empty()) throw ArgumentError("empty joint table");
  ProtocolStats st;
  st.vocab_size = static_cast<int>(joint.size());
  st.n_actions = static_cast<int>(joint[0].size());
  double total = 0.0;
  for (const auto& row : joint) {
    if (static_cast<int>(row.size()) != st.n_actions) throw ArgumentError("ragged joint table");
    for (double c : row) {
      if (c < 0.0) throw ArgumentError("negative joint entry");
      total += c;
    }
  }
  if (!(total > 0.0)) throw ArgumentError("joint table has no mass");

  st.message_marginal.assign(st.vocab_size, 0.0);
  st.action_marginal.assign(st.n_actions, 0.0);
  for (int m = 0; m < st.vocab_size; ++m) {
    for (int a = 0; a < st.n_actions; ++a) {
      st.message_marginal[m] += joint[m][a] / total;
      st.action_marginal[a] += joint[m][a] / total;
    }
  }
  st.conditional.resize(st.vocab_size);
  for (int m = 0; m < st.vocab_size; ++m) {
    const double row_mass = std::accumulate(joint[m].begin(), joint[m].end(), 0.0);
    if (row_mass <= 0.0) continue;
    ++st.support;
    std::vector<double> row(st.n_actions);
    for (int a = 0; a < st.n_actions; ++a) row[a] = joint[m][a] / row_mass;
    st.conditional_entropy_bits += st.message_marginal[m] * entropy_bits(row);
    for (int a = 0; a < st.n_actions; ++a) {
      const double p = joint[m][a] / total;
      if (p > 0.0) {
        st.mutual_information_bits +=
            p * std::log2(p / (st.message_marginal[m] * st.action_marginal[a]));
      }
    }
    st.conditional[m] = std::move(row);
  }
  st.message_entropy_bits = entropy_bits(st.message_marginal);
  st.action_entropy_bits = entropy_bits(st.action_marginal);
  st.mutual_information_bits = std::max(0.0, st.mutual_information_bits);
  return st;
}

}  // namespace abig
