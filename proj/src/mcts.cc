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

#include "abig/mcts.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>

namespace abig {
namespace {

constexpr std::size_t kNoNode = static_cast<std::size_t>(-1);

// Nodes are shared by every path reaching the same (state, depth). An edge
// keeps its immediate rewards and how often it led to each successor; its
// value is recomputed from the successors' current values. On a tree this is
// the plain mean return.
struct Edge {
  long long visits = 0;
  double reward_sum = 0.0;
  std::vector<std::pair<std::size_t, long long>> successors;
};

struct Node {
  EnvState state;
  int depth = 0;
  long long edge_visits = 0;
  double rollout_sum = 0.0;
  long long rollouts = 0;
  double value = 0.0;
  std::vector<ActionProbs> model_probs;  // per message
  std::vector<Edge> edges;
};

struct PathStep {
  std::size_t node;
  int message;
  double reward;
  std::size_t successor;
};

// Packs (state, depth) into 64 bits when the world is small enough. Larger
// worlds fall back to the byte key from state_key.
class NodeIndex {
 public:
  NodeIndex(const GridConfig& env, int max_depth) : env_(env) {
    int depth_bits = 1;
    while ((1LL << depth_bits) <= max_depth) ++depth_bits;
    while ((1LL << cell_bits_) < static_cast<long long>(env.num_cells())) ++cell_bits_;
    packed_ = depth_bits + (env.n_blocks + 1) * (cell_bits_ + 1) <= 64;
  }

  std::optional<std::size_t> find(const EnvState& s, int depth) const {
    if (packed_) {
      auto it = packed_index_.find(pack(s, depth));
      if (it == packed_index_.end()) return std::nullopt;
      return it->second;
    }
    auto it = string_index_.find(string_key(s, depth));
    if (it == string_index_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const EnvState& s, int depth, std::size_t id) {
    if (packed_) {
      packed_index_.emplace(pack(s, depth), id);
    } else {
      string_index_.emplace(string_key(s, depth), id);
    }
  }

 private:
  std::uint64_t pack(const EnvState& s, int depth) const {
    std::uint64_t key = static_cast<std::uint64_t>(depth);
    auto push = [&](std::uint64_t v, int bits) { key = (key << bits) | v; };
    push(static_cast<std::uint64_t>(s.agent.y * env_.width + s.agent.x), cell_bits_);
    push(s.gripper_engaged ? 1 : 0, 1);
    for (const Block& b : s.blocks) {
      push(static_cast<std::uint64_t>(b.cell.y * env_.width + b.cell.x), cell_bits_);
      push(b.grasped ? 1 : 0, 1);
    }
    return key;
  }

  static std::string string_key(const EnvState& s, int depth) {
    std::string key = state_key(s);
    key.push_back(static_cast<char>(depth & 0xff));
    key.push_back(static_cast<char>((depth >> 8) & 0xff));
    return key;
  }

  const GridConfig& env_;
  int cell_bits_ = 1;
  bool packed_ = false;
  std::unordered_map<std::uint64_t, std::size_t> packed_index_;
  std::unordered_map<std::string, std::size_t> string_index_;
};

}  // namespace

void MctsConfig::validate() const {
  if (simulations < 1) throw ConfigError("mcts simulations must be >= 1");
  if (max_depth < 1) throw ConfigError("mcts max_depth must be >= 1");
  if (!(uct_c >= 0.0)) throw ConfigError("uct_c must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
}

double uct_score(const ChildStats& child, long long parent_visits, double uct_c) {
  if (child.visits == 0) return std::numeric_limits<double>::infinity();
  return child.mean() + uct_c * std::sqrt(std::log(static_cast<double>(parent_visits)) /
                                          static_cast<double>(child.visits));
}

StepOutcome ArchitectReward::operator()(const EnvState& prev, Action a, const EnvState& next,
                                        const GridConfig& config) const {
  StepOutcome out = reward(prev, a, next, task, config);
  out.reward *= magnitude;
  return out;
}

MctsPlanner::MctsPlanner(const ActionModel& model, MctsConfig config)
    : model_(model), config_(config) {
  config_.validate();
}

PlanResult MctsPlanner::plan(const EnvState& root_state, const PlanningProblem& problem,
                             Rng& rng) const {
  const int vocab = model_.vocab_size();
  const GridConfig& env = problem.env;
  const double bound = problem.reward.magnitude;
  if (!(bound > 0.0)) throw ArgumentError("reward magnitude must be positive");
  std::uniform_int_distribution<int> uniform_message(0, vocab - 1);
  const double gamma = config_.gamma;

  std::vector<Node> nodes;
  NodeIndex index(env, config_.max_depth);
  auto add_node = [&](const EnvState& s, int depth) {
    Node n;
    n.state = s;
    n.depth = depth;
    n.model_probs = model_.probs_all_messages(observe(s, env));
    n.edges.assign(vocab, Edge{});
    nodes.push_back(std::move(n));
    index.insert(s, depth, nodes.size() - 1);
    return nodes.size() - 1;
  };
  auto draw = [&](const ActionProbs& p) {
    return config_.builder_mode == ActMode::kArgmax ? argmax_action(p) : sample_action(p, rng);
  };
  auto rollout = [&](EnvState s, int depth) {
    double ret = 0.0;
    double discount = 1.0;
    for (; depth < config_.max_depth; ++depth) {
      const Action a = draw(model_.probs(observe(s, env), uniform_message(rng)));
      EnvState next = step(s, a, env);
      const StepOutcome out = problem.reward(s, a, next, env);
      ret += discount * out.reward / bound;
      if (out.done) break;
      discount *= gamma;
      s = std::move(next);
    }
    return ret;
  };
  auto edge_value = [&](const Edge& e) {
    double future = 0.0;
    for (const auto& [succ, count] : e.successors) future += static_cast<double>(count) * nodes[succ].value;
    return (e.reward_sum + gamma * future) / static_cast<double>(e.visits);
  };
  auto refresh_value = [&](Node& n) {
    double total = n.rollout_sum;
    for (const Edge& e : n.edges) {
      if (e.visits > 0) total += edge_value(e) * static_cast<double>(e.visits);
    }
    const long long samples = n.rollouts + n.edge_visits;
    n.value = samples > 0 ? total / static_cast<double>(samples) : 0.0;
  };

  add_node(root_state, 0);
  std::vector<PathStep> path;
  for (int sim = 0; sim < config_.simulations; ++sim) {
    path.clear();
    std::size_t current = 0;
    while (nodes[current].depth < config_.max_depth) {
      const Node& node = nodes[current];
      int best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      const double log_parent = std::log(static_cast<double>(node.edge_visits));
      for (int m = 0; m < vocab; ++m) {
        const Edge& edge = node.edges[m];
        if (edge.visits == 0) {
          best = m;
          break;
        }
        const double score = edge_value(edge) +
                             config_.uct_c * std::sqrt(log_parent / static_cast<double>(edge.visits));
        if (score > best_score) {
          best_score = score;
          best = m;
        }
      }
      const Action a = draw(node.model_probs[best]);
      EnvState next = step(node.state, a, env);
      const StepOutcome out = problem.reward(node.state, a, next, env);
      if (out.done) {
        path.push_back({current, best, out.reward / bound, kNoNode});
        break;
      }
      const int next_depth = node.depth + 1;
      if (const auto existing = index.find(next, next_depth)) {
        path.push_back({current, best, out.reward / bound, *existing});
        current = *existing;
        continue;
      }
      const std::size_t created = add_node(next, next_depth);
      path.push_back({current, best, out.reward / bound, created});
      if (next_depth < config_.max_depth) {
        nodes[created].rollout_sum = rollout(std::move(next), next_depth);
        nodes[created].rollouts = 1;
        refresh_value(nodes[created]);
      }
      break;
    }
    for (auto p = path.rbegin(); p != path.rend(); ++p) {
      Node& node = nodes[p->node];
      Edge& edge = node.edges[p->message];
      edge.visits += 1;
      edge.reward_sum += p->reward;
      if (p->successor != kNoNode) {
        auto it = std::find_if(edge.successors.begin(), edge.successors.end(),
                               [&](const auto& sc) { return sc.first == p->successor; });
        if (it == edge.successors.end()) {
          edge.successors.emplace_back(p->successor, 1);
        } else {
          it->second += 1;
        }
      }
      node.edge_visits += 1;
      refresh_value(node);
    }
  }

  PlanResult result;
  result.tree_nodes = nodes.size();
  for (const Edge& e : nodes[0].edges) {
    result.root_children.push_back(
        ChildStats{e.visits, e.visits > 0 ? edge_value(e) * static_cast<double>(e.visits) : 0.0});
  }
  for (int m = 1; m < vocab; ++m) {
    if (result.root_children[m].visits > result.root_children[result.message].visits) {
      result.message = m;
    }
  }
  return result;
}

Message mcts_plan(const EnvState& state, const TaskSpec& task, const GridConfig& env,
                  const ActionModel& model, const MctsConfig& config, Rng& rng) {
  MctsPlanner planner(model, config);
  const PlanResult r = planner.plan(state, PlanningProblem{env, ArchitectReward{task, 1.0}}, rng);
  return Message(r.message, model.vocab_size());
}

}  // namespace abig
