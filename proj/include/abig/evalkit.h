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

// Evaluation of frozen architect/builder pairs plus ground-truth oracles
// (breadth-first search and value iteration over the enumerated world) and
// statistics of the emergent message -> action protocol.

#ifndef ABIG_EVALKIT_H_
#define ABIG_EVALKIT_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "abig/agents.h"
#include "abig/buildworld.h"
#include "abig/mcts.h"
#include "abig/training.h"

namespace abig {

struct EvalReport {
  std::string task;
  int episodes = 0;
  double success_rate = 0.0;
  double mean_length = 0.0;
  ActMode mode = ActMode::kSample;
  std::uint64_t seed = 0;
};

// Frozen policies, per-step guidance from `architect`. Throws ArgumentError
// when episodes < 1. Episode trajectories are appended to `records` if set.
EvalReport evaluate(MessageSource& architect, const ActionModel& builder, const GridConfig& env,
                    const TaskSpec& task, int episodes, ActMode mode, std::uint64_t seed,
                    std::vector<EpisodeRecord>* records = nullptr);

// The architect replans with the existing builder model against the new
// task's reward; nothing is refit.
EvalReport transfer_eval(const BuilderPolicy& builder, const BuilderModel& model,
                         const GridConfig& env, const TaskSpec& target, const MctsConfig& mcts,
                         int episodes, ActMode mode, std::uint64_t seed,
                         std::vector<EpisodeRecord>* records = nullptr);

inline constexpr std::size_t kDefaultStateLimit = 1'000'000;

// Minimal number of builder actions from `state` to a success state under
// direct action control; 0 if already solved, nullopt if unreachable.
// Ignores the horizon. Throws OracleLimitError past `state_limit` states.
std::optional<int> bfs_oracle(const EnvState& state, const TaskSpec& task,
                              const GridConfig& config,
                              std::size_t state_limit = kDefaultStateLimit);

struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<int> next;       // [s * n_actions + a]
  std::vector<double> reward;  // [s * n_actions + a]
  std::vector<bool> terminal;  // absorbing with value 0
};

inline constexpr int kMaxValueSweeps = 100'000;

// V(s) <- max_a [r(s,a) + gamma V(s')] until the max residual < tol.
// Throws ArgumentError for gamma outside [0, 1), NumericError if the sweep
// budget runs out.
std::vector<double> value_iteration(const TabularMdp& mdp, double gamma, double tol,
                                    int max_sweeps = kMaxValueSweeps);

// Largest |V(s) - max_a [r + gamma V(s')]| over non-terminal states.
double bellman_residual(const TabularMdp& mdp, const std::vector<double>& values, double gamma);

// Every layout reachable from a reset of `config`, as a tabular MDP with the
// sparse task reward. Success states are terminal. step_count is dropped.
struct EnumeratedWorld {
  TabularMdp mdp;
  std::vector<EnvState> states;
  std::unordered_map<std::string, int> index;  // state_key -> state id

  int id_of(const EnvState& s) const;
};
EnumeratedWorld enumerate_world(const GridConfig& config, const TaskSpec& task,
                                std::size_t state_limit = kDefaultStateLimit);

// Length of the episode obtained by acting greedily (lowest-index ties) on
// `values` from `start`, or nullopt if it does not reach success within
// `max_steps`.
std::optional<int> greedy_episode_length(const EnumeratedWorld& world,
                                         const std::vector<double>& values, double gamma,
                                         const EnvState& start, int max_steps);

struct ProtocolStats {
  int vocab_size = 0;
  int n_actions = 0;
  // conditional[m][a] = P^(a | m); rows of unseen messages are absent.
  std::vector<std::optional<std::vector<double>>> conditional;
  std::vector<double> message_marginal;
  std::vector<double> action_marginal;
  double mutual_information_bits = 0.0;
  double conditional_entropy_bits = 0.0;  // H(A | M)
  double message_entropy_bits = 0.0;
  double action_entropy_bits = 0.0;
  int support = 0;  // messages observed at least once
};

// Throws ArgumentError on empty input.
ProtocolStats protocol_stats(std::span<const InteractionTuple> rollouts, int vocab_size);
// From a joint count/probability table, rows = messages, cols = actions.
ProtocolStats protocol_stats_from_joint(const std::vector<std::vector<double>>& joint);

}  // namespace abig

#endif  // ABIG_EVALKIT_H_
