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

// Iterated interaction frames: the architect models the builder under
// uniform messages, then guides it with a planner while the builder
// self-imitates the guided interactions.

#ifndef ABIG_TRAINING_H_
#define ABIG_TRAINING_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "abig/agents.h"
#include "abig/buildworld.h"
#include "abig/mcts.h"

namespace abig {

// Which message source produced a tuple.
enum class Provenance { kUniform, kPlanner };

struct InteractionTuple {
  Observation obs;
  int message = 0;
  Action action = Action::kNoOp;
  Provenance provenance = Provenance::kUniform;
};

enum class BufferRole { kModeling, kGuiding };  // D_A, D_B

class Buffer {
 public:
  explicit Buffer(BufferRole role) : role_(role) {}

  BufferRole role() const { return role_; }
  void add(InteractionTuple t) { tuples_.push_back(std::move(t)); }
  void append(const Buffer& other);
  void flush() { tuples_.clear(); }
  bool empty() const { return tuples_.empty(); }
  std::size_t size() const { return tuples_.size(); }
  const std::vector<InteractionTuple>& tuples() const { return tuples_; }
  std::vector<TupleView> views() const;

 private:
  BufferRole role_;
  std::vector<InteractionTuple> tuples_;
};

// Chooses the message sent at each step.
class MessageSource {
 public:
  virtual ~MessageSource() = default;
  virtual int choose(const EnvState& state, const TaskSpec& task, Rng& rng) = 0;
  virtual Provenance provenance() const = 0;
};

class UniformMessages : public MessageSource {
 public:
  explicit UniformMessages(int vocab_size);
  int choose(const EnvState&, const TaskSpec&, Rng& rng) override;
  Provenance provenance() const override { return Provenance::kUniform; }

 private:
  std::uniform_int_distribution<int> dist_;
};

// pi_A := MCTS(r, pi~_B, P_E), replanned at every step from the true state.
class PlannerMessages : public MessageSource {
 public:
  PlannerMessages(const ActionModel& model, const MctsConfig& config, const GridConfig& env,
                  double reward_magnitude = 1.0);
  int choose(const EnvState& state, const TaskSpec& task, Rng& rng) override;
  Provenance provenance() const override { return Provenance::kPlanner; }

 private:
  MemoizedActionModel memo_;
  MctsPlanner planner_;
  GridConfig env_;
  double reward_magnitude_;
};

struct StepRecord {
  Observation obs;
  int message = 0;
  Action action = Action::kNoOp;
  double reward = 0.0;
};

struct EpisodeRecord {
  TaskSpec task;
  std::vector<StepRecord> steps;
  bool success = false;  // task satisfied in the final state
};

// Runs one episode to success or horizon. When `sink` is set every
// (obs, message, action) tuple is appended to it. Rewards are only written
// to the returned record, never to the buffer.
EpisodeRecord run_episode(MessageSource& architect, const ActionModel& builder,
                          const GridConfig& env, const TaskSpec& task, ActMode builder_mode,
                          Rng& rng, Buffer* sink, double reward_magnitude = 1.0);

struct FrameResult {
  Buffer buffer;
  int episodes = 0;
  int successes = 0;
  long long steps = 0;
  std::vector<EpisodeRecord> records;
  std::optional<double> success_rate() const;
  double mean_length() const;
};

// Tasks rotate per episode: episode e uses tasks[e % tasks.size()].
FrameResult run_modeling_frame(const ActionModel& builder, const GridConfig& env,
                               const std::vector<TaskSpec>& tasks, int episodes, Rng& rng);

FrameResult run_guiding_frame(MessageSource& architect, const ActionModel& builder,
                              const GridConfig& env, const std::vector<TaskSpec>& tasks,
                              int episodes, Rng& rng, double reward_magnitude = 1.0,
                              bool keep_records = false);

struct AbigConfig {
  int n_iterations = 10;
  int n_collect = 100;  // episodes per iteration, half per frame
  GridConfig env;
  std::vector<TaskSpec> tasks{TaskSpec::grasp()};
  int vocab_size = 6;
  BcHyper model_bc;
  BcHyper builder_bc;
  MctsConfig mcts;
  std::uint64_t seed = 0;
  // Self-imitate only tuples from successful guided episodes.
  bool success_filter = false;
  // Positive factor applied to every reward the architect observes.
  double reward_magnitude = 1.0;

  // Throws ConfigError.
  void validate() const;
};

enum class Variant { kAbig, kNoIntent, kRandom };
std::string_view variant_name(Variant v);

enum class FrameKind { kModeling, kGuiding, kFinalModeling };
std::string_view frame_kind_name(FrameKind k);

struct FrameEvent {
  int iteration = 0;
  FrameKind kind = FrameKind::kModeling;
  std::size_t tuples = 0;              // buffer size before the flush
  std::size_t size_after_flush = 0;
  std::size_t uniform_tuples = 0;
  std::size_t planner_tuples = 0;
  double bc_loss = 0.0;
  std::optional<double> success_rate;  // guiding frames only
  std::uint64_t builder_hash = 0;      // after the frame's update
  std::uint64_t model_hash = 0;
  double wall_ms = 0.0;
};

struct IterationMetrics {
  double model_loss = 0.0;
  double builder_loss = 0.0;
  std::optional<double> guiding_success_rate;
  std::size_t d_a_size = 0;
  std::size_t d_b_size = 0;
};

struct RunArtifacts {
  Variant variant = Variant::kAbig;
  std::uint64_t seed = 0;
  std::uint64_t initial_builder_hash = 0;
  BuilderPolicy builder;
  BuilderModel model;
  std::vector<IterationMetrics> iterations;
  std::vector<FrameEvent> frames;
};

using FrameObserver = std::function<void(const FrameEvent&)>;

RunArtifacts abig_train(const AbigConfig& config, const FrameObserver& observer = {});

// Same loop, but the guiding frame sends uniform random messages.
RunArtifacts train_no_intent(const AbigConfig& config, const FrameObserver& observer = {});

// Uniform random actions, never trained.
UniformActionModel random_builder_baseline(const AbigConfig& config);

}  // namespace abig

#endif  // ABIG_TRAINING_H_
