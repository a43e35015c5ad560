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

#include "abig/training.h"

#include <chrono>

namespace abig {
namespace {

// Independent random streams per role inside one run.
enum Stream : std::uint64_t {
  kInitStream = 1,
  kModelingStream = 2,
  kModelFitStream = 3,
  kGuidingStream = 4,
  kBuilderFitStream = 5,
};

class Stopwatch {
 public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void count_provenance(const Buffer& buffer, FrameEvent& event) {
  for (const auto& t : buffer.tuples()) {
    (t.provenance == Provenance::kUniform ? event.uniform_tuples : event.planner_tuples) += 1;
  }
}

RunArtifacts train(const AbigConfig& config, Variant variant, const FrameObserver& observer) {
  config.validate();
  const int obs_dim = observation_dim(config.env.n_blocks);
  const int per_frame = config.n_collect / 2;

  Rng init_rng = make_rng(config.seed, kInitStream);
  Rng modeling_rng = make_rng(config.seed, kModelingStream);
  Rng model_fit_rng = make_rng(config.seed, kModelFitStream);
  Rng guiding_rng = make_rng(config.seed, kGuidingStream);
  Rng builder_fit_rng = make_rng(config.seed, kBuilderFitStream);

  BuilderPolicy builder{MessageConditionedNet::fresh(init_rng, obs_dim, config.vocab_size,
                                                     config.builder_bc.hidden)};
  std::optional<BuilderModel> model;

  RunArtifacts out{variant, config.seed, nn::params_hash(builder.net.params()),
                   builder, BuilderModel{builder.net}, {}, {}};
  auto emit = [&](FrameEvent e) {
    e.builder_hash = nn::params_hash(builder.net.params());
    e.model_hash = model ? nn::params_hash(model->net.params()) : 0;
    out.frames.push_back(e);
    if (observer) observer(e);
  };

  auto modeling_frame = [&](int iteration, FrameKind kind) {
    Stopwatch clock;
    FrameResult frame = run_modeling_frame(builder.net, config.env, config.tasks, per_frame,
                                           modeling_rng);
    FrameEvent event;
    event.iteration = iteration;
    event.kind = kind;
    event.tuples = frame.buffer.size();
    count_provenance(frame.buffer, event);
    FitReport report;
    model = fit_builder_model(frame.buffer.views(), obs_dim, config.vocab_size, config.model_bc,
                              model_fit_rng, &report);
    frame.buffer.flush();
    event.size_after_flush = frame.buffer.size();
    event.bc_loss = report.loss;
    event.wall_ms = clock.elapsed_ms();
    emit(event);
    return event;
  };

  for (int it = 0; it < config.n_iterations; ++it) {
    IterationMetrics metrics;
    const FrameEvent modeled = modeling_frame(it, FrameKind::kModeling);
    metrics.model_loss = modeled.bc_loss;
    metrics.d_a_size = modeled.tuples;

    Stopwatch clock;
    std::unique_ptr<MessageSource> architect;
    if (variant == Variant::kAbig) {
      architect = std::make_unique<PlannerMessages>(model->net, config.mcts, config.env,
                                                    config.reward_magnitude);
    } else {
      architect = std::make_unique<UniformMessages>(config.vocab_size);
    }
    FrameResult guided = run_guiding_frame(*architect, builder.net, config.env, config.tasks,
                                           per_frame, guiding_rng, config.reward_magnitude,
                                           config.success_filter);
    FrameEvent event;
    event.iteration = it;
    event.kind = FrameKind::kGuiding;
    event.tuples = guided.buffer.size();
    count_provenance(guided.buffer, event);
    event.success_rate = guided.success_rate();

    Buffer d_b(BufferRole::kGuiding);
    if (config.success_filter) {
      for (const EpisodeRecord& rec : guided.records) {
        if (!rec.success) continue;
        for (const StepRecord& s : rec.steps) {
          d_b.add({s.obs, s.message, s.action, architect->provenance()});
        }
      }
    } else {
      d_b = std::move(guided.buffer);
    }
    if (!d_b.empty()) {
      FitReport report;
      builder = self_imitate(builder, d_b.views(), config.builder_bc, builder_fit_rng, &report);
      event.bc_loss = report.loss;
    }
    d_b.flush();
    guided.buffer.flush();
    event.size_after_flush = d_b.size() + guided.buffer.size();
    event.wall_ms = clock.elapsed_ms();
    emit(event);

    metrics.builder_loss = event.bc_loss;
    metrics.guiding_success_rate = event.success_rate;
    metrics.d_b_size = event.tuples;
    out.iterations.push_back(metrics);
  }
  modeling_frame(config.n_iterations, FrameKind::kFinalModeling);

  out.builder = std::move(builder);
  out.model = std::move(*model);
  return out;
}

}  // namespace

void Buffer::append(const Buffer& other) {
  tuples_.insert(tuples_.end(), other.tuples_.begin(), other.tuples_.end());
}

std::vector<TupleView> Buffer::views() const {
  std::vector<TupleView> out;
  out.reserve(tuples_.size());
  for (const auto& t : tuples_) out.push_back({&t.obs, t.message, t.action});
  return out;
}

UniformMessages::UniformMessages(int vocab_size) : dist_(0, vocab_size - 1) {
  validate_vocab_size(vocab_size);
}

int UniformMessages::choose(const EnvState&, const TaskSpec&, Rng& rng) { return dist_(rng); }

PlannerMessages::PlannerMessages(const ActionModel& model, const MctsConfig& config,
                                 const GridConfig& env, double reward_magnitude)
    : memo_(model), planner_(memo_, config), env_(env), reward_magnitude_(reward_magnitude) {}

int PlannerMessages::choose(const EnvState& state, const TaskSpec& task, Rng& rng) {
  return planner_.plan(state, PlanningProblem{env_, ArchitectReward{task, reward_magnitude_}}, rng)
      .message;
}

EpisodeRecord run_episode(MessageSource& architect, const ActionModel& builder,
                          const GridConfig& env, const TaskSpec& task, ActMode builder_mode,
                          Rng& rng, Buffer* sink, double reward_magnitude) {
  const ArchitectReward reward_fn{task, reward_magnitude};
  EpisodeRecord record;
  record.task = task;
  EnvState state = reset(env, task, rng);
  for (;;) {
    const Observation obs = observe(state, env);
    const Message msg(architect.choose(state, task, rng), builder.vocab_size());
    const Action action = builder_act(builder, obs, msg, rng, builder_mode);
    EnvState next = step(state, action, env);
    const StepOutcome out = reward_fn(state, action, next, env);
    if (sink) sink->add({obs, msg.index(), action, architect.provenance()});
    record.steps.push_back({obs, msg.index(), action, out.reward});
    state = std::move(next);
    if (out.done) break;
  }
  record.success = task_success(state, task);
  return record;
}

std::optional<double> FrameResult::success_rate() const {
  if (episodes == 0) return std::nullopt;
  return static_cast<double>(successes) / episodes;
}

double FrameResult::mean_length() const {
  return episodes == 0 ? 0.0 : static_cast<double>(steps) / episodes;
}

FrameResult run_modeling_frame(const ActionModel& builder, const GridConfig& env,
                               const std::vector<TaskSpec>& tasks, int episodes, Rng& rng) {
  if (episodes < 1) throw ArgumentError("a modeling frame needs at least one episode");
  if (tasks.empty()) throw ArgumentError("no tasks given");
  UniformMessages uniform(builder.vocab_size());
  FrameResult result{Buffer(BufferRole::kModeling), 0, 0, 0, {}};
  for (int e = 0; e < episodes; ++e) {
    const EpisodeRecord rec = run_episode(uniform, builder, env, tasks[e % tasks.size()],
                                          ActMode::kSample, rng, &result.buffer);
    result.episodes += 1;
    result.successes += rec.success ? 1 : 0;
    result.steps += static_cast<long long>(rec.steps.size());
  }
  return result;
}

FrameResult run_guiding_frame(MessageSource& architect, const ActionModel& builder,
                              const GridConfig& env, const std::vector<TaskSpec>& tasks,
                              int episodes, Rng& rng, double reward_magnitude,
                              bool keep_records) {
  if (tasks.empty()) throw ArgumentError("no tasks given");
  FrameResult result{Buffer(BufferRole::kGuiding), 0, 0, 0, {}};
  for (int e = 0; e < episodes; ++e) {
    EpisodeRecord rec = run_episode(architect, builder, env, tasks[e % tasks.size()],
                                    ActMode::kSample, rng, &result.buffer, reward_magnitude);
    result.episodes += 1;
    result.successes += rec.success ? 1 : 0;
    result.steps += static_cast<long long>(rec.steps.size());
    if (keep_records) result.records.push_back(std::move(rec));
  }
  return result;
}

void AbigConfig::validate() const {
  if (n_iterations < 0) throw ConfigError("n_iterations must be >= 0");
  if (n_collect < 2 || n_collect % 2 != 0) {
    throw ConfigError("n_collect must be even and >= 2, got " + std::to_string(n_collect));
  }
  env.validate();
  if (tasks.empty()) throw ConfigError("at least one task is required");
  for (const TaskSpec& t : tasks) t.validate(env);
  validate_vocab_size(vocab_size);
  mcts.validate();
  for (const BcHyper* h : {&model_bc, &builder_bc}) {
    if (h->fit.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (h->fit.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(h->fit.adam.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  }
  if (!(reward_magnitude > 0.0)) throw ConfigError("reward magnitude must be > 0");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kAbig: return "abig";
    case Variant::kNoIntent: return "no_intent";
    case Variant::kRandom: return "random";
  }
  return "?";
}

std::string_view frame_kind_name(FrameKind k) {
  switch (k) {
    case FrameKind::kModeling: return "modeling";
    case FrameKind::kGuiding: return "guiding";
    case FrameKind::kFinalModeling: return "final_modeling";
  }
  return "?";
}

RunArtifacts abig_train(const AbigConfig& config, const FrameObserver& observer) {
  return train(config, Variant::kAbig, observer);
}

RunArtifacts train_no_intent(const AbigConfig& config, const FrameObserver& observer) {
  return train(config, Variant::kNoIntent, observer);
}

UniformActionModel random_builder_baseline(const AbigConfig& config) {
  config.validate();
  return UniformActionModel(config.vocab_size);
}

}  // namespace abig
