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

// The builder's message-conditioned policy, the architect's behavioral-cloning
// model of it, and the interface the planner uses to query either.
//
// Builder-side functions never take rewards: the builder only ever learns
// from (observation, message, action) tuples.

#ifndef ABIG_AGENTS_H_
#define ABIG_AGENTS_H_

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "abig/buildworld.h"
#include "abig/tinynn.h"

namespace abig {

inline constexpr int kMinVocab = 2;
inline constexpr int kMaxVocab = 72;

class Message {
 public:
  // Throws ArgumentError when index or vocab_size is out of range.
  Message(int index, int vocab_size);
  int index() const { return index_; }
  int vocab_size() const { return vocab_size_; }
  bool operator==(const Message&) const = default;

 private:
  int index_;
  int vocab_size_;
};

void validate_vocab_size(int vocab_size);

enum class ActMode { kSample, kArgmax };
std::string_view act_mode_name(ActMode mode);
ActMode parse_act_mode(std::string_view name);

using ActionProbs = std::array<double, kNumActions>;

// Lowest index wins ties.
Action argmax_action(const ActionProbs& probs);
Action sample_action(const ActionProbs& probs, Rng& rng);

// Anything that yields P(a | obs, m): a network, a scripted rule, or the
// uniform random builder.
class ActionModel {
 public:
  virtual ~ActionModel() = default;
  virtual int vocab_size() const = 0;
  virtual ActionProbs probs(const Observation& obs, int message) const = 0;
  // Row m is P(. | obs, m).
  virtual std::vector<ActionProbs> probs_all_messages(const Observation& obs) const;
};

// A network over obs ++ onehot(message) with kNumActions outputs.
class MessageConditionedNet : public ActionModel {
 public:
  MessageConditionedNet(nn::MlpParams params, int obs_dim, int vocab_size);
  static MessageConditionedNet fresh(Rng& rng, int obs_dim, int vocab_size,
                                     const std::vector<int>& hidden = {nn::kDefaultHidden,
                                                                        nn::kDefaultHidden});

  int vocab_size() const override { return vocab_size_; }
  int obs_dim() const { return obs_dim_; }
  ActionProbs probs(const Observation& obs, int message) const override;
  std::vector<ActionProbs> probs_all_messages(const Observation& obs) const override;

  const nn::MlpParams& params() const { return params_; }
  nn::MlpParams& mutable_params() { return params_; }
  std::vector<double> encode(const Observation& obs, int message) const;

 private:
  void check_obs(const Observation& obs) const;

  nn::MlpParams params_;
  int obs_dim_;
  int vocab_size_;
};

// pi_B: acts in the environment and is refit by self-imitation.
struct BuilderPolicy {
  MessageConditionedNet net;
};

// pi~_B: the architect's estimate of pi_B, refit from scratch each modeling
// frame.
struct BuilderModel {
  MessageConditionedNet net;
};

// Uniform over actions regardless of input.
class UniformActionModel : public ActionModel {
 public:
  explicit UniformActionModel(int vocab_size) : vocab_size_(vocab_size) {}
  int vocab_size() const override { return vocab_size_; }
  ActionProbs probs(const Observation&, int) const override;

 private:
  int vocab_size_;
};

// Deterministic rule (obs, message) -> action, as a one-hot distribution.
class ScriptedActionModel : public ActionModel {
 public:
  using Rule = std::function<Action(const Observation&, int)>;
  ScriptedActionModel(int vocab_size, Rule rule)
      : vocab_size_(vocab_size), rule_(std::move(rule)) {}
  int vocab_size() const override { return vocab_size_; }
  ActionProbs probs(const Observation& obs, int message) const override;

 private:
  int vocab_size_;
  Rule rule_;
};

// Caches probs_all_messages per observation. Only valid while the wrapped
// model is frozen, i.e. for the length of one guiding frame or evaluation.
class MemoizedActionModel : public ActionModel {
 public:
  explicit MemoizedActionModel(const ActionModel& inner) : inner_(inner) {}
  int vocab_size() const override { return inner_.vocab_size(); }
  ActionProbs probs(const Observation& obs, int message) const override;
  std::vector<ActionProbs> probs_all_messages(const Observation& obs) const override;
  std::size_t cache_size() const { return cache_.size(); }

 private:
  struct VecHash {
    std::size_t operator()(const Observation& v) const;
  };
  const std::vector<ActionProbs>& lookup(const Observation& obs) const;

  const ActionModel& inner_;
  mutable std::unordered_map<Observation, std::vector<ActionProbs>, VecHash> cache_;
};

// Draws (sample) or picks (argmax) the builder's action. The probability
// vector comes from the builder itself; no reward enters.
Action builder_act(const ActionModel& builder, const Observation& obs, Message msg,
                   Rng& rng, ActMode mode);

struct TupleView {
  const Observation* obs;
  int message;
  Action action;
};

// Builds a (obs ++ onehot(m) -> a) dataset for `net`'s input layout.
nn::Batch make_batch(const MessageConditionedNet& net, std::span<const TupleView> tuples);

struct BcHyper {
  nn::FitConfig fit;
  std::vector<int> hidden = {nn::kDefaultHidden, nn::kDefaultHidden};
};

struct FitReport {
  double loss = 0.0;
};

// Fresh initialization, then behavioral cloning on the modeling buffer.
// Throws ArgumentError on an empty buffer.
BuilderModel fit_builder_model(std::span<const TupleView> d_a, int obs_dim, int vocab_size,
                               const BcHyper& hyper, Rng& rng, FitReport* report = nullptr);

// Warm-started behavioral cloning of the builder on its own guided
// interactions. Throws ArgumentError on an empty buffer.
BuilderPolicy self_imitate(const BuilderPolicy& policy, std::span<const TupleView> d_b,
                           const BcHyper& hyper, Rng& rng, FitReport* report = nullptr);

}  // namespace abig

#endif  // ABIG_AGENTS_H_
