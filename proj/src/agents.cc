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

#include "abig/agents.h"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace abig {

void validate_vocab_size(int vocab_size) {
  if (vocab_size < kMinVocab || vocab_size > kMaxVocab) {
    throw ConfigError("vocab_size must be in [" + std::to_string(kMinVocab) + ", " +
                      std::to_string(kMaxVocab) + "], got " + std::to_string(vocab_size));
  }
}

Message::Message(int index, int vocab_size) : index_(index), vocab_size_(vocab_size) {
  if (vocab_size < kMinVocab || vocab_size > kMaxVocab) {
    throw ArgumentError("vocab_size out of range");
  }
  if (index < 0 || index >= vocab_size) throw ArgumentError("message index out of range");
}

std::string_view act_mode_name(ActMode mode) {
  return mode == ActMode::kSample ? "sample" : "argmax";
}

ActMode parse_act_mode(std::string_view name) {
  if (name == "sample") return ActMode::kSample;
  if (name == "argmax") return ActMode::kArgmax;
  throw ConfigError("unknown action mode '" + std::string(name) + "'");
}

Action argmax_action(const ActionProbs& probs) {
  return action_from_index(
      static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()));
}

Action sample_action(const ActionProbs& probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  for (int a = 0; a < kNumActions; ++a) {
    u -= probs[a];
    if (u < 0.0) return action_from_index(a);
  }
  // Rounding left a sliver of mass; fall back to the last supported action.
  for (int a = kNumActions - 1; a >= 0; --a) {
    if (probs[a] > 0.0) return action_from_index(a);
  }
  return Action::kNoOp;
}

std::vector<ActionProbs> ActionModel::probs_all_messages(const Observation& obs) const {
  std::vector<ActionProbs> out(vocab_size());
  for (int m = 0; m < vocab_size(); ++m) out[m] = probs(obs, m);
  return out;
}

MessageConditionedNet::MessageConditionedNet(nn::MlpParams params, int obs_dim, int vocab_size)
    : params_(std::move(params)), obs_dim_(obs_dim), vocab_size_(vocab_size) {
  if (params_.layers.empty() || params_.in_dim() != obs_dim + vocab_size ||
      params_.n_out() != kNumActions) {
    throw ArgumentError("network dimensions do not match obs_dim + vocab_size -> " +
                        std::to_string(kNumActions));
  }
}

MessageConditionedNet MessageConditionedNet::fresh(Rng& rng, int obs_dim, int vocab_size,
                                                   const std::vector<int>& hidden) {
  return MessageConditionedNet(nn::init_params(rng, obs_dim + vocab_size, kNumActions, hidden),
                               obs_dim, vocab_size);
}

void MessageConditionedNet::check_obs(const Observation& obs) const {
  if (static_cast<int>(obs.size()) != obs_dim_) {
    throw ArgumentError("observation length " + std::to_string(obs.size()) +
                        " does not match network obs_dim " + std::to_string(obs_dim_));
  }
}

std::vector<double> MessageConditionedNet::encode(const Observation& obs, int message) const {
  check_obs(obs);
  if (message < 0 || message >= vocab_size_) throw ArgumentError("message index out of range");
  std::vector<double> x(obs.begin(), obs.end());
  x.resize(obs_dim_ + vocab_size_, 0.0);
  x[obs_dim_ + message] = 1.0;
  return x;
}

ActionProbs MessageConditionedNet::probs(const Observation& obs, int message) const {
  const std::vector<double> p = nn::forward_probs(params_, encode(obs, message));
  ActionProbs out;
  std::copy(p.begin(), p.end(), out.begin());
  return out;
}

std::vector<ActionProbs> MessageConditionedNet::probs_all_messages(const Observation& obs) const {
  check_obs(obs);
  Eigen::MatrixXd inputs = Eigen::MatrixXd::Zero(vocab_size_, obs_dim_ + vocab_size_);
  for (int m = 0; m < vocab_size_; ++m) {
    for (int j = 0; j < obs_dim_; ++j) inputs(m, j) = obs[j];
    inputs(m, obs_dim_ + m) = 1.0;
  }
  const Eigen::MatrixXd p = nn::forward_probs(params_, inputs);
  std::vector<ActionProbs> out(vocab_size_);
  for (int m = 0; m < vocab_size_; ++m) {
    for (int a = 0; a < kNumActions; ++a) out[m][a] = p(m, a);
  }
  return out;
}

ActionProbs UniformActionModel::probs(const Observation&, int) const {
  ActionProbs p;
  p.fill(1.0 / kNumActions);
  return p;
}

ActionProbs ScriptedActionModel::probs(const Observation& obs, int message) const {
  ActionProbs p{};
  p[action_index(rule_(obs, message))] = 1.0;
  return p;
}

std::size_t MemoizedActionModel::VecHash::operator()(const Observation& v) const {
  std::size_t h = 1469598103934665603ull;
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    h ^= bits + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

const std::vector<ActionProbs>& MemoizedActionModel::lookup(const Observation& obs) const {
  auto it = cache_.find(obs);
  if (it == cache_.end()) it = cache_.emplace(obs, inner_.probs_all_messages(obs)).first;
  return it->second;
}

ActionProbs MemoizedActionModel::probs(const Observation& obs, int message) const {
  return lookup(obs).at(message);
}

std::vector<ActionProbs> MemoizedActionModel::probs_all_messages(const Observation& obs) const {
  return lookup(obs);
}

Action builder_act(const ActionModel& builder, const Observation& obs, Message msg, Rng& rng,
                   ActMode mode) {
  if (msg.vocab_size() != builder.vocab_size()) {
    throw ArgumentError("message vocabulary does not match the builder");
  }
  const ActionProbs p = builder.probs(obs, msg.index());
  return mode == ActMode::kArgmax ? argmax_action(p) : sample_action(p, rng);
}

nn::Batch make_batch(const MessageConditionedNet& net, std::span<const TupleView> tuples) {
  nn::Batch batch;
  const int width = net.obs_dim() + net.vocab_size();
  batch.inputs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tuples.size()), width);
  batch.targets.reserve(tuples.size());
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    const std::vector<double> x = net.encode(*tuples[i].obs, tuples[i].message);
    for (int j = 0; j < width; ++j) batch.inputs(static_cast<Eigen::Index>(i), j) = x[j];
    batch.targets.push_back(action_index(tuples[i].action));
  }
  return batch;
}

BuilderModel fit_builder_model(std::span<const TupleView> d_a, int obs_dim, int vocab_size,
                               const BcHyper& hyper, Rng& rng, FitReport* report) {
  if (d_a.empty()) throw ArgumentError("cannot fit a builder model on an empty buffer");
  MessageConditionedNet net = MessageConditionedNet::fresh(rng, obs_dim, vocab_size, hyper.hidden);
  const nn::Batch data = make_batch(net, d_a);
  nn::FitResult fit = nn::bc_fit(data, net.params(), hyper.fit, rng);
  if (report) report->loss = fit.loss;
  return BuilderModel{MessageConditionedNet(std::move(fit.params), obs_dim, vocab_size)};
}

BuilderPolicy self_imitate(const BuilderPolicy& policy, std::span<const TupleView> d_b,
                           const BcHyper& hyper, Rng& rng, FitReport* report) {
  if (d_b.empty()) throw ArgumentError("cannot self-imitate on an empty buffer");
  const nn::Batch data = make_batch(policy.net, d_b);
  nn::FitResult fit = nn::bc_fit(data, policy.net.params(), hyper.fit, rng);
  if (report) report->loss = fit.loss;
  return BuilderPolicy{MessageConditionedNet(std::move(fit.params), policy.net.obs_dim(),
                                             policy.net.vocab_size())};
}

}  // namespace abig
