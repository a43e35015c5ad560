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

// A small fixed-topology feed-forward network with a softmax head, trained
// by behavioral cloning (mean cross-entropy) with Adam. Double precision
// throughout so that finite-difference checks are meaningful.

#ifndef ABIG_TINYNN_H_
#define ABIG_TINYNN_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "abig/common.h"

namespace abig::nn {

inline constexpr int kDefaultHidden = 126;

// y = x * weight + bias, weight is fan_in x fan_out.
struct Dense {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

// ReLU after every layer but the last; the last layer produces logits.
struct MlpParams {
  std::vector<Dense> layers;

  int in_dim() const { return static_cast<int>(layers.front().weight.rows()); }
  int n_out() const { return static_cast<int>(layers.back().weight.cols()); }
  std::size_t num_parameters() const;
  bool all_finite() const;
  bool same_shape(const MlpParams& other) const;

  // Views over every tensor in a fixed order: weight then bias, per layer.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

bool operator==(const MlpParams& a, const MlpParams& b);

// Glorot-uniform weights, zero biases.
MlpParams init_params(Rng& rng, int in_dim, int n_out,
                      const std::vector<int>& hidden = {kDefaultHidden, kDefaultHidden});
MlpParams zeros_like(const MlpParams& params);

// Row i of the result holds the softmax over the outputs for input row i.
// Throws NumericError on non-finite inputs.
Eigen::MatrixXd forward_probs(const MlpParams& params, const Eigen::MatrixXd& inputs);
std::vector<double> forward_probs(const MlpParams& params, std::span<const double> input);

inline constexpr double kLogClamp = 1e-12;

// -log(probs[target]); the probability is clamped to kLogClamp first.
double cross_entropy(std::span<const double> probs, int target);

struct Batch {
  Eigen::MatrixXd inputs;  // one sample per row
  std::vector<int> targets;

  std::size_t size() const { return targets.size(); }
  // Throws ArgumentError.
  void validate(int in_dim, int n_out) const;
  static Batch from_rows(const std::vector<std::vector<double>>& rows,
                         std::vector<int> targets);
};

double mean_loss(const MlpParams& params, const Batch& batch);

struct LossAndGrad {
  double loss = 0.0;
  MlpParams grad;
};
LossAndGrad loss_and_grad(const MlpParams& params, const Batch& batch);
MlpParams grad(const MlpParams& params, const Batch& batch);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig hyper;
  MlpParams m;
  MlpParams v;
  long long t = 0;

  static AdamState fresh(const MlpParams& like, const AdamConfig& hyper);
};

void adam_step(MlpParams& params, const MlpParams& gradient, AdamState& state);

struct FitConfig {
  int epochs = 50;
  int batch_size = 64;
  AdamConfig adam;
};

struct FitResult {
  MlpParams params;
  double loss = 0.0;  // mean loss over the whole dataset after fitting
  long long updates = 0;
};

// Mini-batch Adam on the mean cross-entropy, reshuffling every epoch. A fresh
// optimizer state is created per call. Throws ArgumentError on empty data.
FitResult bc_fit(const Batch& data, MlpParams params, const FitConfig& config,
                 Rng& rng);

// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over all
// parameters, numeric by central differences with step 1e-6.
double grad_check(const MlpParams& params, const Batch& batch);
double grad_check(const MlpParams& params, const Batch& batch,
                  const MlpParams& analytic);

// FNV-1a over shapes and raw parameter bytes.
std::uint64_t params_hash(const MlpParams& params);

// Checkpoint container, see README for the schema.
std::string to_checkpoint_json(const MlpParams& params, std::string_view name);
MlpParams from_checkpoint_json(std::string_view text);
void save_checkpoint(const MlpParams& params, std::string_view name,
                     const std::string& path);
MlpParams load_checkpoint(const std::string& path);

}  // namespace abig::nn

#endif  // ABIG_TINYNN_H_
