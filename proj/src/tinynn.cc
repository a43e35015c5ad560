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

#include "abig/tinynn.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace abig::nn {
namespace {

constexpr double kFiniteDiffStep = 1e-6;
constexpr char kCheckpointFormat[] = "abig-mlp-v1";

// Activations kept for backprop: acts[0] is the input, acts[i] the output of
// layer i-1 after ReLU (or logits for the last layer).
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> acts;
};

ForwardTrace forward_trace(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  ForwardTrace trace;
  trace.acts.reserve(params.layers.size() + 1);
  trace.acts.push_back(inputs);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Dense& layer = params.layers[l];
    Eigen::MatrixXd z = trace.acts.back() * layer.weight;
    z.rowwise() += layer.bias.transpose();
    if (l + 1 < params.layers.size()) z = z.cwiseMax(0.0);
    trace.acts.push_back(std::move(z));
  }
  return trace;
}

void softmax_rows(Eigen::MatrixXd& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

double mean_clamped_nll(const Eigen::MatrixXd& probs, const std::vector<int>& targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    total -= std::log(std::max(probs(static_cast<Eigen::Index>(i), targets[i]), kLogClamp));
  }
  return total / static_cast<double>(targets.size());
}

using ExtMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

struct ExtDense {
  ExtMatrix weight;
  ExtMatrix bias;  // column vector
};

// Mean loss given the pre-activation of layer `first`; later layers are
// recomputed from it.
long double ext_loss_from(const std::vector<ExtDense>& layers, std::size_t first, ExtMatrix z,
                          const std::vector<int>& targets) {
  for (std::size_t l = first + 1; l < layers.size(); ++l) {
    ExtMatrix next = z.cwiseMax(0.0L) * layers[l].weight;
    next.rowwise() += layers[l].bias.col(0).transpose();
    z = std::move(next);
  }
  long double total = 0.0L;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const long double top = z.row(r).maxCoeff();
    const long double norm = (z.row(r).array() - top).exp().sum();
    const long double p = std::exp(z(r, targets[static_cast<std::size_t>(r)]) - top) / norm;
    total -= std::log(std::max(p, static_cast<long double>(kLogClamp)));
  }
  return total / static_cast<long double>(targets.size());
}

Batch gather(const Batch& data, std::span<const int> rows) {
  Batch out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), data.inputs.cols());
  out.targets.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = data.inputs.row(rows[i]);
    out.targets.push_back(data.targets[rows[i]]);
  }
  return out;
}

}  // namespace

std::size_t MlpParams::num_parameters() const {
  std::size_t n = 0;
  for (const Dense& d : layers) n += d.weight.size() + d.bias.size();
  return n;
}

bool MlpParams::all_finite() const {
  for (const Dense& d : layers) {
    if (!d.weight.allFinite() || !d.bias.allFinite()) return false;
  }
  return true;
}

bool MlpParams::same_shape(const MlpParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weight.rows() != other.layers[l].weight.rows() ||
        layers[l].weight.cols() != other.layers[l].weight.cols() ||
        layers[l].bias.size() != other.layers[l].bias.size()) {
      return false;
    }
  }
  return true;
}

std::vector<std::span<double>> MlpParams::tensors() {
  std::vector<std::span<double>> out;
  for (Dense& d : layers) {
    out.emplace_back(d.weight.data(), static_cast<std::size_t>(d.weight.size()));
    out.emplace_back(d.bias.data(), static_cast<std::size_t>(d.bias.size()));
  }
  return out;
}

std::vector<std::span<const double>> MlpParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const Dense& d : layers) {
    out.emplace_back(d.weight.data(), static_cast<std::size_t>(d.weight.size()));
    out.emplace_back(d.bias.data(), static_cast<std::size_t>(d.bias.size()));
  }
  return out;
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].weight != b.layers[l].weight || a.layers[l].bias != b.layers[l].bias) {
      return false;
    }
  }
  return true;
}

MlpParams init_params(Rng& rng, int in_dim, int n_out, const std::vector<int>& hidden) {
  if (in_dim < 1) throw ArgumentError("in_dim must be >= 1");
  if (n_out < 2) throw ArgumentError("n_out must be >= 2");
  std::vector<int> dims{in_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(n_out);
  MlpParams params;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    if (fan_out < 1) throw ArgumentError("hidden widths must be >= 1");
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Dense layer{Eigen::MatrixXd(fan_in, fan_out), Eigen::VectorXd::Zero(fan_out)};
    // Column-major fill order is part of the seed contract.
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams out;
  for (const Dense& d : params.layers) {
    out.layers.push_back({Eigen::MatrixXd::Zero(d.weight.rows(), d.weight.cols()),
                          Eigen::VectorXd::Zero(d.bias.size())});
  }
  return out;
}

Eigen::MatrixXd forward_probs(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != params.in_dim()) {
    throw ArgumentError("input width " + std::to_string(inputs.cols()) +
                        " does not match network input " + std::to_string(params.in_dim()));
  }
  if (!inputs.allFinite()) throw NumericError("non-finite network input");
  ForwardTrace trace = forward_trace(params, inputs);
  Eigen::MatrixXd probs = std::move(trace.acts.back());
  softmax_rows(probs);
  return probs;
}

std::vector<double> forward_probs(const MlpParams& params, std::span<const double> input) {
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = input[i];
  Eigen::MatrixXd probs = forward_probs(params, row);
  return {probs.data(), probs.data() + probs.size()};
}

double cross_entropy(std::span<const double> probs, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= probs.size()) {
    throw ArgumentError("target class out of range");
  }
  return -std::log(std::max(probs[target], kLogClamp));
}

void Batch::validate(int in_dim, int n_out) const {
  if (static_cast<std::size_t>(inputs.rows()) != targets.size()) {
    throw ArgumentError("batch has " + std::to_string(inputs.rows()) + " inputs but " +
                        std::to_string(targets.size()) + " targets");
  }
  if (inputs.cols() != in_dim) throw ArgumentError("batch input width mismatch");
  for (int t : targets) {
    if (t < 0 || t >= n_out) throw ArgumentError("target class out of range");
  }
}

Batch Batch::from_rows(const std::vector<std::vector<double>>& rows, std::vector<int> targets) {
  Batch b;
  const Eigen::Index cols = rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size());
  b.inputs.resize(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != cols) throw ArgumentError("ragged batch rows");
    for (Eigen::Index j = 0; j < cols; ++j) b.inputs(static_cast<Eigen::Index>(i), j) = rows[i][j];
  }
  b.targets = std::move(targets);
  return b;
}

double mean_loss(const MlpParams& params, const Batch& batch) {
  batch.validate(params.in_dim(), params.n_out());
  if (batch.size() == 0) throw ArgumentError("empty batch");
  return mean_clamped_nll(forward_probs(params, batch.inputs), batch.targets);
}

LossAndGrad loss_and_grad(const MlpParams& params, const Batch& batch) {
  batch.validate(params.in_dim(), params.n_out());
  if (batch.size() == 0) throw ArgumentError("empty batch");
  ForwardTrace trace = forward_trace(params, batch.inputs);
  Eigen::MatrixXd delta = trace.acts.back();
  softmax_rows(delta);

  LossAndGrad out;
  out.loss = mean_clamped_nll(delta, batch.targets);
  // d(mean NLL)/d(logits) = (softmax - onehot) / B
  for (std::size_t i = 0; i < batch.size(); ++i) delta(static_cast<Eigen::Index>(i), batch.targets[i]) -= 1.0;
  delta /= static_cast<double>(batch.size());

  out.grad.layers.resize(params.layers.size());
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = trace.acts[l];
    out.grad.layers[l].weight = input.transpose() * delta;
    out.grad.layers[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd upstream = delta * params.layers[l].weight.transpose();
      // ReLU derivative; acts[l] is post-activation so > 0 marks the active set.
      delta = upstream.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

MlpParams grad(const MlpParams& params, const Batch& batch) {
  return loss_and_grad(params, batch).grad;
}

AdamState AdamState::fresh(const MlpParams& like, const AdamConfig& hyper) {
  if (!(hyper.lr > 0.0)) throw ArgumentError("Adam learning rate must be > 0");
  return AdamState{hyper, zeros_like(like), zeros_like(like), 0};
}

void adam_step(MlpParams& params, const MlpParams& gradient, AdamState& state) {
  if (!params.same_shape(gradient) || !params.same_shape(state.m)) {
    throw ArgumentError("Adam shapes do not match the parameters");
  }
  state.t += 1;
  const AdamConfig& h = state.hyper;
  const double correction1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  auto theta = params.tensors();
  auto g = gradient.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    for (std::size_t i = 0; i < theta[k].size(); ++i) {
      m[k][i] = h.beta1 * m[k][i] + (1.0 - h.beta1) * g[k][i];
      v[k][i] = h.beta2 * v[k][i] + (1.0 - h.beta2) * g[k][i] * g[k][i];
      const double m_hat = m[k][i] / correction1;
      const double v_hat = v[k][i] / correction2;
      theta[k][i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  }
}

FitResult bc_fit(const Batch& data, MlpParams params, const FitConfig& config, Rng& rng) {
  if (data.size() == 0) throw ArgumentError("behavioral cloning needs a nonempty dataset");
  data.validate(params.in_dim(), params.n_out());
  if (config.batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (config.epochs < 0) throw ArgumentError("epochs must be >= 0");

  FitResult result;
  AdamState adam = AdamState::fresh(params, config.adam);
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min<std::size_t>(config.batch_size, order.size() - start);
      Batch mini = gather(data, std::span<const int>(order).subspan(start, len));
      adam_step(params, grad(params, mini), adam);
      ++result.updates;
    }
  }
  result.loss = mean_loss(params, data);
  result.params = std::move(params);
  return result;
}

double grad_check(const MlpParams& params, const Batch& batch) {
  return grad_check(params, batch, grad(params, batch));
}

double grad_check(const MlpParams& params, const Batch& batch, const MlpParams& analytic) {
  if (!params.same_shape(analytic)) throw ArgumentError("gradient shape mismatch");
  batch.validate(params.in_dim(), params.n_out());
  if (batch.size() == 0) throw ArgumentError("empty batch");
  // The numeric side runs in long double so that rounding in the loss does
  // not swamp small gradients.
  std::vector<ExtDense> probe;
  for (const Dense& d : params.layers) {
    probe.push_back({d.weight.cast<long double>(), d.bias.cast<long double>()});
  }
  // Layer inputs and pre-activations of the unperturbed network. A single
  // parameter only moves one column of its layer's pre-activation.
  std::vector<ExtMatrix> layer_in{batch.inputs.cast<long double>()};
  std::vector<ExtMatrix> pre;
  for (const ExtDense& layer : probe) {
    ExtMatrix z = layer_in.back() * layer.weight;
    z.rowwise() += layer.bias.col(0).transpose();
    layer_in.push_back(z.cwiseMax(0.0L));
    pre.push_back(std::move(z));
  }
  auto g = analytic.tensors();
  double worst = 0.0;
  auto compare = [&](double analytic_i, long double up, long double down) {
    const double numeric = static_cast<double>((up - down) / (2.0L * kFiniteDiffStep));
    const double denom = std::max({std::abs(analytic_i), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic_i - numeric) / denom);
  };
  for (std::size_t l = 0; l < probe.size(); ++l) {
    const ExtMatrix& x = layer_in[l];
    const ExtMatrix& weight = probe[l].weight;
    const auto gw = g[2 * l];
    const auto gb = g[2 * l + 1];
    // Column-major storage: entry i of the weight is (i % rows, i / rows).
    for (Eigen::Index i = 0; i < weight.size(); ++i) {
      const Eigen::Index row = i % weight.rows();
      const Eigen::Index col = i / weight.rows();
      ExtMatrix z = pre[l];
      z.col(col) += kFiniteDiffStep * x.col(row);
      const long double up = ext_loss_from(probe, l, z, batch.targets);
      z.col(col) = pre[l].col(col) - kFiniteDiffStep * x.col(row);
      const long double down = ext_loss_from(probe, l, std::move(z), batch.targets);
      compare(gw[static_cast<std::size_t>(i)], up, down);
    }
    for (Eigen::Index o = 0; o < probe[l].bias.size(); ++o) {
      ExtMatrix z = pre[l];
      z.col(o).array() += kFiniteDiffStep;
      const long double up = ext_loss_from(probe, l, z, batch.targets);
      z.col(o).array() = pre[l].col(o).array() - kFiniteDiffStep;
      const long double down = ext_loss_from(probe, l, std::move(z), batch.targets);
      compare(gb[static_cast<std::size_t>(o)], up, down);
    }
  }
  return worst;
}

std::uint64_t params_hash(const MlpParams& params) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const Dense& d : params.layers) {
    const std::int64_t dims[3] = {d.weight.rows(), d.weight.cols(), d.bias.size()};
    mix(dims, sizeof(dims));
    mix(d.weight.data(), sizeof(double) * d.weight.size());
    mix(d.bias.data(), sizeof(double) * d.bias.size());
  }
  return h;
}

std::string to_checkpoint_json(const MlpParams& params, std::string_view name) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["name"] = std::string(name);
  j["in_dim"] = params.in_dim();
  j["n_out"] = params.n_out();
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Dense& d = params.layers[l];
    const auto prefix = "layer" + std::to_string(l);
    layers.push_back({{"name", prefix + ".weight"},
                      {"rows", d.weight.rows()},
                      {"cols", d.weight.cols()},
                      {"data", std::vector<double>(d.weight.data(), d.weight.data() + d.weight.size())}});
    layers.push_back({{"name", prefix + ".bias"},
                      {"rows", d.bias.size()},
                      {"cols", 1},
                      {"data", std::vector<double>(d.bias.data(), d.bias.data() + d.bias.size())}});
  }
  j["tensors"] = std::move(layers);
  return j.dump();
}

MlpParams from_checkpoint_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed checkpoint: ") + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat) {
    throw ArgumentError("unsupported checkpoint format");
  }
  const auto& tensors = j.at("tensors");
  if (tensors.size() % 2 != 0 || tensors.empty()) throw ArgumentError("checkpoint tensor list is malformed");
  MlpParams params;
  for (std::size_t i = 0; i < tensors.size(); i += 2) {
    const auto& w = tensors[i];
    const auto& b = tensors[i + 1];
    const auto rows = w.at("rows").get<Eigen::Index>();
    const auto cols = w.at("cols").get<Eigen::Index>();
    auto wdata = w.at("data").get<std::vector<double>>();
    auto bdata = b.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(wdata.size()) != rows * cols ||
        static_cast<Eigen::Index>(bdata.size()) != cols) {
      throw ArgumentError("checkpoint tensor sizes disagree");
    }
    Dense d{Eigen::Map<Eigen::MatrixXd>(wdata.data(), rows, cols),
            Eigen::Map<Eigen::VectorXd>(bdata.data(), cols)};
    if (!params.layers.empty() && params.layers.back().weight.cols() != rows) {
      throw ArgumentError("checkpoint layer dimensions do not chain");
    }
    params.layers.push_back(std::move(d));
  }
  if (!params.all_finite()) throw ArgumentError("checkpoint contains non-finite values");
  return params;
}

void save_checkpoint(const MlpParams& params, std::string_view name, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write checkpoint " + path);
  out << to_checkpoint_json(params, name) << '\n';
}

MlpParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read checkpoint " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_checkpoint_json(buf.str());
}

}  // namespace abig::nn
