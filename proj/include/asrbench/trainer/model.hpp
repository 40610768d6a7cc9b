// Copyright 2026 The asrbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "asrbench/ctc/ctc.hpp"
#include "asrbench/nn/layers.hpp"

namespace asrbench::trainer {

using nn::Matrix;
using nn::RowVector;

struct ModelConfig {
  int feature_dim = 93;
  int conv_width = 11;
  int conv_stride = 2;
  int conv_out = 600;
  int lstm_size = 800;
  int n_lstm = 5;
  double dropout = 0.05;
  int n_classes = 30;

  static ModelConfig full() { return {}; }
  /// Scaled-down topology for single-machine runs.
  static ModelConfig desk() { return {93, 11, 2, 64, 96, 2, 0.05, 30}; }

  nn::ConvSpec conv_spec() const { return {conv_width, conv_stride, feature_dim, conv_out}; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// conv -> BN -> ReLU -> [LSTM -> BN -> dropout] x n -> dense -> softmax.
struct AcousticModel {
  ModelConfig config;
  nn::ConvWeights conv;
  nn::BatchNormParams conv_bn;
  std::vector<nn::LstmParams> lstm;
  std::vector<nn::BatchNormParams> lstm_bn;
  nn::DenseParams output;

  /// Xavier-uniform weights, zero biases except a forget-gate bias of 1,
  /// identity batch norms.
  static AcousticModel create(const ModelConfig& cfg, std::uint64_t seed);
  /// Same shapes, every tensor zero (gradient accumulator).
  static AcousticModel zeros_like(const AcousticModel& m);

  std::size_t parameter_count() const;
};

/// Calls f(tensor) for every trainable tensor in a fixed order.
template <typename M, typename F>
void for_each_trainable(M& m, F&& f) {
  f(m.conv.kernel);
  f(m.conv.bias);
  f(m.conv_bn.gamma);
  f(m.conv_bn.beta);
  for (std::size_t l = 0; l < m.lstm.size(); ++l) {
    f(m.lstm[l].weights);
    f(m.lstm[l].bias);
    f(m.lstm_bn[l].gamma);
    f(m.lstm_bn[l].beta);
  }
  f(m.output.weights);
  f(m.output.bias);
}

/// Batch-norm running statistics in a fixed order.
template <typename M, typename F>
void for_each_running_stat(M& m, F&& f) {
  f(m.conv_bn.running_mean);
  f(m.conv_bn.running_var);
  for (auto& bn : m.lstm_bn) {
    f(bn.running_mean);
    f(bn.running_var);
  }
}

/// Trainable values concatenated in for_each_trainable order.
std::vector<double> flatten_trainable(const AcousticModel& m);

/// Output frames for an input of `frames` frames (0 if too short).
int output_length(const ModelConfig& cfg, int frames);

/// Eval-mode forward pass: per-frame class probabilities for each input.
std::vector<Matrix> infer(const AcousticModel& model, std::span<const Matrix> inputs);
Matrix infer(const AcousticModel& model, const Matrix& input);

std::uint64_t dropout_seed(std::uint64_t seed, std::int64_t iteration, std::int64_t element, int layer);

struct ShardInput {
  std::span<const Matrix> inputs;
  std::span<const ctc::LabelSequence> labels;
  std::span<const std::int64_t> element_ids;
  std::int64_t iteration = 0;
  std::uint64_t seed = 0;
  double loss_scale = 1.0;  // multiplies every element's loss gradient
};

struct ShardResult {
  double loss_sum = 0;
  std::size_t elements = 0;
  /// Batch statistics seen by each batch norm (identical on every worker
  /// when a collective is used): conv first, then each LSTM layer.
  std::vector<nn::BatchNormCache> bn_stats;
};

/// Train-mode forward, CTC and backward for one shard. Gradients are added
/// into `grad`. Every participant of `collective` must call this with the
/// same model, even with an empty shard.
ShardResult train_shard(const AcousticModel& model, const ShardInput& in, AcousticModel& grad,
                        const nn::Collective* collective = nullptr);

/// Folds batch statistics into the running averages of `model`.
void update_running_stats(AcousticModel& model, std::span<const nn::BatchNormCache> bn_stats);

struct AdaDeltaState {
  double rho = 0.95;
  double epsilon = 1e-6;
  std::vector<std::vector<double>> mean_sq_grad;
  std::vector<std::vector<double>> mean_sq_delta;

  static AdaDeltaState for_model(const AcousticModel& m, double rho = 0.95, double epsilon = 1e-6);
};

/// E[g^2] <- rho E[g^2] + (1-rho) g^2
/// dx     <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
/// E[dx^2] <- rho E[dx^2] + (1-rho) dx^2;  x <- x + dx
void adadelta_step(AcousticModel& params, const AcousticModel& grads, AdaDeltaState& state);

}  // namespace asrbench::trainer
