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

#include "asrbench/trainer/model.hpp"

#include <cmath>

#include "asrbench/error.hpp"
#include "asrbench/nn/init.hpp"

namespace asrbench::trainer {

using Eigen::Index;
using nn::Mode;

namespace {

Matrix stack(std::span<const Matrix> parts, Index cols) {
  if (parts.empty()) return Matrix(0, cols);
  return nn::stack_rows(parts);
}

std::vector<std::span<double>> spans(AcousticModel& m) {
  std::vector<std::span<double>> out;
  for_each_trainable(m, [&](auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); });
  return out;
}

std::vector<std::span<const double>> spans(const AcousticModel& m) {
  std::vector<std::span<const double>> out;
  for_each_trainable(m, [&](const auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); });
  return out;
}

nn::BatchNormCache stats_only(nn::BatchNormCache c) {
  c.normalized = Matrix();
  return c;
}

}  // namespace

void ModelConfig::validate() const {
  if (feature_dim < 1 || conv_width < 1 || conv_stride < 1 || conv_out < 1 || lstm_size < 1 || n_lstm < 1 ||
      n_classes < 2)
    throw InvalidArgument("model dimensions must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must be in [0, 1)");
}

AcousticModel AcousticModel::create(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  AcousticModel m;
  m.config = cfg;
  std::uint64_t stream = 0;
  auto next_seed = [&] { return nn::mix64(seed ^ nn::mix64(++stream)); };

  m.conv = nn::ConvWeights::zeros(cfg.conv_spec());
  m.conv.kernel = nn::xavier_init(Index{cfg.conv_width} * cfg.feature_dim, cfg.conv_out, next_seed());
  m.conv_bn = nn::BatchNormParams::identity(cfg.conv_out);
  Index in = cfg.conv_out;
  for (int l = 0; l < cfg.n_lstm; ++l) {
    auto p = nn::LstmParams::zeros(in, cfg.lstm_size);
    p.weights = nn::xavier_init(in + cfg.lstm_size, 4 * Index{cfg.lstm_size}, next_seed());
    p.bias.segment(cfg.lstm_size, cfg.lstm_size).setOnes();
    m.lstm.push_back(std::move(p));
    m.lstm_bn.push_back(nn::BatchNormParams::identity(cfg.lstm_size));
    in = cfg.lstm_size;
  }
  m.output = nn::DenseParams::zeros(cfg.lstm_size, cfg.n_classes);
  m.output.weights = nn::xavier_init(cfg.lstm_size, cfg.n_classes, next_seed());
  return m;
}

AcousticModel AcousticModel::zeros_like(const AcousticModel& src) {
  AcousticModel m = src;
  for_each_trainable(m, [](auto& t) { t.setZero(); });
  return m;
}

std::size_t AcousticModel::parameter_count() const {
  std::size_t n = 0;
  for_each_trainable(*this, [&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

std::vector<double> flatten_trainable(const AcousticModel& m) {
  std::vector<double> out;
  out.reserve(m.parameter_count());
  for_each_trainable(m, [&](const auto& t) { out.insert(out.end(), t.data(), t.data() + t.size()); });
  return out;
}

int output_length(const ModelConfig& cfg, int frames) {
  return nn::conv_output_length_or_zero(frames, cfg.conv_spec());
}

Matrix infer(const AcousticModel& model, const Matrix& input) {
  const auto& cfg = model.config;
  if (output_length(cfg, static_cast<int>(input.rows())) == 0) return Matrix(0, cfg.n_classes);
  Matrix h = nn::conv1d_forward(input, cfg.conv_spec(), model.conv);
  h = nn::batchnorm_forward(h, model.conv_bn, Mode::kEval).cwiseMax(0.0);
  for (std::size_t l = 0; l < model.lstm.size(); ++l) {
    h = nn::lstm_forward(h, model.lstm[l], h.rows());
    h = nn::batchnorm_forward(h, model.lstm_bn[l], Mode::kEval);
  }
  return nn::softmax_rows(nn::ffnn_forward(h, model.output));
}

std::vector<Matrix> infer(const AcousticModel& model, std::span<const Matrix> inputs) {
  std::vector<Matrix> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(infer(model, x));
  return out;
}

std::uint64_t dropout_seed(std::uint64_t seed, std::int64_t iteration, std::int64_t element, int layer) {
  std::uint64_t h = nn::mix64(seed);
  h = nn::mix64(h ^ static_cast<std::uint64_t>(iteration));
  h = nn::mix64(h ^ static_cast<std::uint64_t>(element));
  return nn::mix64(h ^ static_cast<std::uint64_t>(layer));
}

ShardResult train_shard(const AcousticModel& model, const ShardInput& in, AcousticModel& grad,
                        const nn::Collective* collective) {
  const auto& cfg = model.config;
  const auto spec = cfg.conv_spec();
  const std::size_t n = in.inputs.size();
  if (in.labels.size() != n || in.element_ids.size() != n) throw InvalidArgument("train_shard: ragged shard");
  const Index conv_cols = cfg.conv_out;
  const Index hidden = cfg.lstm_size;
  const std::size_t layers = model.lstm.size();

  // Forward.
  std::vector<nn::ConvCache> conv_cache(n);
  std::vector<Index> rows(n);
  std::vector<Matrix> parts(n);
  for (std::size_t i = 0; i < n; ++i) {
    parts[i] = nn::conv1d_forward(in.inputs[i], spec, model.conv, &conv_cache[i]);
    rows[i] = parts[i].rows();
  }
  nn::BatchNormCache conv_bn;
  Matrix z = nn::batchnorm_forward(stack(parts, conv_cols), model.conv_bn, Mode::kTrain, &conv_bn, collective);
  const Matrix relu_mask = (z.array() > 0.0).cast<double>().matrix();
  Matrix h = z.cwiseMax(0.0);

  std::vector<std::vector<nn::LstmCache>> lstm_cache(layers, std::vector<nn::LstmCache>(n));
  std::vector<nn::BatchNormCache> lstm_bn(layers);
  std::vector<std::vector<nn::DropoutCache>> drop_cache(layers, std::vector<nn::DropoutCache>(n));
  for (std::size_t l = 0; l < layers; ++l) {
    parts = nn::split_rows(h, rows);
    for (std::size_t i = 0; i < n; ++i) parts[i] = nn::lstm_forward(parts[i], model.lstm[l], rows[i], &lstm_cache[l][i]);
    h = nn::batchnorm_forward(stack(parts, hidden), model.lstm_bn[l], Mode::kTrain, &lstm_bn[l], collective);
    parts = nn::split_rows(h, rows);
    for (std::size_t i = 0; i < n; ++i)
      parts[i] = nn::dropout_forward(parts[i], cfg.dropout,
                                     dropout_seed(in.seed, in.iteration, in.element_ids[i], static_cast<int>(l)),
                                     Mode::kTrain, &drop_cache[l][i]);
    h = stack(parts, hidden);
  }
  nn::DenseCache dense;
  const Matrix logits = nn::ffnn_forward(h, model.output, &dense);

  // Loss.
  ShardResult result;
  result.elements = n;
  parts = nn::split_rows(logits, rows);
  const int blank = cfg.n_classes - 1;
  for (std::size_t i = 0; i < n; ++i) {
    auto ctc = ctc::ctc_loss(nn::softmax_rows(parts[i]), in.labels[i], blank);
    result.loss_sum += ctc.loss;
    parts[i] = ctc.grad * in.loss_scale;
  }

  // Backward.
  Matrix d = nn::ffnn_backward(stack(parts, cfg.n_classes), model.output, dense, grad.output);
  for (std::size_t li = layers; li-- > 0;) {
    parts = nn::split_rows(d, rows);
    for (std::size_t i = 0; i < n; ++i) parts[i] = nn::dropout_backward(parts[i], drop_cache[li][i]);
    d = nn::batchnorm_backward(stack(parts, hidden), model.lstm_bn[li], lstm_bn[li], grad.lstm_bn[li], collective);
    parts = nn::split_rows(d, rows);
    for (std::size_t i = 0; i < n; ++i) parts[i] = nn::lstm_backward(parts[i], model.lstm[li], lstm_cache[li][i], grad.lstm[li]);
    d = stack(parts, li == 0 ? conv_cols : hidden);
  }
  d = d.cwiseProduct(relu_mask);
  d = nn::batchnorm_backward(d, model.conv_bn, conv_bn, grad.conv_bn, collective);
  parts = nn::split_rows(d, rows);
  for (std::size_t i = 0; i < n; ++i) nn::conv1d_backward(parts[i], spec, model.conv, conv_cache[i], grad.conv);

  result.bn_stats.push_back(stats_only(std::move(conv_bn)));
  for (auto& c : lstm_bn) result.bn_stats.push_back(stats_only(std::move(c)));
  return result;
}

void update_running_stats(AcousticModel& model, std::span<const nn::BatchNormCache> bn_stats) {
  if (bn_stats.size() != model.lstm_bn.size() + 1) throw InvalidArgument("update_running_stats: wrong stat count");
  nn::update_running_stats(model.conv_bn, bn_stats[0]);
  for (std::size_t l = 0; l < model.lstm_bn.size(); ++l) nn::update_running_stats(model.lstm_bn[l], bn_stats[l + 1]);
}

AdaDeltaState AdaDeltaState::for_model(const AcousticModel& m, double rho, double epsilon) {
  AdaDeltaState s;
  s.rho = rho;
  s.epsilon = epsilon;
  for (const auto& t : spans(m)) {
    s.mean_sq_grad.emplace_back(t.size(), 0.0);
    s.mean_sq_delta.emplace_back(t.size(), 0.0);
  }
  return s;
}

void adadelta_step(AcousticModel& params, const AcousticModel& grads, AdaDeltaState& state) {
  auto p = spans(params);
  const auto g = spans(grads);
  if (g.size() != p.size() || state.mean_sq_grad.size() != p.size() || state.mean_sq_delta.size() != p.size())
    throw InvalidArgument("adadelta_step: parameter layout mismatch");
  const double rho = state.rho;
  const double eps = state.epsilon;
  for (std::size_t t = 0; t < p.size(); ++t) {
    auto& eg = state.mean_sq_grad[t];
    auto& ed = state.mean_sq_delta[t];
    if (g[t].size() != p[t].size() || eg.size() != p[t].size()) throw InvalidArgument("adadelta_step: shape mismatch");
    for (std::size_t k = 0; k < p[t].size(); ++k) {
      const double gk = g[t][k];
      eg[k] = rho * eg[k] + (1.0 - rho) * gk * gk;
      const double dx = -std::sqrt(ed[k] + eps) / std::sqrt(eg[k] + eps) * gk;
      ed[k] = rho * ed[k] + (1.0 - rho) * dx * dx;
      p[t][k] += dx;
    }
  }
}

}  // namespace asrbench::trainer
