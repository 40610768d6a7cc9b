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

#include "asrbench/nn/layers.hpp"

#include <cmath>
#include <string>

#include "asrbench/error.hpp"
#include "asrbench/nn/init.hpp"

namespace asrbench::nn {
namespace {

using Index = Eigen::Index;

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

// ---------------------------------------------------------------------------
// Convolution

int conv_output_length(int frames, const ConvSpec& spec) {
  if (spec.width < 1 || spec.stride < 1) throw InvalidArgument("conv: width and stride must be >= 1");
  if (frames <= spec.width) {
    throw InputTooShort("conv: input of " + std::to_string(frames) +
                        " frames is not longer than the kernel width " +
                        std::to_string(spec.width));
  }
  return (frames - spec.width + spec.stride - 1) / spec.stride;
}

int conv_output_length_or_zero(int frames, const ConvSpec& spec) {
  return frames > spec.width ? conv_output_length(frames, spec) : 0;
}

ConvWeights ConvWeights::zeros(const ConvSpec& spec) {
  return {Matrix::Zero(Index{spec.width} * spec.in_features, spec.out_features),
          RowVector::Zero(spec.out_features)};
}

Matrix conv1d_forward(const Matrix& input, const ConvSpec& spec, const ConvWeights& w,
                      ConvCache* cache) {
  require(input.cols() == spec.in_features, "conv1d_forward: feature dimension mismatch");
  require(w.kernel.rows() == Index{spec.width} * spec.in_features &&
              w.kernel.cols() == spec.out_features && w.bias.size() == spec.out_features,
          "conv1d_forward: kernel shape mismatch");
  const int out_rows = conv_output_length(static_cast<int>(input.rows()), spec);
  const Index patch = Index{spec.width} * spec.in_features;
  Matrix patches(out_rows, patch);
  for (int i = 0; i < out_rows; ++i) {
    // rows are contiguous in row-major storage, so a window is one span
    const double* src = input.data() + Index{i} * spec.stride * spec.in_features;
    std::copy(src, src + patch, patches.row(i).data());
  }
  Matrix out = patches * w.kernel;
  out.rowwise() += w.bias;
  if (cache) {
    cache->patches = std::move(patches);
    cache->input_rows = input.rows();
    cache->ready = true;
  }
  return out;
}

Matrix conv1d_backward(const Matrix& upstream, const ConvSpec& spec, const ConvWeights& w,
                       const ConvCache& cache, ConvWeights& grad) {
  if (!cache.ready) throw StateError("conv1d_backward: no cached forward pass");
  require(upstream.rows() == cache.patches.rows() && upstream.cols() == spec.out_features,
          "conv1d_backward: upstream shape mismatch");
  grad.kernel.noalias() += cache.patches.transpose() * upstream;
  grad.bias += upstream.colwise().sum();
  const Matrix dpatches = upstream * w.kernel.transpose();
  Matrix dx = Matrix::Zero(cache.input_rows, spec.in_features);
  const Index patch = dpatches.cols();
  for (Index i = 0; i < dpatches.rows(); ++i) {
    double* dst = dx.data() + i * spec.stride * spec.in_features;
    const double* src = dpatches.row(i).data();
    for (Index k = 0; k < patch; ++k) dst[k] += src[k];
  }
  return dx;
}

SequenceBatch conv1d_forward(const SequenceBatch& input, const ConvSpec& spec,
                             const ConvWeights& w) {
  SequenceBatch out;
  out.reserve(input.size());
  for (const auto& x : input) out.push_back(conv1d_forward(x, spec, w));
  return out;
}

// ---------------------------------------------------------------------------
// LSTM

LstmParams LstmParams::zeros(Index input_size, Index hidden_size) {
  return {Matrix::Zero(input_size + hidden_size, 4 * hidden_size),
          RowVector::Zero(4 * hidden_size)};
}

Matrix lstm_forward(const Matrix& input, const LstmParams& params, Index length,
                    LstmCache* cache) {
  const Index hidden = params.hidden_size();
  const Index in = params.input_size();
  require(params.bias.size() == 4 * hidden && params.weights.cols() == 4 * hidden && in >= 0,
          "lstm_forward: parameter shape mismatch");
  require(input.cols() == in, "lstm_forward: input feature dimension mismatch");
  require(length >= 0 && length <= input.rows(), "lstm_forward: length exceeds sequence");

  const auto w_in = params.weights.topRows(in);
  const auto w_rec = params.weights.bottomRows(hidden);
  Matrix gates = input.topRows(length) * w_in;
  gates.rowwise() += params.bias;

  Matrix out = Matrix::Zero(input.rows(), hidden);
  Matrix h_prev_all(length, hidden);
  Matrix cells(length, hidden);
  Matrix cell_tanh(length, hidden);
  RowVector h = RowVector::Zero(hidden);
  RowVector c = RowVector::Zero(hidden);
  for (Index t = 0; t < length; ++t) {
    h_prev_all.row(t) = h;
    auto z = gates.row(t);
    z.noalias() += h * w_rec;
    for (Index j = 0; j < 3 * hidden; ++j) z[j] = sigmoid(z[j]);
    for (Index j = 3 * hidden; j < 4 * hidden; ++j) z[j] = std::tanh(z[j]);
    const auto i_g = z.segment(0, hidden).array();
    const auto f_g = z.segment(hidden, hidden).array();
    const auto o_g = z.segment(2 * hidden, hidden).array();
    const auto g_g = z.segment(3 * hidden, hidden).array();
    c = (f_g * c.array() + i_g * g_g).matrix();
    cells.row(t) = c;
    cell_tanh.row(t) = c.array().tanh().matrix();
    h = (o_g * cell_tanh.row(t).array()).matrix();
    out.row(t) = h;
  }
  if (cache) {
    cache->xh.resize(length, in + hidden);
    cache->xh.leftCols(in) = input.topRows(length);
    cache->xh.rightCols(hidden) = h_prev_all;
    cache->gates = std::move(gates);
    cache->cells = std::move(cells);
    cache->cell_tanh = std::move(cell_tanh);
    cache->steps = length;
    cache->total_rows = input.rows();
    cache->ready = true;
  }
  return out;
}

Matrix lstm_backward(const Matrix& upstream, const LstmParams& params, const LstmCache& cache,
                     LstmParams& grad) {
  if (!cache.ready) throw StateError("lstm_backward: no cached forward pass");
  const Index hidden = params.hidden_size();
  const Index in = params.input_size();
  require(upstream.rows() == cache.total_rows && upstream.cols() == hidden,
          "lstm_backward: upstream shape mismatch");
  const Index steps = cache.steps;
  const auto w_rec_t = params.weights.bottomRows(hidden).transpose();

  Matrix dz(steps, 4 * hidden);
  RowVector dh_next = RowVector::Zero(hidden);
  RowVector dc_next = RowVector::Zero(hidden);
  for (Index t = steps - 1; t >= 0; --t) {
    const auto z = cache.gates.row(t).array();
    const auto i_g = z.segment(0, hidden);
    const auto f_g = z.segment(hidden, hidden);
    const auto o_g = z.segment(2 * hidden, hidden);
    const auto g_g = z.segment(3 * hidden, hidden);
    const auto tc = cache.cell_tanh.row(t).array();
    const Eigen::ArrayXXd c_prev =
        t > 0 ? Eigen::ArrayXXd(cache.cells.row(t - 1).array())
              : Eigen::ArrayXXd(Eigen::ArrayXXd::Zero(1, hidden));

    const Eigen::ArrayXXd dh = upstream.row(t).array() + dh_next.array();
    const Eigen::ArrayXXd dc = dh * o_g * (1.0 - tc.square()) + dc_next.array();
    auto row = dz.row(t).array();
    row.segment(0, hidden) = dc * g_g * i_g * (1.0 - i_g);
    row.segment(hidden, hidden) = dc * c_prev * f_g * (1.0 - f_g);
    row.segment(2 * hidden, hidden) = dh * tc * o_g * (1.0 - o_g);
    row.segment(3 * hidden, hidden) = dc * i_g * (1.0 - g_g.square());
    dc_next = (dc * f_g).matrix();
    dh_next.noalias() = dz.row(t) * w_rec_t;
  }
  grad.weights.noalias() += cache.xh.transpose() * dz;
  grad.bias += dz.colwise().sum();
  Matrix dx = Matrix::Zero(cache.total_rows, in);
  dx.topRows(steps).noalias() = dz * params.weights.topRows(in).transpose();
  return dx;
}

SequenceBatch lstm_forward(const SequenceBatch& input, const LstmParams& params,
                           std::span<const Index> lengths) {
  require(lengths.size() == input.size(), "lstm_forward: one length per element required");
  SequenceBatch out;
  out.reserve(input.size());
  for (std::size_t b = 0; b < input.size(); ++b) {
    out.push_back(lstm_forward(input[b], params, lengths[b]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dense

DenseParams DenseParams::zeros(Index in, Index out) {
  return {Matrix::Zero(in, out), RowVector::Zero(out)};
}

Matrix ffnn_forward(const Matrix& input, const DenseParams& params, DenseCache* cache) {
  require(input.cols() == params.weights.rows() && params.bias.size() == params.weights.cols(),
          "ffnn_forward: inner dimensions disagree");
  Matrix out = input * params.weights;
  out.rowwise() += params.bias;
  if (cache) {
    cache->input = input;
    cache->ready = true;
  }
  return out;
}

Matrix ffnn_backward(const Matrix& upstream, const DenseParams& params, const DenseCache& cache,
                     DenseParams& grad) {
  if (!cache.ready) throw StateError("ffnn_backward: no cached forward pass");
  require(upstream.rows() == cache.input.rows() && upstream.cols() == params.weights.cols(),
          "ffnn_backward: upstream shape mismatch");
  grad.weights.noalias() += cache.input.transpose() * upstream;
  grad.bias += upstream.colwise().sum();
  return upstream * params.weights.transpose();
}

// ---------------------------------------------------------------------------
// Batch normalisation

BatchNormParams BatchNormParams::identity(Index dims) {
  BatchNormParams p;
  p.gamma = RowVector::Ones(dims);
  p.beta = RowVector::Zero(dims);
  p.running_mean = RowVector::Zero(dims);
  p.running_var = RowVector::Ones(dims);
  return p;
}

Matrix batchnorm_forward(const Matrix& input, const BatchNormParams& params, Mode mode,
                         BatchNormCache* cache, const Collective* collective) {
  const Index k = params.dims();
  require(input.cols() == k && params.beta.size() == k, "batchnorm_forward: dimension mismatch");
  require(params.epsilon > 0, "batchnorm_forward: epsilon must be positive");

  RowVector mean;
  RowVector var;
  double count = static_cast<double>(input.rows());
  if (mode == Mode::kTrain) {
    std::vector<double> buf(static_cast<std::size_t>(k) + 1);
    Eigen::Map<RowVector>(buf.data(), k) = input.colwise().sum();
    buf[k] = count;
    if (collective) collective->sum(buf);
    count = buf[k];
    if (count < 2) throw InvalidArgument("batchnorm_forward: train mode needs at least 2 rows");
    mean = Eigen::Map<RowVector>(buf.data(), k) / count;
    Eigen::Map<RowVector>(buf.data(), k) = (input.rowwise() - mean).array().square().colwise().sum();
    if (collective) collective->sum(std::span<double>(buf.data(), k));
    var = Eigen::Map<RowVector>(buf.data(), k) / count;
  } else {
    mean = params.running_mean;
    var = params.running_var;
  }
  const RowVector inv_std = (var.array() + params.epsilon).rsqrt().matrix();
  Matrix normalized = (input.rowwise() - mean).array().rowwise() * inv_std.array();
  Matrix out = normalized.array().rowwise() * params.gamma.array();
  out.rowwise() += params.beta;
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->batch_mean = std::move(mean);
    cache->batch_var = std::move(var);
    cache->inv_std = inv_std;
    cache->count = count;
    cache->mode = mode;
    cache->ready = true;
  }
  return out;
}

Matrix batchnorm_forward(const Matrix& input, BatchNormParams& state, Mode mode) {
  BatchNormCache cache;
  Matrix out = batchnorm_forward(input, state, mode, &cache);
  if (mode == Mode::kTrain) update_running_stats(state, cache);
  return out;
}

void update_running_stats(BatchNormParams& params, const BatchNormCache& cache) {
  if (!cache.ready || cache.mode != Mode::kTrain) return;
  params.running_mean = params.momentum * params.running_mean + (1.0 - params.momentum) * cache.batch_mean;
  params.running_var = params.momentum * params.running_var + (1.0 - params.momentum) * cache.batch_var;
}

Matrix batchnorm_backward(const Matrix& upstream, const BatchNormParams& params,
                          const BatchNormCache& cache, BatchNormParams& grad,
                          const Collective* collective) {
  if (!cache.ready) throw StateError("batchnorm_backward: no cached forward pass");
  const Index k = params.dims();
  require(upstream.rows() == cache.normalized.rows() && upstream.cols() == k,
          "batchnorm_backward: upstream shape mismatch");
  const RowVector local_dbeta = upstream.colwise().sum();
  const RowVector local_dgamma = (upstream.array() * cache.normalized.array()).colwise().sum();
  grad.beta += local_dbeta;
  grad.gamma += local_dgamma;

  const RowVector scale = (params.gamma.array() * cache.inv_std.array()).matrix();
  if (cache.mode == Mode::kEval) return upstream.array().rowwise() * scale.array();

  std::vector<double> buf(2 * static_cast<std::size_t>(k));
  Eigen::Map<RowVector>(buf.data(), k) = local_dbeta;
  Eigen::Map<RowVector>(buf.data() + k, k) = local_dgamma;
  if (collective) collective->sum(buf);
  const RowVector sum_dy = Eigen::Map<RowVector>(buf.data(), k);
  const RowVector sum_dy_xhat = Eigen::Map<RowVector>(buf.data() + k, k);
  const double n = cache.count;

  Matrix dx = upstream * n;
  dx.rowwise() -= sum_dy;
  dx.array() -= cache.normalized.array().rowwise() * sum_dy_xhat.array();
  dx.array().rowwise() *= (scale.array() / n);
  return dx;
}

// ---------------------------------------------------------------------------
// Dropout

Matrix dropout_forward(const Matrix& input, double rate, std::uint64_t seed, Mode mode,
                       DropoutCache* cache) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (mode == Mode::kEval || rate == 0.0) {
    if (cache) {
      cache->scale = Matrix::Ones(input.rows(), input.cols());
      cache->ready = true;
    }
    return input;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix scale(input.rows(), input.cols());
  for (Index j = 0; j < scale.size(); ++j) {
    scale.data()[j] = unit_uniform(seed, static_cast<std::uint64_t>(j)) < rate ? 0.0 : keep_scale;
  }
  Matrix out = input.cwiseProduct(scale);
  if (cache) {
    cache->scale = std::move(scale);
    cache->ready = true;
  }
  return out;
}

Matrix dropout_backward(const Matrix& upstream, const DropoutCache& cache) {
  if (!cache.ready) throw StateError("dropout_backward: no cached forward pass");
  require(upstream.rows() == cache.scale.rows() && upstream.cols() == cache.scale.cols(),
          "dropout_backward: upstream shape mismatch");
  return upstream.cwiseProduct(cache.scale);
}

}  // namespace asrbench::nn
