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

#include "asrbench/nn/tensor.hpp"

namespace asrbench::nn {

// ---------------------------------------------------------------------------
// Strided 1-D convolution over time ("valid" windows only).

struct ConvSpec {
  int width = 11;          // frames per window
  int stride = 2;          // frames between window starts
  int in_features = 93;
  int out_features = 600;
};

/// ceil((frames - width) / stride). Throws InputTooShort unless
/// frames > width.
int conv_output_length(int frames, const ConvSpec& spec);

/// Same count, but 0 for inputs the convolution cannot accept.
int conv_output_length_or_zero(int frames, const ConvSpec& spec);

struct ConvWeights {
  Matrix kernel;   // (width * in_features) x out_features, tap-major rows
  RowVector bias;  // out_features

  static ConvWeights zeros(const ConvSpec& spec);
};

struct ConvCache {
  Matrix patches;  // one flattened window per output frame
  Eigen::Index input_rows = 0;
  bool ready = false;
};

/// Window i covers frames [i*stride, i*stride + width) and is admitted while
/// i*stride + width < frames, which yields exactly conv_output_length rows.
Matrix conv1d_forward(const Matrix& input, const ConvSpec& spec, const ConvWeights& w,
                      ConvCache* cache = nullptr);

/// Accumulates parameter gradients into `grad` and returns d(input).
Matrix conv1d_backward(const Matrix& upstream, const ConvSpec& spec, const ConvWeights& w,
                       const ConvCache& cache, ConvWeights& grad);

/// Batched form: every element shares the padded time length of the batch.
SequenceBatch conv1d_forward(const SequenceBatch& input, const ConvSpec& spec,
                             const ConvWeights& w);

// ---------------------------------------------------------------------------
// Unidirectional LSTM. Gate columns are laid out [input | forget | output |
// candidate], each hidden_size wide; rows are [x_t ; h_{t-1}].

struct LstmParams {
  Matrix weights;  // (input_size + hidden_size) x (4 * hidden_size)
  RowVector bias;  // 4 * hidden_size

  Eigen::Index input_size() const { return weights.rows() - hidden_size(); }
  Eigen::Index hidden_size() const { return bias.size() / 4; }

  static LstmParams zeros(Eigen::Index input_size, Eigen::Index hidden_size);
};

struct LstmCache {
  Matrix xh;      // steps x (I + H)
  Matrix gates;   // steps x 4H, post-nonlinearity
  Matrix cells;   // steps x H
  Matrix cell_tanh;
  Eigen::Index steps = 0;
  Eigen::Index total_rows = 0;
  bool ready = false;
};

/// Runs the recurrence over the first `length` rows of `input`; rows at or
/// beyond `length` are left zero and do not advance the state.
Matrix lstm_forward(const Matrix& input, const LstmParams& params, Eigen::Index length,
                    LstmCache* cache = nullptr);

Matrix lstm_backward(const Matrix& upstream, const LstmParams& params, const LstmCache& cache,
                     LstmParams& grad);

SequenceBatch lstm_forward(const SequenceBatch& input, const LstmParams& params,
                           std::span<const Eigen::Index> lengths);

// ---------------------------------------------------------------------------
// Fully connected layer: output = input * W + b.

struct DenseParams {
  Matrix weights;  // in x out
  RowVector bias;  // out

  static DenseParams zeros(Eigen::Index in, Eigen::Index out);
};

struct DenseCache {
  Matrix input;
  bool ready = false;
};

Matrix ffnn_forward(const Matrix& input, const DenseParams& params, DenseCache* cache = nullptr);

Matrix ffnn_backward(const Matrix& upstream, const DenseParams& params, const DenseCache& cache,
                     DenseParams& grad);

// ---------------------------------------------------------------------------
// Batch normalisation over the rows of an N x K matrix.

struct BatchNormParams {
  RowVector gamma;
  RowVector beta;
  RowVector running_mean;
  RowVector running_var;
  double epsilon = 1e-5;
  double momentum = 0.99;

  Eigen::Index dims() const { return gamma.size(); }
  static BatchNormParams identity(Eigen::Index dims);
};

struct BatchNormCache {
  Matrix normalized;  // x-hat
  RowVector batch_mean;
  RowVector batch_var;
  RowVector inv_std;
  double count = 0;   // rows across all participants
  Mode mode = Mode::kTrain;
  bool ready = false;
};

/// Train mode normalises with statistics of the rows (summed over every
/// participant of `collective` when given); eval mode uses running stats.
/// Running statistics are not touched here, see update_running_stats.
Matrix batchnorm_forward(const Matrix& input, const BatchNormParams& params, Mode mode,
                         BatchNormCache* cache = nullptr, const Collective* collective = nullptr);

/// Single-context convenience: normalises and, in train mode, folds the
/// batch statistics into the running averages of `state`.
Matrix batchnorm_forward(const Matrix& input, BatchNormParams& state, Mode mode);

void update_running_stats(BatchNormParams& params, const BatchNormCache& cache);

/// `grad` receives this participant's share of d(gamma), d(beta).
Matrix batchnorm_backward(const Matrix& upstream, const BatchNormParams& params,
                          const BatchNormCache& cache, BatchNormParams& grad,
                          const Collective* collective = nullptr);

// ---------------------------------------------------------------------------
// Inverted dropout.

struct DropoutCache {
  Matrix scale;  // 0 or 1/(1-rate) per unit
  bool ready = false;
};

/// Unit j of the row-major layout is dropped iff unit_uniform(seed, j) < rate.
Matrix dropout_forward(const Matrix& input, double rate, std::uint64_t seed, Mode mode,
                       DropoutCache* cache = nullptr);

Matrix dropout_backward(const Matrix& upstream, const DropoutCache& cache);

}  // namespace asrbench::nn
