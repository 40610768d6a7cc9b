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

#include <cmath>
#include <random>
#include <vector>

#include "asrbench/error.hpp"
#include "asrbench/nn/init.hpp"
#include "asrbench/nn/layers.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"
#include "support/layer_cases.hpp"

using namespace asrbench;
using nn::Matrix;
using nn::RowVector;

TEST_CASE("xavier_init bounds, determinism and moments") {
  const Matrix small = nn::xavier_init(3, 3, 7);
  CHECK(small.maxCoeff() <= 1.0);
  CHECK(small.minCoeff() >= -1.0);
  CHECK(nn::xavier_init(5, 9, 42) == nn::xavier_init(5, 9, 42));
  CHECK(nn::xavier_init(5, 9, 42) != nn::xavier_init(5, 9, 43));
  CHECK_THROWS_AS(nn::xavier_init(0, 3, 1), InvalidArgument);
  CHECK_THROWS_AS(nn::xavier_init(3, 0, 1), InvalidArgument);

  // 400x400 = 1.6e5 samples of U(-b, b): mean 0, variance b^2/3.
  const Matrix big = nn::xavier_init(400, 400, 11);
  const double bound = nn::xavier_bound(400, 400);
  const double mean = big.mean();
  const double var = (big.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - bound * bound / 3.0) < 0.1 * bound * bound / 3.0);
}

TEST_CASE("conv output length follows the ceiling formula") {
  nn::ConvSpec spec;  // width 11, stride 2
  CHECK(nn::conv_output_length(1670, spec) == 830);
  CHECK(nn::conv_output_length(12, spec) == 1);
  CHECK_THROWS_AS(nn::conv_output_length(11, spec), InputTooShort);
  CHECK(nn::conv_output_length_or_zero(11, spec) == 0);

  for (int width = 1; width <= 20; ++width) {
    for (int stride = 1; stride <= 5; ++stride) {
      for (int frames = width + 1; frames <= 100; ++frames) {
        const nn::ConvSpec s{width, stride, 1, 1};
        const int expected = static_cast<int>(std::ceil(double(frames - width) / stride));
        REQUIRE(nn::conv_output_length(frames, s) == expected);
      }
    }
  }
}

TEST_CASE("conv1d_forward emits one row per admitted window") {
  const nn::ConvSpec spec{3, 2, 1, 1};
  Matrix x(7, 1);
  x << 1, 2, 3, 4, 5, 6, 7;
  nn::ConvWeights w{Matrix::Ones(3, 1), RowVector::Zero(1)};
  const Matrix y = nn::conv1d_forward(x, spec, w);
  // windows start at 0 and 2 (2+3<7); start 4 is excluded since 4+3 == 7
  REQUIRE(y.rows() == 2);
  CHECK(y(0, 0) == doctest::Approx(6));
  CHECK(y(1, 0) == doctest::Approx(12));

  nn::SequenceBatch batch{Matrix::Zero(20, 1), Matrix::Ones(20, 1)};
  const auto out = nn::conv1d_forward(batch, spec, w);
  CHECK(out[1].rows() == nn::conv_output_length(20, spec));
  CHECK_THROWS_AS(nn::conv1d_forward(Matrix::Zero(3, 1), spec, w), InputTooShort);
  CHECK_THROWS_AS(nn::conv1d_forward(Matrix::Zero(9, 2), spec, w), InvalidArgument);
}

namespace {

// Step-by-step scalar LSTM with the same gate layout, written without Eigen
// block arithmetic.
std::vector<std::vector<double>> scalar_lstm(const Matrix& x, const nn::LstmParams& p, int length) {
  const int in = static_cast<int>(p.input_size());
  const int hid = static_cast<int>(p.hidden_size());
  std::vector<double> h(hid, 0.0), c(hid, 0.0);
  std::vector<std::vector<double>> out(x.rows(), std::vector<double>(hid, 0.0));
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int t = 0; t < length; ++t) {
    std::vector<double> z(4 * hid);
    for (int g = 0; g < 4 * hid; ++g) {
      double acc = p.bias(g);
      for (int k = 0; k < in; ++k) acc += x(t, k) * p.weights(k, g);
      for (int k = 0; k < hid; ++k) acc += h[k] * p.weights(in + k, g);
      z[g] = acc;
    }
    for (int j = 0; j < hid; ++j) {
      const double ig = sig(z[j]), fg = sig(z[hid + j]), og = sig(z[2 * hid + j]);
      const double gg = std::tanh(z[3 * hid + j]);
      c[j] = fg * c[j] + ig * gg;
      h[j] = og * std::tanh(c[j]);
      out[t][j] = h[j];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("lstm_forward") {
  SUBCASE("zero weights and zero input give zero output") {
    const auto p = nn::LstmParams::zeros(3, 2);
    const Matrix y = nn::lstm_forward(Matrix::Zero(4, 3), p, 4);
    CHECK(y.isZero(0.0));
  }
  SUBCASE("matches the scalar recurrence") {
    std::mt19937_64 rng(5);
    nn::LstmParams p{testing::random_matrix(3 + 2, 8, rng), testing::random_matrix(1, 8, rng)};
    const Matrix x = testing::random_matrix(3, 3, rng);
    const Matrix y = nn::lstm_forward(x, p, 3);
    const auto ref = scalar_lstm(x, p, 3);
    for (int t = 0; t < 3; ++t)
      for (int j = 0; j < 2; ++j) CHECK(y(t, j) == doctest::Approx(ref[t][j]).epsilon(1e-12));
  }
  SUBCASE("frames beyond the length are zero") {
    std::mt19937_64 rng(6);
    nn::LstmParams p{testing::random_matrix(1 + 2, 8, rng), testing::random_matrix(1, 8, rng)};
    const Matrix x = testing::random_matrix(3, 1, rng);
    const Matrix y = nn::lstm_forward(x, p, 1);
    CHECK(y.row(0).norm() > 0);
    CHECK(y.bottomRows(2).isZero(0.0));
    const std::vector<Eigen::Index> lengths{1};
    const auto batched = nn::lstm_forward(nn::SequenceBatch{x}, p, lengths);
    CHECK(batched[0] == y);
  }
  SUBCASE("bad shapes") {
    const auto p = nn::LstmParams::zeros(3, 2);
    CHECK_THROWS_AS(nn::lstm_forward(Matrix::Zero(4, 2), p, 4), InvalidArgument);
    CHECK_THROWS_AS(nn::lstm_forward(Matrix::Zero(4, 3), p, 5), InvalidArgument);
  }
}

TEST_CASE("ffnn_forward") {
  const Matrix x = (Matrix(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  nn::DenseParams ident{Matrix::Identity(3, 3), RowVector::Zero(3)};
  CHECK(nn::ffnn_forward(x, ident) == x);

  nn::DenseParams p{(Matrix(2, 1) << 1, 1).finished(), (RowVector(1) << 1).finished()};
  const Matrix y = nn::ffnn_forward((Matrix(1, 2) << 1, 2).finished(), p);
  CHECK(y(0, 0) == doctest::Approx(4.0));

  nn::DenseParams q{Matrix::Ones(3, 2), (RowVector(2) << 0.5, -2).finished()};
  const Matrix z = nn::ffnn_forward(Matrix::Zero(4, 3), q);
  for (int r = 0; r < 4; ++r) CHECK(z.row(r) == q.bias);
  CHECK_THROWS_AS(nn::ffnn_forward(Matrix::Zero(1, 2), q), InvalidArgument);
}

TEST_CASE("batchnorm_forward") {
  auto state = nn::BatchNormParams::identity(1);
  nn::BatchNormCache cache;
  const Matrix x = (Matrix(3, 1) << 1, 2, 3).finished();
  const Matrix y = nn::batchnorm_forward(x, state, nn::Mode::kTrain, &cache);
  // mean 2, variance 2/3
  const double scale = 1.0 / std::sqrt(2.0 / 3.0 + 1e-5);
  CHECK(cache.normalized(0, 0) == doctest::Approx(-scale).epsilon(1e-12));
  CHECK(cache.normalized(1, 0) == doctest::Approx(0.0));
  CHECK(cache.normalized(2, 0) == doctest::Approx(scale).epsilon(1e-12));
  CHECK(y == cache.normalized);  // gamma 1, beta 0
  CHECK(std::abs(cache.normalized(0, 0) + 1.2247) < 1e-4);

  const Matrix flat = Matrix::Constant(3, 1, 5.0);
  const Matrix yf = nn::batchnorm_forward(flat, state, nn::Mode::kTrain, &cache);
  CHECK(yf.isZero(0.0));

  CHECK_THROWS_AS(nn::batchnorm_forward(Matrix::Ones(1, 1), state, nn::Mode::kTrain), InvalidArgument);
  CHECK_NOTHROW(nn::batchnorm_forward(Matrix::Ones(1, 1), state, nn::Mode::kEval));
}

TEST_CASE("batchnorm running statistics move only in train mode") {
  auto state = nn::BatchNormParams::identity(2);
  const Matrix x = (Matrix(2, 2) << 1, 4, 3, 8).finished();
  nn::batchnorm_forward(x, state, nn::Mode::kEval);
  CHECK(state.running_mean.isZero(0.0));
  nn::batchnorm_forward(x, state, nn::Mode::kTrain);
  CHECK(state.running_mean(0) == doctest::Approx(0.01 * 2.0));
  CHECK(state.running_mean(1) == doctest::Approx(0.01 * 6.0));
  CHECK(state.running_var(0) == doctest::Approx(0.99 + 0.01 * 1.0));
}

TEST_CASE("batchnorm normalised output statistics (property)") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = testing::uniform_int(rng, 2, 40);
    const int dims = testing::uniform_int(rng, 1, 6);
    const Matrix x = testing::random_matrix(rows, dims, rng, 50.0);
    const auto p = nn::BatchNormParams::identity(dims);
    nn::BatchNormCache cache;
    nn::batchnorm_forward(x, p, nn::Mode::kTrain, &cache);
    const RowVector mean = cache.normalized.colwise().mean();
    const RowVector var = cache.normalized.array().square().colwise().mean() - mean.array().square();
    CHECK(mean.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(var.maxCoeff() <= 1.0 + 1e-12);
    CHECK(var.minCoeff() >= 1.0 - 10 * p.epsilon);
  }
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(3);
  const Matrix x = testing::random_matrix(5, 4, rng);
  CHECK(nn::dropout_forward(x, 0.0, 1, nn::Mode::kTrain) == x);
  CHECK(nn::dropout_forward(x, 0.7, 1, nn::Mode::kEval) == x);
  CHECK_THROWS_AS(nn::dropout_forward(x, 1.0, 1, nn::Mode::kTrain), InvalidArgument);
  CHECK_THROWS_AS(nn::dropout_forward(x, -0.1, 1, nn::Mode::kTrain), InvalidArgument);

  const Matrix ones = Matrix::Ones(1000, 1000);
  const Matrix y = nn::dropout_forward(ones, 0.05, 1234, nn::Mode::kTrain);
  const double dropped = static_cast<double>((y.array() == 0.0).count()) / 1e6;
  CHECK(std::abs(dropped - 0.05) < 0.002);
  const double kept_value = y.maxCoeff();
  CHECK(kept_value == doctest::Approx(1.0 / 0.95).epsilon(1e-15));
  CHECK(nn::dropout_forward(ones, 0.05, 1234, nn::Mode::kTrain) == y);
}

TEST_CASE("backward before forward is a state error") {
  nn::ConvSpec spec{2, 1, 1, 1};
  auto cw = nn::ConvWeights::zeros(spec);
  CHECK_THROWS_AS(nn::conv1d_backward(Matrix::Zero(1, 1), spec, cw, nn::ConvCache{}, cw), StateError);
  auto lp = nn::LstmParams::zeros(1, 1);
  CHECK_THROWS_AS(nn::lstm_backward(Matrix::Zero(1, 1), lp, nn::LstmCache{}, lp), StateError);
  auto dp = nn::DenseParams::zeros(1, 1);
  CHECK_THROWS_AS(nn::ffnn_backward(Matrix::Zero(1, 1), dp, nn::DenseCache{}, dp), StateError);
  auto bp = nn::BatchNormParams::identity(1);
  CHECK_THROWS_AS(nn::batchnorm_backward(Matrix::Zero(1, 1), bp, nn::BatchNormCache{}, bp), StateError);
  CHECK_THROWS_AS(nn::dropout_backward(Matrix::Zero(1, 1), nn::DropoutCache{}), StateError);
}

TEST_CASE("ffnn backward of sum(output) is the row sums of W^T") {
  std::mt19937_64 rng(8);
  nn::DenseParams p{testing::random_matrix(4, 3, rng), testing::random_matrix(1, 3, rng)};
  nn::DenseCache cache;
  const Matrix x = testing::random_matrix(2, 4, rng);
  nn::ffnn_forward(x, p, &cache);
  auto grad = nn::DenseParams::zeros(4, 3);
  const Matrix dx = nn::ffnn_backward(Matrix::Ones(2, 3), p, cache, grad);
  const Matrix expected = p.weights.rowwise().sum().transpose();
  for (int r = 0; r < 2; ++r) CHECK((dx.row(r) - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  std::mt19937_64 rng(10);
  const Matrix x = testing::random_matrix(6, 3, rng);
  nn::ConvSpec spec{2, 2, 3, 2};
  nn::ConvWeights cw{testing::random_matrix(6, 2, rng), testing::random_matrix(1, 2, rng)};
  nn::ConvCache cc;
  const Matrix cy = nn::conv1d_forward(x, spec, cw, &cc);
  auto cg = nn::ConvWeights::zeros(spec);
  CHECK(nn::conv1d_backward(Matrix::Zero(cy.rows(), 2), spec, cw, cc, cg).isZero(0.0));
  CHECK(cg.kernel.isZero(0.0));

  nn::LstmParams lp{testing::random_matrix(5, 8, rng), testing::random_matrix(1, 8, rng)};
  nn::LstmCache lc;
  nn::lstm_forward(x, lp, 6, &lc);
  auto lg = nn::LstmParams::zeros(3, 2);
  CHECK(nn::lstm_backward(Matrix::Zero(6, 2), lp, lc, lg).isZero(0.0));
  CHECK(lg.weights.isZero(0.0));

  auto bp = nn::BatchNormParams::identity(3);
  nn::BatchNormCache bc;
  nn::batchnorm_forward(x, bp, nn::Mode::kTrain, &bc);
  auto bg = nn::BatchNormParams::identity(3);
  bg.gamma.setZero();
  CHECK(nn::batchnorm_backward(Matrix::Zero(6, 3), bp, bc, bg).isZero(0.0));
  CHECK(bg.gamma.isZero(0.0));
}

TEST_CASE("analytic gradients agree with central differences (property)") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 20; ++i) {
    CHECK(testing::conv_gradient_case(rng) < 1e-4);
    CHECK(testing::lstm_gradient_case(rng) < 1e-4);
    CHECK(testing::ffnn_gradient_case(rng) < 1e-4);
    CHECK(testing::batchnorm_gradient_case(rng) < 1e-4);
    CHECK(testing::dropout_gradient_case(rng) < 1e-4);
  }
}

TEST_CASE("large finite inputs never produce NaN or Inf") {
  std::mt19937_64 rng(12);
  const Matrix x = testing::random_matrix(30, 4, rng, 1e3);
  nn::ConvSpec spec{5, 2, 4, 3};
  nn::ConvWeights cw{nn::xavier_init(20, 3, 1), nn::RowVector::Zero(3)};
  CHECK(nn::all_finite(nn::conv1d_forward(x, spec, cw)));
  nn::LstmParams lp{nn::xavier_init(4 + 3, 12, 2), nn::RowVector::Zero(12)};
  CHECK(nn::all_finite(nn::lstm_forward(x, lp, 30)));
  auto bp = nn::BatchNormParams::identity(4);
  CHECK(nn::all_finite(nn::batchnorm_forward(x, bp, nn::Mode::kTrain)));
  CHECK(nn::all_finite(nn::softmax_rows(x)));
}
