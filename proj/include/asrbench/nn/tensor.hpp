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

#include <Eigen/Dense>

namespace asrbench::nn {

/// Dense row-major 64-bit matrix. One utterance is a [time x features]
/// matrix; a batch is a ragged list of them (see SequenceBatch).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// [B x T_i x F] where every element keeps only its own frames. Padding is
/// a storage concern of the input pipeline and never reaches the layers.
using SequenceBatch = std::vector<Matrix>;

enum class Mode { kTrain, kEval };

/// Sum-reduction across cooperating workers. Implementations must leave the
/// identical reduced result in every participant.
class Collective {
 public:
  virtual ~Collective() = default;
  virtual void sum(std::span<double> values) const = 0;
};

bool all_finite(const Matrix& m);

/// Stacks the rows of every matrix (equal column counts) into one matrix.
Matrix stack_rows(std::span<const Matrix> parts);

/// Inverse of stack_rows for the given per-part row counts.
std::vector<Matrix> split_rows(const Matrix& stacked, std::span<const Eigen::Index> rows);

/// Row-wise softmax with max-subtraction.
Matrix softmax_rows(const Matrix& logits);

}  // namespace asrbench::nn
