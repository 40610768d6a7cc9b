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

#include "asrbench/nn/tensor.hpp"

#include <cmath>

#include "asrbench/error.hpp"

namespace asrbench::nn {

bool all_finite(const Matrix& m) { return m.allFinite(); }

Matrix stack_rows(std::span<const Matrix> parts) {
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  for (const auto& p : parts) {
    if (p.rows() == 0) continue;
    if (cols >= 0 && p.cols() != cols) throw InvalidArgument("stack_rows: column mismatch");
    cols = p.cols();
    rows += p.rows();
  }
  if (cols < 0) cols = parts.empty() ? 0 : parts.front().cols();
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    if (p.rows() == 0) continue;
    out.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

std::vector<Matrix> split_rows(const Matrix& stacked, std::span<const Eigen::Index> rows) {
  std::vector<Matrix> out;
  out.reserve(rows.size());
  Eigen::Index at = 0;
  for (Eigen::Index r : rows) {
    if (at + r > stacked.rows()) throw InvalidArgument("split_rows: row counts exceed input");
    out.emplace_back(stacked.middleRows(at, r));
    at += r;
  }
  if (at != stacked.rows()) throw InvalidArgument("split_rows: row counts do not cover input");
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double peak = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - peak).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace asrbench::nn
