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

#include "asrbench/nn/tensor.hpp"

namespace asrbench::nn {

/// Uniform Glorot initialisation in [-sqrt(6/(fan_in+fan_out)), +sqrt(...)].
/// Returns a fan_in x fan_out matrix; identical output for identical seeds.
Matrix xavier_init(Eigen::Index fan_in, Eigen::Index fan_out, std::uint64_t seed);

double xavier_bound(Eigen::Index fan_in, Eigen::Index fan_out);

/// Stateless 64-bit mixer used wherever a reproducible per-unit random
/// stream is needed independently of evaluation order.
std::uint64_t mix64(std::uint64_t x);

/// Uniform double in [0, 1) derived from (seed, index).
double unit_uniform(std::uint64_t seed, std::uint64_t index);

}  // namespace asrbench::nn
