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

#include "asrbench/nn/init.hpp"

#include <cmath>
#include <random>

#include "asrbench/error.hpp"

namespace asrbench::nn {

double xavier_bound(Eigen::Index fan_in, Eigen::Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Matrix xavier_init(Eigen::Index fan_in, Eigen::Index fan_out, std::uint64_t seed) {
  if (fan_in < 1 || fan_out < 1) throw InvalidArgument("xavier_init: fan values must be >= 1");
  const double bound = xavier_bound(fan_in, fan_out);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finaliser
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_uniform(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t bits = mix64(seed ^ mix64(index));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace asrbench::nn
