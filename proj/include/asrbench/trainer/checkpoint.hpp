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
#include <filesystem>
#include <span>
#include <vector>

#include "asrbench/metrics/metrics.hpp"
#include "asrbench/trainer/model.hpp"

namespace asrbench::trainer {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainCounters {
  std::int64_t iteration = 0;       // completed batch iterations
  int epoch = 0;                    // epoch in progress
  std::int64_t batch_in_epoch = 0;  // batches of `epoch` already consumed
  double elapsed_minutes = 0;       // since model creation
  std::uint64_t seed = 0;
  std::uint64_t shuffle_seed = 0;
};

struct Checkpoint {
  AcousticModel model;
  AdaDeltaState optimizer;
  TrainCounters counters;
  metrics::AccuracyLog accuracy;
};

// Layout, little-endian: "ASRC" | u32 version | architecture (8 x i32,
// dropout f64) | every trainable tensor then every running statistic as
// (u32 rows, u32 cols, f64 data) | AdaDelta rho, eps and both accumulator
// sets | counters | accuracy log | u32 CRC-32 of all preceding bytes.

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Written to a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace asrbench::trainer
