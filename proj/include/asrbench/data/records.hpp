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
#include <string>
#include <vector>

#include "asrbench/features/features.hpp"

namespace asrbench::data {

using nn::Matrix;

inline constexpr int kMaxDurationMs = 16700;
inline constexpr int kPadLength = 1670;
inline constexpr int kSamplesPerFile = 64;
inline constexpr std::uint16_t kRecordVersion = 1;

struct Utterance {
  std::int64_t id = 0;
  Matrix features;  // T x 93
  std::string transcript;
  double duration_ms = 0;

  int frame_count() const { return static_cast<int>(features.rows()); }
};

/// Duration implied by a frame count under the default analysis window.
double duration_from_frames(int frames, const features::FeConfig& cfg = {});

/// Keeps utterances of at most 16700 ms (inclusive).
std::vector<Utterance> filter_long(std::vector<Utterance> utterances);
bool within_duration_limit(double duration_ms);

// Record file layout, all little-endian:
//   "ASRB" | u16 version | u32 sample count | u32 feature dim
//   per sample: u32 frames | frames*dim f32 | u32 byte length | UTF-8 text
//   u32 CRC-32 of everything after the header

std::vector<std::uint8_t> encode_record(std::span<const Utterance> samples, int feature_dim);

/// Element ids are assigned as first_id + position.
std::vector<Utterance> decode_record(std::span<const std::uint8_t> bytes, std::int64_t first_id = 0);

std::string shard_name(std::size_t index);

/// Writes shard-00000.rec, shard-00001.rec, ... with `per_file` samples
/// each (the last one may be short). Returns the paths in order.
std::vector<std::filesystem::path> write_records(std::span<const Utterance> utterances,
                                                 const std::filesystem::path& dir,
                                                 int per_file = kSamplesPerFile);

std::vector<Utterance> read_record_file(const std::filesystem::path& path, std::int64_t first_id = 0);

/// Sorted shard paths of a record directory.
std::vector<std::filesystem::path> list_shards(const std::filesystem::path& dir);

/// Reads every shard; element ids are shard_index * 64 + position.
std::vector<Utterance> read_records(std::span<const std::filesystem::path> files);

struct Manifest {
  static constexpr int kVersion = 1;
  std::int64_t element_count = 0;
  double total_duration_ms = 0;
  int feature_dim = features::kFeatureDim;
  std::vector<std::string> shards;
  features::Standardization standardization;
};

void write_manifest(const std::filesystem::path& dir, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& dir);

}  // namespace asrbench::data
