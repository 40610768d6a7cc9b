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

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "asrbench/ctc/ctc.hpp"
#include "asrbench/data/bounded_queue.hpp"
#include "asrbench/data/records.hpp"

namespace asrbench::data {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PipelineConfig {
  int reader_count = 2;
  int buffer_capacity = 4;  // batches
  int batch_size = 8;       // elements across all workers
  int pad_length = kPadLength;
  std::uint64_t shuffle_seed = 1;
  int shuffle_buffer = 1024;
  int worker_count = 1;

  void validate() const;
};

struct Preset {
  std::string_view name;
  int batch_size;
  int reader_count;
  int buffer_capacity;
};

/// desk, sys1, sys2, sys10.
std::span<const Preset> presets();
const Preset& preset(std::string_view name);
PipelineConfig apply_preset(PipelineConfig cfg, const Preset& p);

struct PaddedBatch {
  std::vector<FeatureMatrix> features;  // pad_length x dim, zero past lengths[i]
  std::vector<int> lengths;
  std::vector<ctc::LabelSequence> labels;
  std::vector<std::string> transcripts;
  std::vector<std::int64_t> ids;
  int epoch = 0;
  std::int64_t index = 0;  // position within the epoch

  std::size_t size() const { return lengths.size(); }
};

PaddedBatch pad_batch(std::span<const Utterance> elements, int pad_length,
                      const ctc::Alphabet& alphabet = ctc::Alphabet::standard());

struct PipelineStats {
  std::uint64_t reader_waits = 0;    // readers held back by the look-ahead limit
  std::uint64_t producer_waits = 0;  // pushes that found the buffer full
  std::uint64_t consumer_waits = 0;  // pops that found the buffer empty
  std::uint64_t elements = 0;
  std::uint64_t batches = 0;
};

/// Readers parse record files concurrently; a single assembler takes the
/// parsed files in a per-epoch seeded order, passes elements through a
/// shuffle buffer, pads them and fills the bounded batch buffer. Batch
/// content depends only on (files, config, epoch), never on thread timing.
class InputPipeline {
 public:
  InputPipeline(std::vector<std::filesystem::path> files, PipelineConfig cfg,
                const ctc::Alphabet& alphabet = ctc::Alphabet::standard());
  ~InputPipeline();

  InputPipeline(const InputPipeline&) = delete;
  InputPipeline& operator=(const InputPipeline&) = delete;

  /// Begins an epoch; the first `skip_batches` batches are assembled but
  /// not delivered (used when resuming mid-epoch).
  void start_epoch(int epoch, std::int64_t skip_batches = 0);

  /// Next batch of the current epoch, nullopt once it is exhausted. Errors
  /// raised by readers are rethrown here.
  std::optional<PaddedBatch> next();

  void stop();

  PipelineStats stats() const;
  const PipelineConfig& config() const { return cfg_; }
  std::size_t file_count() const { return files_.size(); }

 private:
  struct Epoch;

  void reader_loop(Epoch& e);
  void assembler_loop(Epoch& e, std::int64_t skip_batches, std::uint64_t seed);
  void fail(Epoch& e, std::exception_ptr error);

  std::vector<std::filesystem::path> files_;
  PipelineConfig cfg_;
  const ctc::Alphabet* alphabet_;
  std::unique_ptr<Epoch> epoch_;
  PipelineStats totals_;
};

}  // namespace asrbench::data
