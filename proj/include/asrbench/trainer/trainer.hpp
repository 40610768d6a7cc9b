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
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "asrbench/data/pipeline.hpp"
#include "asrbench/decoder/decoder.hpp"
#include "asrbench/metrics/metrics.hpp"
#include "asrbench/telemetry/telemetry.hpp"
#include "asrbench/trainer/checkpoint.hpp"
#include "asrbench/trainer/engine.hpp"
#include "asrbench/trainer/events.hpp"

namespace asrbench::trainer {

enum class TrainState { kTraining, kGeneratingSentences, kCheckpointing, kSwappingModel, kEvaluating };

std::string_view to_string(TrainState s);

struct TtaTarget {
  metrics::Metric metric = metrics::Metric::kCer;
  double rate = 0.1;
};

struct TrainConfig {
  ModelConfig model = ModelConfig::desk();
  data::PipelineConfig pipeline;
  int workers = 1;
  GradReduce reduce = GradReduce::kMean;
  std::uint64_t seed = 1;

  int max_epochs = 10;
  double max_minutes = std::numeric_limits<double>::infinity();
  std::int64_t max_iterations = 0;  // 0: no limit
  std::optional<TtaTarget> tta_target;
  int tta_window = 3;

  int eval_beam_width = 256;
  int sentence_interval = 50;
  int checkpoint_interval = 250;

  /// Checkpoints go here; empty keeps them in memory only.
  std::filesystem::path checkpoint_dir;

  bool telemetry = false;
  double telemetry_window_ms = 30;
  bool status_line = false;

  /// Polled after every iteration; when set, training stops and writes a
  /// final checkpoint.
  const std::atomic<bool>* interrupt = nullptr;
  std::function<void(int worker)> before_shard;
  /// Consulted after every evaluation; returning true ends training.
  std::function<bool(const metrics::AccuracyLog&)> stop_when;

  void validate() const;
};

struct TrainData {
  std::vector<std::filesystem::path> train_files;
  std::vector<data::Utterance> validation;
  decoder::PrefixTree dictionary;
};

/// Words of every transcript, for the decoder's dictionary.
decoder::PrefixTree dictionary_from(std::span<const data::Utterance> utterances);
decoder::PrefixTree dictionary_from(std::span<const std::string> transcripts);

enum class StopReason { kMaxEpochs, kMaxMinutes, kMaxIterations, kTtaReached, kInterrupted, kCondition };
std::string_view to_string(StopReason r);

struct TrainResult {
  StopReason reason = StopReason::kMaxEpochs;
  std::int64_t iterations = 0;
  int epochs_completed = 0;
  metrics::AccuracyLog accuracy;
  std::optional<double> tta_minutes;
  Checkpoint final_state;
  std::filesystem::path final_checkpoint;  // empty without a checkpoint_dir
  telemetry::UtilizationTrace trace;
};

struct EvalReport {
  double cer = 0;
  double wer = 0;
  double wall_ms = 0;
  std::vector<std::string> hypotheses;
};

/// Eval-mode model over `utterances`, decoded with word beam search.
EvalReport evaluate(const AcousticModel& model, std::span<const data::Utterance> utterances,
                    const decoder::PrefixTree& dictionary, int beam_width);

/// Runs the training state machine: Training consumes batches; every
/// checkpoint_interval iterations a checkpoint is written, every
/// sentence_interval iterations a greedy transcript is generated, and after
/// every epoch the model is swapped out for evaluation. When intervals
/// coincide the order is checkpoint, sentences, evaluation.
class Trainer {
 public:
  Trainer(TrainConfig cfg, TrainData data, EventLog& log);
  ~Trainer();

  /// Restores parameters, optimizer, counters and the accuracy log.
  void resume(const Checkpoint& ckpt);
  void resume(const std::filesystem::path& checkpoint);

  TrainResult run();

  DataParallelEngine& engine() { return *engine_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  double minutes() const;
  double now_ms() const;
  void emit(EventKind kind, double v1, double v2, std::string text = {});
  void enter(TrainState s);
  Checkpoint snapshot() const;
  std::filesystem::path write_checkpoint(const std::string& name);
  void generate_sentence(const PreparedBatch& batch);
  void run_evaluation();

  TrainConfig cfg_;
  TrainData data_;
  EventLog& log_;
  std::unique_ptr<DataParallelEngine> engine_;
  telemetry::Clock::time_point origin_;
  metrics::AccuracyLog accuracy_;
  TrainCounters counters_;
  TrainState state_ = TrainState::kTraining;
  bool swapped_since_batch_ = false;
};

}  // namespace asrbench::trainer
