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

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "asrbench/data/pipeline.hpp"
#include "asrbench/telemetry/telemetry.hpp"
#include "asrbench/trainer/model.hpp"

namespace asrbench::trainer {

enum class GradReduce { kMean, kSum };

struct DroppedElement {
  std::int64_t id = 0;
  std::string reason;
};

/// Unpadded double-precision inputs of a batch, without elements the model
/// cannot align (input too short or label longer than the output allows).
struct PreparedBatch {
  std::vector<Matrix> inputs;
  std::vector<ctc::LabelSequence> labels;
  std::vector<std::int64_t> ids;
  std::vector<std::string> transcripts;
  std::vector<DroppedElement> dropped;

  std::size_t size() const { return inputs.size(); }
};

PreparedBatch prepare_batch(const data::PaddedBatch& batch, const ModelConfig& cfg);

struct EngineOptions {
  int workers = 1;
  GradReduce reduce = GradReduce::kMean;
  std::uint64_t seed = 1;  // dropout stream
  /// Called on each worker before it starts its shard (timing tests).
  std::function<void(int worker)> before_shard;
};

struct StepResult {
  double loss_sum = 0;
  std::size_t elements = 0;
  double mean_loss() const { return elements ? loss_sum / static_cast<double>(elements) : 0.0; }
};

/// Synchronous data-parallel SGD. The engine plays the coordinator and owns
/// the parameters. K workers compute shard gradients against the same
/// snapshot with batch-norm statistics reduced across all of them, and shard
/// gradients are summed in worker order before one update.
class DataParallelEngine {
 public:
  DataParallelEngine(AcousticModel model, EngineOptions options);
  ~DataParallelEngine();

  DataParallelEngine(const DataParallelEngine&) = delete;
  DataParallelEngine& operator=(const DataParallelEngine&) = delete;

  AcousticModel& model() { return model_; }
  const AcousticModel& model() const { return model_; }
  AdaDeltaState& optimizer() { return optimizer_; }
  const AdaDeltaState& optimizer() const { return optimizer_; }
  const EngineOptions& options() const { return options_; }

  /// Forward/backward over all shards; the aggregate is left in gradient().
  StepResult compute_gradients(const PreparedBatch& batch, std::int64_t iteration);
  const AcousticModel& gradient() const { return gradient_; }

  /// AdaDelta on the aggregate gradient plus the batch-norm running stats.
  void apply_update();

  StepResult step(const PreparedBatch& batch, std::int64_t iteration);

  /// Drops per-worker gradient buffers and cached statistics.
  void release_activations();

  telemetry::BusySource& coordinator_busy() { return *coordinator_busy_; }
  std::vector<const telemetry::BusySource*> busy_sources() const;

 private:
  struct Pool;

  AcousticModel model_;
  AdaDeltaState optimizer_;
  EngineOptions options_;
  AcousticModel gradient_;
  std::vector<AcousticModel> worker_grads_;
  std::vector<nn::BatchNormCache> pending_stats_;
  std::unique_ptr<telemetry::BusySource> coordinator_busy_;
  std::vector<std::unique_ptr<telemetry::BusySource>> worker_busy_;
  std::unique_ptr<Pool> pool_;
};

}  // namespace asrbench::trainer
