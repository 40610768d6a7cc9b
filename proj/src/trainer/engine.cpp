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

#include "asrbench/trainer/engine.hpp"

#include <barrier>

#include "asrbench/error.hpp"

namespace asrbench::trainer {

namespace {

/// Sum-allreduce over a fixed set of threads: each posts its vector, and
/// after a barrier every participant adds all slots in worker order so all
/// of them hold bit-identical results.
class BarrierReduce {
 public:
  explicit BarrierReduce(int parties) : barrier_(parties), slots_(static_cast<std::size_t>(parties)) {}

  void sum(int rank, std::span<double> values) {
    slots_[static_cast<std::size_t>(rank)].assign(values.begin(), values.end());
    barrier_.arrive_and_wait();
    for (std::size_t k = 0; k < values.size(); ++k) {
      double acc = 0;
      for (const auto& slot : slots_)
        if (slot.size() == values.size()) acc += slot[k];
      values[k] = acc;
    }
    barrier_.arrive_and_wait();
  }

  void leave() { barrier_.arrive_and_drop(); }

 private:
  std::barrier<> barrier_;
  std::vector<std::vector<double>> slots_;
};

class RankCollective : public nn::Collective {
 public:
  RankCollective(BarrierReduce& reduce, int rank) : reduce_(reduce), rank_(rank) {}
  void sum(std::span<double> values) const override { reduce_.sum(rank_, values); }

 private:
  BarrierReduce& reduce_;
  int rank_;
};

void add_into(AcousticModel& dst, const AcousticModel& src) {
  std::vector<const double*> from;
  for_each_trainable(src, [&](const auto& t) { from.push_back(t.data()); });
  std::size_t i = 0;
  for_each_trainable(dst, [&](auto& t) {
    const double* s = from[i++];
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] += s[k];
  });
}

}  // namespace

PreparedBatch prepare_batch(const data::PaddedBatch& batch, const ModelConfig& cfg) {
  PreparedBatch out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int frames = batch.lengths[i];
    const int available = output_length(cfg, frames);
    const int needed = ctc::min_frames(batch.labels[i]);
    if (available == 0) {
      out.dropped.push_back({batch.ids[i], "input of " + std::to_string(frames) + " frames is too short"});
      continue;
    }
    if (available < needed) {
      out.dropped.push_back({batch.ids[i], "label needs " + std::to_string(needed) + " frames, only " +
                                               std::to_string(available) + " available"});
      continue;
    }
    out.inputs.push_back(batch.features[i].topRows(frames).cast<double>());
    out.labels.push_back(batch.labels[i]);
    out.ids.push_back(batch.ids[i]);
    out.transcripts.push_back(batch.transcripts[i]);
  }
  return out;
}

struct DataParallelEngine::Pool {
  std::mutex mu;
  std::condition_variable work_cv;
  std::condition_variable done_cv;
  std::uint64_t generation = 0;
  int pending = 0;
  bool quit = false;
  std::function<void(int)> job;
  std::vector<std::exception_ptr> errors;
  std::vector<std::thread> threads;

  explicit Pool(int workers) : errors(static_cast<std::size_t>(workers)) {
    for (int k = 0; k < workers; ++k) threads.emplace_back([this, k] { loop(k); });
  }

  ~Pool() {
    {
      std::lock_guard lock(mu);
      quit = true;
    }
    work_cv.notify_all();
    for (auto& t : threads) t.join();
  }

  void loop(int rank) {
    std::uint64_t seen = 0;
    for (;;) {
      std::function<void(int)> task;
      {
        std::unique_lock lock(mu);
        work_cv.wait(lock, [&] { return quit || generation != seen; });
        if (quit) return;
        seen = generation;
        task = job;
      }
      try {
        task(rank);
      } catch (...) {
        errors[static_cast<std::size_t>(rank)] = std::current_exception();
      }
      {
        std::lock_guard lock(mu);
        --pending;
      }
      done_cv.notify_one();
    }
  }

  void run(std::function<void(int)> task) {
    {
      std::lock_guard lock(mu);
      job = std::move(task);
      pending = static_cast<int>(threads.size());
      for (auto& e : errors) e = nullptr;
      ++generation;
    }
    work_cv.notify_all();
    std::unique_lock lock(mu);
    done_cv.wait(lock, [&] { return pending == 0; });
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
};

DataParallelEngine::DataParallelEngine(AcousticModel model, EngineOptions options)
    : model_(std::move(model)), options_(std::move(options)) {
  if (options_.workers < 1) throw InvalidArgument("worker count must be >= 1");
  optimizer_ = AdaDeltaState::for_model(model_);
  coordinator_busy_ = std::make_unique<telemetry::BusySource>("coordinator");
  for (int k = 0; k < options_.workers; ++k)
    worker_busy_.push_back(std::make_unique<telemetry::BusySource>("worker" + std::to_string(k)));
  if (options_.workers > 1) pool_ = std::make_unique<Pool>(options_.workers);
}

DataParallelEngine::~DataParallelEngine() = default;

std::vector<const telemetry::BusySource*> DataParallelEngine::busy_sources() const {
  std::vector<const telemetry::BusySource*> out{coordinator_busy_.get()};
  for (const auto& w : worker_busy_) out.push_back(w.get());
  return out;
}

StepResult DataParallelEngine::compute_gradients(const PreparedBatch& batch, std::int64_t iteration) {
  const int workers = options_.workers;
  const std::size_t n = batch.size();
  if (n == 0) throw InvalidArgument("compute_gradients: empty batch");

  std::vector<std::size_t> begin(static_cast<std::size_t>(workers) + 1, 0);
  for (int k = 0; k < workers; ++k) {
    const std::size_t share = n / workers + (static_cast<std::size_t>(k) < n % workers ? 1 : 0);
    begin[static_cast<std::size_t>(k) + 1] = begin[static_cast<std::size_t>(k)] + share;
  }
  const double scale = options_.reduce == GradReduce::kMean ? 1.0 / static_cast<double>(n) : 1.0;

  worker_grads_.resize(static_cast<std::size_t>(workers));
  std::vector<ShardResult> results(static_cast<std::size_t>(workers));
  {
    telemetry::BusyScope busy(coordinator_busy_.get());
    for (auto& g : worker_grads_) g = AcousticModel::zeros_like(model_);
  }

  auto shard_input = [&](int k) {
    const auto b = begin[static_cast<std::size_t>(k)];
    const auto e = begin[static_cast<std::size_t>(k) + 1];
    ShardInput in;
    in.inputs = std::span(batch.inputs).subspan(b, e - b);
    in.labels = std::span(batch.labels).subspan(b, e - b);
    in.element_ids = std::span(batch.ids).subspan(b, e - b);
    in.iteration = iteration;
    in.seed = options_.seed;
    in.loss_scale = scale;
    return in;
  };

  if (workers == 1) {
    if (options_.before_shard) options_.before_shard(0);
    telemetry::BusyScope busy(worker_busy_[0].get());
    results[0] = train_shard(model_, shard_input(0), worker_grads_[0]);
  } else {
    BarrierReduce reduce(workers);
    pool_->run([&](int k) {
      try {
        if (options_.before_shard) options_.before_shard(k);
        telemetry::BusyScope busy(worker_busy_[static_cast<std::size_t>(k)].get());
        RankCollective collective(reduce, k);
        results[static_cast<std::size_t>(k)] =
            train_shard(model_, shard_input(k), worker_grads_[static_cast<std::size_t>(k)], &collective);
      } catch (...) {
        reduce.leave();
        throw;
      }
    });
  }

  telemetry::BusyScope busy(coordinator_busy_.get());
  gradient_ = std::move(worker_grads_[0]);
  for (int k = 1; k < workers; ++k) add_into(gradient_, worker_grads_[static_cast<std::size_t>(k)]);
  worker_grads_.clear();
  StepResult out;
  for (const auto& r : results) {
    out.loss_sum += r.loss_sum;
    out.elements += r.elements;
  }
  pending_stats_ = std::move(results[0].bn_stats);
  return out;
}

void DataParallelEngine::apply_update() {
  if (pending_stats_.empty()) throw StateError("apply_update without compute_gradients");
  telemetry::BusyScope busy(coordinator_busy_.get());
  adadelta_step(model_, gradient_, optimizer_);
  update_running_stats(model_, pending_stats_);
  pending_stats_.clear();
}

StepResult DataParallelEngine::step(const PreparedBatch& batch, std::int64_t iteration) {
  auto r = compute_gradients(batch, iteration);
  apply_update();
  return r;
}

void DataParallelEngine::release_activations() {
  worker_grads_.clear();
  worker_grads_.shrink_to_fit();
  pending_stats_.clear();
  gradient_ = AcousticModel{};
}

}  // namespace asrbench::trainer
