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

#include "asrbench/data/pipeline.hpp"

#include <algorithm>
#include <array>
#include <condition_variable>
#include <numeric>
#include <random>

#include "asrbench/error.hpp"
#include "asrbench/nn/init.hpp"

namespace asrbench::data {

namespace {

constexpr std::array<Preset, 4> kPresets{{
    {"desk", 8, 2, 4},
    {"sys1", 96, 8, 40},
    {"sys2", 240, 16, 100},
    {"sys10", 300, 16, 100},
}};

}  // namespace

void PipelineConfig::validate() const {
  if (reader_count < 1) throw InvalidArgument("reader count must be >= 1");
  if (buffer_capacity < 1) throw InvalidArgument("buffer capacity must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (pad_length < 1) throw InvalidArgument("pad length must be >= 1");
  if (shuffle_buffer < 1) throw InvalidArgument("shuffle buffer must be >= 1");
  if (worker_count < 1) throw InvalidArgument("worker count must be >= 1");
  if (batch_size % worker_count != 0)
    throw InvalidArgument("batch size " + std::to_string(batch_size) + " is not divisible by " +
                          std::to_string(worker_count) + " workers");
}

std::span<const Preset> presets() { return kPresets; }

const Preset& preset(std::string_view name) {
  for (const auto& p : kPresets)
    if (p.name == name) return p;
  throw InvalidArgument("unknown preset '" + std::string(name) + "'");
}

PipelineConfig apply_preset(PipelineConfig cfg, const Preset& p) {
  cfg.batch_size = p.batch_size;
  cfg.reader_count = p.reader_count;
  cfg.buffer_capacity = p.buffer_capacity;
  return cfg;
}

PaddedBatch pad_batch(std::span<const Utterance> elements, int pad_length, const ctc::Alphabet& alphabet) {
  PaddedBatch b;
  b.features.reserve(elements.size());
  for (const auto& u : elements) {
    const int t = u.frame_count();
    if (t > pad_length)
      throw PipelineError("element " + std::to_string(u.id) + " has " + std::to_string(t) +
                          " frames, more than the pad length " + std::to_string(pad_length));
    FeatureMatrix m = FeatureMatrix::Zero(pad_length, u.features.cols());
    m.topRows(t) = u.features.cast<float>();
    b.features.push_back(std::move(m));
    b.lengths.push_back(t);
    try {
      b.labels.push_back(ctc::encode_label(u.transcript, alphabet));
    } catch (const InvalidTranscript& e) {
      throw PipelineError("element " + std::to_string(u.id) + ": " + e.what());
    }
    b.transcripts.push_back(u.transcript);
    b.ids.push_back(u.id);
  }
  return b;
}

struct InputPipeline::Epoch {
  explicit Epoch(std::size_t capacity) : queue(capacity) {}

  BoundedQueue<PaddedBatch> queue;
  std::vector<std::size_t> order;  // file indices in consumption order
  std::vector<std::optional<std::vector<Utterance>>> slots;
  std::size_t next_to_read = 0;
  std::size_t assembled = 0;
  std::size_t lookahead = 2;
  int epoch = 0;
  bool stopping = false;
  std::exception_ptr error;
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::thread> threads;
  std::atomic<std::uint64_t> reader_waits{0};
  std::atomic<std::uint64_t> elements{0};
  std::atomic<std::uint64_t> batches{0};
};

InputPipeline::InputPipeline(std::vector<std::filesystem::path> files, PipelineConfig cfg,
                             const ctc::Alphabet& alphabet)
    : files_(std::move(files)), cfg_(cfg), alphabet_(&alphabet) {
  cfg_.validate();
  if (files_.empty()) throw InvalidArgument("input pipeline needs at least one record file");
}

InputPipeline::~InputPipeline() { stop(); }

void InputPipeline::start_epoch(int epoch, std::int64_t skip_batches) {
  stop();
  epoch_ = std::make_unique<Epoch>(static_cast<std::size_t>(cfg_.buffer_capacity));
  Epoch& e = *epoch_;
  e.order.resize(files_.size());
  std::iota(e.order.begin(), e.order.end(), std::size_t{0});
  std::mt19937_64 rng(nn::mix64(cfg_.shuffle_seed ^ nn::mix64(static_cast<std::uint64_t>(epoch))));
  std::shuffle(e.order.begin(), e.order.end(), rng);
  e.slots.resize(files_.size());
  e.lookahead = static_cast<std::size_t>(2 * cfg_.reader_count);

  for (int r = 0; r < cfg_.reader_count; ++r) e.threads.emplace_back([this, &e] { reader_loop(e); });
  e.epoch = epoch;
  e.threads.emplace_back([this, &e, skip_batches, seed = rng()] { assembler_loop(e, skip_batches, seed); });
}

void InputPipeline::fail(Epoch& e, std::exception_ptr error) {
  {
    std::lock_guard lock(e.mu);
    if (!e.error) e.error = error;
    e.stopping = true;
  }
  e.cv.notify_all();
  e.queue.close();
}

void InputPipeline::reader_loop(Epoch& e) {
  try {
    for (;;) {
      std::size_t pos;
      {
        std::unique_lock lock(e.mu);
        if (e.stopping || e.next_to_read >= e.order.size()) return;
        pos = e.next_to_read++;
        if (pos >= e.assembled + e.lookahead) {
          e.reader_waits.fetch_add(1, std::memory_order_relaxed);
          e.cv.wait(lock, [&] { return e.stopping || pos < e.assembled + e.lookahead; });
          if (e.stopping) return;
        }
      }
      const std::size_t file = e.order[pos];
      auto samples = read_record_file(files_[file], static_cast<std::int64_t>(file) * kSamplesPerFile);
      {
        std::lock_guard lock(e.mu);
        e.slots[pos] = std::move(samples);
      }
      e.cv.notify_all();
    }
  } catch (...) {
    fail(e, std::current_exception());
  }
}

void InputPipeline::assembler_loop(Epoch& e, std::int64_t skip_batches, std::uint64_t seed) {
  try {
    std::mt19937_64 rng(seed);
    std::vector<Utterance> shuffle;
    std::vector<Utterance> pending;
    std::int64_t index = 0;

    auto emit_batch = [&] {
      if (pending.empty()) return true;
      const std::int64_t i = index++;
      if (i < skip_batches) {
        pending.clear();
        return true;
      }
      PaddedBatch b = pad_batch(pending, cfg_.pad_length, *alphabet_);
      b.index = i;
      b.epoch = e.epoch;
      pending.clear();
      const auto n = b.size();
      if (!e.queue.push(std::move(b))) return false;
      e.elements.fetch_add(n, std::memory_order_relaxed);
      e.batches.fetch_add(1, std::memory_order_relaxed);
      return true;
    };
    auto take_random = [&] {
      std::uniform_int_distribution<std::size_t> pick(0, shuffle.size() - 1);
      const std::size_t k = pick(rng);
      std::swap(shuffle[k], shuffle.back());
      pending.push_back(std::move(shuffle.back()));
      shuffle.pop_back();
      if (static_cast<int>(pending.size()) == cfg_.batch_size) return emit_batch();
      return true;
    };

    for (std::size_t pos = 0; pos < e.order.size(); ++pos) {
      std::vector<Utterance> samples;
      {
        std::unique_lock lock(e.mu);
        e.cv.wait(lock, [&] { return e.stopping || e.slots[pos].has_value(); });
        if (e.stopping) return;
        samples = std::move(*e.slots[pos]);
        e.slots[pos].reset();
        e.assembled = pos + 1;
      }
      e.cv.notify_all();
      for (auto& u : samples) {
        if (u.frame_count() > cfg_.pad_length)
          throw PipelineError("element " + std::to_string(u.id) + " exceeds the pad length; filter it first");
        shuffle.push_back(std::move(u));
        if (static_cast<int>(shuffle.size()) >= cfg_.shuffle_buffer && !take_random()) return;
      }
    }
    while (!shuffle.empty())
      if (!take_random()) return;
    if (!emit_batch()) return;
    e.queue.close();
  } catch (...) {
    fail(e, std::current_exception());
  }
}

std::optional<PaddedBatch> InputPipeline::next() {
  if (!epoch_) throw StateError("input pipeline: next() before start_epoch()");
  auto b = epoch_->queue.pop();
  if (!b) {
    std::lock_guard lock(epoch_->mu);
    if (epoch_->error) std::rethrow_exception(epoch_->error);
  }
  return b;
}

void InputPipeline::stop() {
  if (!epoch_) return;
  Epoch& e = *epoch_;
  {
    std::lock_guard lock(e.mu);
    e.stopping = true;
  }
  e.cv.notify_all();
  e.queue.close();
  for (auto& t : e.threads)
    if (t.joinable()) t.join();
  totals_.reader_waits += e.reader_waits.load();
  totals_.producer_waits += e.queue.blocked_pushes();
  totals_.consumer_waits += e.queue.blocked_pops();
  totals_.elements += e.elements.load();
  totals_.batches += e.batches.load();
  epoch_.reset();
}

PipelineStats InputPipeline::stats() const {
  PipelineStats s = totals_;
  if (epoch_) {
    s.reader_waits += epoch_->reader_waits.load();
    s.producer_waits += epoch_->queue.blocked_pushes();
    s.consumer_waits += epoch_->queue.blocked_pops();
    s.elements += epoch_->elements.load();
    s.batches += epoch_->batches.load();
  }
  return s;
}

}  // namespace asrbench::data
