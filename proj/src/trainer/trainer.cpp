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

#include "asrbench/trainer/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "asrbench/error.hpp"

namespace asrbench::trainer {

namespace {

using Clock = telemetry::Clock;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(' ');
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(' ') - b + 1);
}

std::string checkpoint_name(std::int64_t iteration) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "checkpoint-%06lld.ckpt", static_cast<long long>(iteration));
  return buf;
}

}  // namespace

std::string_view to_string(TrainState s) {
  switch (s) {
    case TrainState::kTraining: return "training";
    case TrainState::kGeneratingSentences: return "generating_sentences";
    case TrainState::kCheckpointing: return "checkpointing";
    case TrainState::kSwappingModel: return "swapping_model";
    case TrainState::kEvaluating: return "evaluating";
  }
  return "?";
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::kMaxEpochs: return "max_epochs";
    case StopReason::kMaxMinutes: return "max_minutes";
    case StopReason::kMaxIterations: return "max_iterations";
    case StopReason::kTtaReached: return "tta_reached";
    case StopReason::kInterrupted: return "interrupted";
    case StopReason::kCondition: return "condition";
  }
  return "?";
}

void TrainConfig::validate() const {
  model.validate();
  if (workers < 1) throw InvalidArgument("workers must be >= 1");
  auto p = pipeline;
  p.worker_count = workers;
  p.validate();
  if (max_epochs < 1) throw InvalidArgument("max epochs must be >= 1");
  if (!(max_minutes > 0)) throw InvalidArgument("max minutes must be positive");
  if (max_iterations < 0) throw InvalidArgument("max iterations must be >= 0");
  if (tta_window < 1) throw InvalidArgument("TTA window must be >= 1");
  if (eval_beam_width < 1) throw InvalidArgument("beam width must be >= 1");
  if (sentence_interval < 1 || checkpoint_interval < 1) throw InvalidArgument("intervals must be >= 1");
  if (tta_target && !(tta_target->rate >= 0)) throw InvalidArgument("TTA target must be non-negative");
}

decoder::PrefixTree dictionary_from(std::span<const std::string> transcripts) {
  std::set<std::string> words;
  for (const auto& t : transcripts)
    for (auto& w : metrics::tokenize_words(t)) words.insert(std::move(w));
  const std::vector<std::string> list(words.begin(), words.end());
  return decoder::PrefixTree::build(list);
}

decoder::PrefixTree dictionary_from(std::span<const data::Utterance> utterances) {
  std::vector<std::string> t;
  for (const auto& u : utterances) t.push_back(u.transcript);
  return dictionary_from(t);
}

EvalReport evaluate(const AcousticModel& model, std::span<const data::Utterance> utterances,
                    const decoder::PrefixTree& dictionary, int beam_width) {
  const auto start = Clock::now();
  EvalReport report;
  metrics::ErrorRateAccumulator acc;
  for (const auto& u : utterances) {
    const Matrix probs = infer(model, u.features);
    std::string hyp;
    if (probs.rows() > 0) hyp = trim(decoder::word_beam_search(probs, dictionary, beam_width).text);
    acc.add(hyp, u.transcript);
    report.hypotheses.push_back(std::move(hyp));
  }
  if (acc.sentences() > 0) {
    report.cer = acc.cer();
    report.wer = acc.wer();
  }
  report.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  return report;
}

Trainer::Trainer(TrainConfig cfg, TrainData data, EventLog& log)
    : cfg_(std::move(cfg)), data_(std::move(data)), log_(log), origin_(Clock::now()) {
  cfg_.validate();
  cfg_.pipeline.worker_count = cfg_.workers;
  if (data_.train_files.empty()) throw InvalidArgument("training needs at least one record file");
  EngineOptions opts;
  opts.workers = cfg_.workers;
  opts.reduce = cfg_.reduce;
  opts.seed = cfg_.seed;
  opts.before_shard = cfg_.before_shard;
  engine_ = std::make_unique<DataParallelEngine>(AcousticModel::create(cfg_.model, cfg_.seed), opts);
  counters_.seed = cfg_.seed;
  counters_.shuffle_seed = cfg_.pipeline.shuffle_seed;
}

Trainer::~Trainer() = default;

void Trainer::resume(const Checkpoint& ckpt) {
  cfg_.model = ckpt.model.config;
  cfg_.seed = ckpt.counters.seed;
  cfg_.pipeline.shuffle_seed = ckpt.counters.shuffle_seed;
  EngineOptions opts = engine_->options();
  opts.seed = cfg_.seed;
  engine_ = std::make_unique<DataParallelEngine>(ckpt.model, opts);
  engine_->optimizer() = ckpt.optimizer;
  counters_ = ckpt.counters;
  accuracy_ = ckpt.accuracy;
  origin_ = Clock::now() - std::chrono::duration_cast<Clock::duration>(
                               std::chrono::duration<double, std::ratio<60>>(ckpt.counters.elapsed_minutes));
}

void Trainer::resume(const std::filesystem::path& checkpoint) { resume(load_checkpoint(checkpoint)); }

double Trainer::minutes() const {
  return std::chrono::duration<double, std::ratio<60>>(Clock::now() - origin_).count();
}

double Trainer::now_ms() const { return std::chrono::duration<double, std::milli>(Clock::now() - origin_).count(); }

void Trainer::emit(EventKind kind, double v1, double v2, std::string text) {
  log_.append({now_ms(), counters_.epoch, counters_.iteration, kind, v1, v2, std::move(text)});
}

void Trainer::enter(TrainState s) {
  if (s == state_) return;
  state_ = s;
  emit(EventKind::kState, static_cast<double>(s), 0, std::string(to_string(s)));
}

Checkpoint Trainer::snapshot() const {
  Checkpoint c{engine_->model(), engine_->optimizer(), counters_, accuracy_};
  c.counters.elapsed_minutes = minutes();
  return c;
}

std::filesystem::path Trainer::write_checkpoint(const std::string& name) {
  if (cfg_.checkpoint_dir.empty()) return {};
  std::error_code ec;
  std::filesystem::create_directories(cfg_.checkpoint_dir, ec);
  const auto path = cfg_.checkpoint_dir / name;
  save_checkpoint(path, snapshot());
  return path;
}

void Trainer::generate_sentence(const PreparedBatch& batch) {
  if (batch.size() == 0) return;
  const Matrix probs = infer(engine_->model(), batch.inputs[0]);
  const std::string hyp = trim(decoder::greedy_decode(probs).text);
  const std::string& ref = batch.transcripts[0];
  const double rate = (hyp.empty() && ref.empty()) ? 0.0 : metrics::cer(hyp, ref);
  emit(EventKind::kSentence, rate, static_cast<double>(batch.ids[0]), hyp);
}

void Trainer::run_evaluation() {
  if (data_.validation.empty()) {
    emit(EventKind::kWarning, 0, 0, "no validation data; evaluation skipped");
    return;
  }
  enter(TrainState::kSwappingModel);
  engine_->release_activations();
  const AcousticModel eval_model = engine_->model();
  enter(TrainState::kEvaluating);
  const auto report = evaluate(eval_model, data_.validation, data_.dictionary, cfg_.eval_beam_width);
  const double at = minutes();
  accuracy_.push_back({counters_.epoch + 1, at, report.cer, report.wer});
  emit(EventKind::kEvalCer, report.cer, at);
  emit(EventKind::kEvalWer, report.wer, at);
  enter(TrainState::kSwappingModel);
  swapped_since_batch_ = true;
}

TrainResult Trainer::run() {
  std::unique_ptr<telemetry::Sampler> sampler;
  if (cfg_.telemetry) {
    telemetry::SamplerOptions so;
    so.window_ms = cfg_.telemetry_window_ms;
    so.origin = origin_;
    if (cfg_.status_line)
      so.status = [this] {
        std::ostringstream s;
        s << "epoch " << counters_.epoch << " iter " << counters_.iteration;
        return s.str();
      };
    sampler = std::make_unique<telemetry::Sampler>(engine_->busy_sources(), so);
    for (const auto& w : sampler->warnings()) emit(EventKind::kWarning, 0, 0, w);
    sampler->start();
  }

  data::InputPipeline pipeline(data_.train_files, cfg_.pipeline);
  TrainResult result;
  std::optional<StopReason> stop;
  auto last_batch = Clock::now();
  state_ = TrainState::kTraining;
  emit(EventKind::kState, static_cast<double>(state_), 0, std::string(to_string(state_)));

  int epoch = counters_.epoch;
  std::int64_t skip = counters_.batch_in_epoch;
  while (!stop) {
    if (epoch >= cfg_.max_epochs) {
      stop = StopReason::kMaxEpochs;
      break;
    }
    counters_.epoch = epoch;
    counters_.batch_in_epoch = skip;
    pipeline.start_epoch(epoch, skip);
    skip = 0;
    while (auto batch = pipeline.next()) {
      enter(TrainState::kTraining);
      const PreparedBatch prepared = prepare_batch(*batch, cfg_.model);
      ++counters_.iteration;
      counters_.batch_in_epoch = batch->index + 1;
      for (const auto& d : prepared.dropped)
        emit(EventKind::kWarning, static_cast<double>(d.id), 0, "dropped element " + std::to_string(d.id) + ": " + d.reason);
      if (prepared.size() > 0) {
        const auto r = engine_->step(prepared, counters_.iteration);
        emit(EventKind::kLoss, r.mean_loss(), static_cast<double>(r.elements));
      }
      const auto now = Clock::now();
      const double dt = std::chrono::duration<double>(now - last_batch).count();
      last_batch = now;
      if (dt > 0) emit(EventKind::kThroughput, static_cast<double>(batch->size()) / dt, swapped_since_batch_ ? 1.0 : 0.0);
      swapped_since_batch_ = false;

      if (counters_.iteration % cfg_.checkpoint_interval == 0) {
        enter(TrainState::kCheckpointing);
        const auto path = write_checkpoint(checkpoint_name(counters_.iteration));
        emit(EventKind::kCheckpoint, static_cast<double>(counters_.iteration), 0, path.filename().string());
      }
      if (counters_.iteration % cfg_.sentence_interval == 0) {
        enter(TrainState::kGeneratingSentences);
        generate_sentence(prepared);
      }
      enter(TrainState::kTraining);

      if (cfg_.interrupt && cfg_.interrupt->load()) stop = StopReason::kInterrupted;
      else if (cfg_.max_iterations > 0 && counters_.iteration >= cfg_.max_iterations) stop = StopReason::kMaxIterations;
      else if (minutes() >= cfg_.max_minutes) stop = StopReason::kMaxMinutes;
      if (stop) break;
    }
    if (stop) break;
    pipeline.stop();

    run_evaluation();
    ++epoch;
    ++result.epochs_completed;
    counters_.epoch = epoch;
    counters_.batch_in_epoch = 0;
    if (cfg_.tta_target) {
      result.tta_minutes = metrics::tta(accuracy_, cfg_.tta_target->rate, cfg_.tta_window, cfg_.tta_target->metric);
      if (result.tta_minutes) stop = StopReason::kTtaReached;
    }
    if (!stop && cfg_.stop_when && cfg_.stop_when(accuracy_)) stop = StopReason::kCondition;
    if (!stop && cfg_.interrupt && cfg_.interrupt->load()) stop = StopReason::kInterrupted;
    if (!stop && minutes() >= cfg_.max_minutes) stop = StopReason::kMaxMinutes;
    enter(TrainState::kTraining);
  }
  pipeline.stop();

  result.reason = *stop;
  result.iterations = counters_.iteration;
  result.accuracy = accuracy_;
  if (!result.tta_minutes && cfg_.tta_target)
    result.tta_minutes = metrics::tta(accuracy_, cfg_.tta_target->rate, cfg_.tta_window, cfg_.tta_target->metric);
  result.final_checkpoint = write_checkpoint("final.ckpt");
  result.final_state = snapshot();
  emit(EventKind::kState, -1, 0, "stopped:" + std::string(to_string(*stop)));
  if (sampler) {
    sampler->stop();
    result.trace = sampler->trace();
  }
  return result;
}

}  // namespace asrbench::trainer
