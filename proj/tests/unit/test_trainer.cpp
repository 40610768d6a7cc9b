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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "asrbench/error.hpp"
#include "asrbench/trainer/checkpoint.hpp"
#include "asrbench/trainer/engine.hpp"
#include "asrbench/trainer/events.hpp"
#include "asrbench/trainer/model.hpp"
#include "asrbench/trainer/trainer.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"
#include "support/tempdir.hpp"
#include "support/tiny_data.hpp"

using namespace asrbench;
using namespace asrbench::trainer;
using asrbench::testing::TempDir;

namespace {

ModelConfig micro_model() { return {5, 3, 2, 4, 3, 2, 0.2, 30}; }

double inf_norm_relative(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(a[i]));
  }
  return diff / scale;
}

PreparedBatch batch_of(const std::vector<data::Utterance>& utts, const ModelConfig& cfg, int pad = 64) {
  return prepare_batch(data::pad_batch(utts, pad), cfg);
}

std::vector<double> gradient_for(int workers, const PreparedBatch& batch, std::function<void(int)> hook = {}) {
  EngineOptions o;
  o.workers = workers;
  o.seed = 9;
  o.before_shard = std::move(hook);
  DataParallelEngine e(AcousticModel::create(testing::tiny_model(), 5), o);
  e.compute_gradients(batch, 1);
  return flatten_trainable(e.gradient());
}

}  // namespace

TEST_CASE("adadelta update rule") {
  AcousticModel m = AcousticModel::create(micro_model(), 1);
  const auto before = flatten_trainable(m);
  AdaDeltaState s = AdaDeltaState::for_model(m);
  AcousticModel g = AcousticModel::zeros_like(m);
  adadelta_step(m, g, s);
  CHECK(flatten_trainable(m) == before);
  for (const auto& v : s.mean_sq_grad)
    for (double x : v) CHECK(x == 0.0);

  for_each_trainable(g, [](auto& t) { t.setOnes(); });
  adadelta_step(m, g, s);
  const auto after = flatten_trainable(m);
  const double expected = -std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6);
  CHECK(expected == doctest::Approx(-0.004472).epsilon(1e-4));
  for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i] - before[i] == doctest::Approx(expected).epsilon(1e-9));

  // Decay of the squared-gradient accumulator under zero gradients.
  const double eg = s.mean_sq_grad[0][0];
  adadelta_step(m, AcousticModel::zeros_like(m), s);
  CHECK(s.mean_sq_grad[0][0] == doctest::Approx(0.95 * eg));

  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  for_each_trainable(g, [&](auto& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = n01(rng);
  });
  const auto p0 = flatten_trainable(m);
  adadelta_step(m, g, s);
  const auto p1 = flatten_trainable(m);
  const auto gv = flatten_trainable(g);
  for (std::size_t i = 0; i < gv.size(); ++i)
    if (gv[i] != 0) CHECK((p1[i] - p0[i]) * gv[i] < 0);
}

TEST_CASE("model output length and probabilities") {
  CHECK(output_length(ModelConfig::full(), 1670) == 830);
  CHECK(output_length(ModelConfig::full(), 11) == 0);
  const auto cfg = testing::tiny_model();
  const auto m = AcousticModel::create(cfg, 3);
  const auto utts = testing::random_dataset(3, 4);
  for (const auto& u : utts) {
    const Matrix p = infer(m, u.features);
    CHECK(p.rows() == output_length(cfg, u.frame_count()));
    CHECK(p.cols() == 30);
    for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(infer(m, u.features) == p);
  }
  CHECK(infer(m, Matrix::Zero(5, 93)).rows() == 0);
  const auto full = AcousticModel::create(ModelConfig::full(), 1);
  CHECK(full.conv.kernel.rows() == 11 * 93);
  CHECK(full.conv.kernel.cols() == 600);
  CHECK(full.lstm.size() == 5);
  CHECK(full.lstm[1].input_size() == 800);
  CHECK(full.output.weights.cols() == 30);
}

TEST_CASE("shard gradient matches finite differences of the CTC loss") {
  const ModelConfig cfg = micro_model();
  AcousticModel model = AcousticModel::create(cfg, 11);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  for_each_trainable(model, [&](auto& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] += 0.1 * n01(rng);
  });
  std::vector<Matrix> inputs{testing::random_matrix(12, 5, rng), testing::random_matrix(9, 5, rng),
                             testing::random_matrix(14, 5, rng)};
  std::vector<ctc::LabelSequence> labels{{1, 2}, {3}, {4, 5, 6}};
  std::vector<std::int64_t> ids{7, 8, 9};
  ShardInput in{inputs, labels, ids, 3, 21, 1.0};

  AcousticModel grad = AcousticModel::zeros_like(model);
  train_shard(model, in, grad);
  auto loss = [&] {
    AcousticModel scratch = AcousticModel::zeros_like(model);
    return train_shard(model, in, scratch).loss_sum;
  };
  // Round-off in the central difference scales with the loss itself.
  const double noise = 1e-15 * std::abs(loss()) / testing::kFiniteDiffStep;
  const auto analytic = flatten_trainable(grad);
  double worst = 0;
  std::size_t idx = 0;
  for_each_trainable(model, [&](auto& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      const double saved = t.data()[k];
      t.data()[k] = saved + testing::kFiniteDiffStep;
      const double up = loss();
      t.data()[k] = saved - testing::kFiniteDiffStep;
      const double down = loss();
      t.data()[k] = saved;
      const double num = (up - down) / (2 * testing::kFiniteDiffStep);
      const double a = analytic[idx++];
      if (std::abs(a - num) > noise) worst = std::max(worst, testing::relative_error(a, num));
    }
  });
  CHECK(worst < 1e-4);
}

TEST_CASE("data-parallel gradients agree across worker counts") {
  const auto utts = testing::random_dataset(8, 31);
  const auto batch = batch_of(utts, testing::tiny_model());
  REQUIRE(batch.size() == 8);
  const auto g1 = gradient_for(1, batch);

  // K = 1 is the plain single-shard computation.
  AcousticModel model = AcousticModel::create(testing::tiny_model(), 5);
  AcousticModel direct = AcousticModel::zeros_like(model);
  train_shard(model, {batch.inputs, batch.labels, batch.ids, 1, 9, 1.0 / 8.0}, direct);
  CHECK(flatten_trainable(direct) == g1);

  for (int k : {2, 4}) CHECK(inf_norm_relative(g1, gradient_for(k, batch)) < 1e-10);

  // Skewed worker start times do not change the result.
  std::mt19937_64 rng(3);
  const auto plain = gradient_for(4, batch);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<int> delays{0, 1, 2, 3};
    std::shuffle(delays.begin(), delays.end(), rng);
    const auto skewed = gradient_for(4, batch, [&](int w) {
      std::this_thread::sleep_for(std::chrono::milliseconds(3 * delays[static_cast<std::size_t>(w)]));
    });
    CHECK(skewed == plain);
  }
}

TEST_CASE("sum reduction scales the mean gradient by the batch size") {
  const auto batch = batch_of(testing::random_dataset(4, 8), testing::tiny_model());
  EngineOptions o;
  o.reduce = GradReduce::kSum;
  DataParallelEngine sum(AcousticModel::create(testing::tiny_model(), 5), o);
  sum.compute_gradients(batch, 1);
  o.reduce = GradReduce::kMean;
  DataParallelEngine mean(AcousticModel::create(testing::tiny_model(), 5), o);
  mean.compute_gradients(batch, 1);
  const auto a = flatten_trainable(sum.gradient());
  auto b = flatten_trainable(mean.gradient());
  for (double& x : b) x *= 4;
  CHECK(inf_norm_relative(a, b) < 1e-12);
}

TEST_CASE("infeasible elements are dropped before the step") {
  auto utts = testing::random_dataset(3, 14);
  utts[1].features = Matrix::Zero(8, 93);
  utts[2].transcript = "abcdefghijklmnopqrst";
  const auto batch = batch_of(utts, testing::tiny_model());
  CHECK(batch.size() == 1);
  REQUIRE(batch.dropped.size() == 2);
  CHECK(batch.dropped[0].id == 1);
  CHECK(batch.dropped[1].id == 2);
}

TEST_CASE("checkpoint round trip and step equivalence") {
  const auto cfg = testing::tiny_model();
  const auto batch = batch_of(testing::random_dataset(6, 2), cfg);
  DataParallelEngine a(AcousticModel::create(cfg, 1), {});
  a.step(batch, 1);

  Checkpoint c{a.model(), a.optimizer(), {1, 0, 1, 0.5, 1, 2}, {{1, 2.0, 0.5, 0.9}}};
  const auto bytes = encode_checkpoint(c);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(flatten_trainable(back.model) == flatten_trainable(a.model()));
  CHECK(back.model.conv_bn.running_mean == a.model().conv_bn.running_mean);
  CHECK(back.optimizer.mean_sq_grad == a.optimizer().mean_sq_grad);
  CHECK(back.counters.batch_in_epoch == 1);
  CHECK(back.counters.shuffle_seed == 2);
  REQUIRE(back.accuracy.size() == 1);
  CHECK(back.accuracy[0].wer == 0.9);
  CHECK(encode_checkpoint(back) == bytes);

  DataParallelEngine b(back.model, {});
  b.optimizer() = back.optimizer;
  a.step(batch, 2);
  b.step(batch, 2);
  CHECK(flatten_trainable(a.model()) == flatten_trainable(b.model()));

  auto bad = bytes;
  bad[bad.size() / 2] ^= 1;
  CHECK_THROWS_AS(decode_checkpoint(bad), ChecksumError);
  bad = bytes;
  bad[0] = 'Z';
  CHECK_THROWS_AS(decode_checkpoint(bad), BadMagic);
  CHECK_THROWS_AS(decode_checkpoint(std::span(bytes).first(bytes.size() / 2)), TruncatedFile);
  TempDir dir;
  save_checkpoint(dir / "x.ckpt", c);
  CHECK(encode_checkpoint(load_checkpoint(dir / "x.ckpt")) == bytes);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST_CASE("event log CSV round trip and version check") {
  std::vector<Event> ev{{1.5, 0, 1, EventKind::kLoss, 12.25, 8, ""},
                        {2.5, 0, 50, EventKind::kSentence, 0.5, 3, "the \"cat\", sat"},
                        {3, 1, 60, EventKind::kEvalCer, std::nan(""), 4, "x"}};
  std::ostringstream out;
  write_events(out, ev);
  std::istringstream in(out.str());
  const auto back = read_events(in);
  REQUIRE(back.size() == 3);
  CHECK(back[1].text == ev[1].text);
  CHECK(back[0].value1 == 12.25);
  CHECK(std::isnan(back[2].value1));
  CHECK(back[2].kind == EventKind::kEvalCer);

  std::istringstream old("# asrbench-events/0\ntimestamp_ms,epoch,iteration,kind,value1,value2,text\n");
  CHECK_THROWS_AS(read_events(old), UnsupportedFormat);
  std::istringstream junk("# asrbench-events/1\ntimestamp_ms,epoch,iteration,kind,value1,value2,text\n1,2,3,bogus,0,0,\n");
  CHECK_THROWS_AS(read_events(junk), DataError);
}

TEST_CASE("configuration errors") {
  TrainConfig cfg;
  cfg.workers = 3;
  cfg.pipeline.batch_size = 8;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.workers = 2;
  CHECK_NOTHROW(cfg.validate());
  cfg.eval_beam_width = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("state machine intervals and resume") {
  TempDir dir;
  const auto utts = testing::random_dataset(40, 77);
  const auto files = data::write_records(utts, dir / "rec", 16);
  TrainConfig cfg;
  cfg.model = testing::tiny_model();
  cfg.pipeline.batch_size = 2;
  cfg.pipeline.pad_length = 64;
  cfg.max_epochs = 3;
  cfg.eval_beam_width = 4;
  cfg.sentence_interval = 5;
  cfg.checkpoint_interval = 25;
  cfg.checkpoint_dir = dir / "ckpt";
  std::vector<data::Utterance> valid(utts.begin(), utts.begin() + 3);
  TrainData td{files, valid, dictionary_from(std::span<const data::Utterance>(utts))};

  EventLog full;
  const auto r = Trainer(cfg, td, full).run();
  CHECK(r.iterations == 60);
  CHECK(r.epochs_completed == 3);
  CHECK(r.reason == StopReason::kMaxEpochs);
  std::vector<std::int64_t> sentences, checkpoints;
  for (const auto& e : full.of_kind(EventKind::kSentence)) sentences.push_back(e.iteration);
  for (const auto& e : full.of_kind(EventKind::kCheckpoint)) checkpoints.push_back(e.iteration);
  CHECK(sentences == std::vector<std::int64_t>{5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60});
  CHECK(checkpoints == std::vector<std::int64_t>{25, 50});
  CHECK(full.of_kind(EventKind::kEvalCer).size() == 3);
  CHECK(r.accuracy.size() == 3);
  for (const auto& e : full.of_kind(EventKind::kLoss)) CHECK(std::isfinite(e.value1));

  // Stop early, then resume from the iteration-25 checkpoint.
  cfg.checkpoint_dir = dir / "ckpt2";
  cfg.max_iterations = 30;
  EventLog part;
  const auto stopped = Trainer(cfg, td, part).run();
  CHECK(stopped.reason == StopReason::kMaxIterations);
  CHECK(stopped.iterations == 30);

  cfg.max_iterations = 0;
  EventLog resumed;
  Trainer t(cfg, td, resumed);
  t.resume(dir / "ckpt2" / "checkpoint-000025.ckpt");
  const auto r2 = t.run();
  CHECK(r2.iterations == 60);
  std::vector<double> a, b;
  for (const auto& e : full.of_kind(EventKind::kLoss))
    if (e.iteration > 25) a.push_back(e.value1);
  for (const auto& e : resumed.of_kind(EventKind::kLoss)) b.push_back(e.value1);
  CHECK(a == b);
  CHECK(flatten_trainable(r2.final_state.model) == flatten_trainable(r.final_state.model));
  CHECK(r2.accuracy.size() == 3);
}

TEST_CASE("tta target stops training") {
  TempDir dir;
  const auto utts = testing::random_dataset(8, 5);
  const auto files = data::write_records(utts, dir / "rec");
  TrainConfig cfg;
  cfg.model = testing::tiny_model();
  cfg.pipeline.batch_size = 4;
  cfg.pipeline.pad_length = 64;
  cfg.max_epochs = 10;
  cfg.eval_beam_width = 2;
  cfg.tta_target = TtaTarget{metrics::Metric::kCer, 10.0};  // any CER reaches this
  cfg.tta_window = 2;
  EventLog log;
  const auto r = Trainer(cfg, {files, utts, dictionary_from(std::span<const data::Utterance>(utts))}, log).run();
  CHECK(r.reason == StopReason::kTtaReached);
  CHECK(r.epochs_completed == 2);
  REQUIRE(r.tta_minutes.has_value());
  CHECK(*r.tta_minutes == r.accuracy[1].minutes);
}

TEST_CASE("interrupt flag stops with a final checkpoint") {
  TempDir dir;
  const auto utts = testing::random_dataset(8, 6);
  const auto files = data::write_records(utts, dir / "rec");
  std::atomic<bool> flag{true};
  TrainConfig cfg;
  cfg.model = testing::tiny_model();
  cfg.pipeline.batch_size = 2;
  cfg.pipeline.pad_length = 64;
  cfg.interrupt = &flag;
  cfg.checkpoint_dir = dir / "ckpt";
  EventLog log;
  const auto r = Trainer(cfg, {files, {}, {}}, log).run();
  CHECK(r.reason == StopReason::kInterrupted);
  CHECK(r.iterations == 1);
  CHECK(std::filesystem::exists(r.final_checkpoint));
  CHECK(load_checkpoint(r.final_checkpoint).counters.iteration == 1);
}
