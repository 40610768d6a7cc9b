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

#include "asrbench/cli/app.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asrbench/cli/report.hpp"
#include "asrbench/data/corpus.hpp"
#include "asrbench/data/pipeline.hpp"
#include "asrbench/data/records.hpp"
#include "asrbench/error.hpp"
#include "asrbench/trainer/checkpoint.hpp"
#include "asrbench/trainer/trainer.hpp"
#include "json.hpp"

namespace asrbench::cli {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};
static_assert(std::atomic<bool>::is_always_lock_free);

extern "C" void on_sigint(int) {
  g_interrupted.store(true);
  std::signal(SIGINT, SIG_DFL);
}

class SigintGuard {
 public:
  SigintGuard() {
    g_interrupted.store(false);
    previous_ = std::signal(SIGINT, on_sigint);
  }
  ~SigintGuard() { std::signal(SIGINT, previous_); }
  SigintGuard(const SigintGuard&) = delete;
  SigintGuard& operator=(const SigintGuard&) = delete;

 private:
  void (*previous_)(int) = SIG_DFL;
};

std::optional<int> thread_cap() {
  const char* env = std::getenv("ASRBENCH_THREADS");
  if (!env || !*env) return std::nullopt;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 4096) throw InvalidArgument(std::string("ASRBENCH_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<int>(v);
}

std::vector<data::Utterance> load_records_dir(const fs::path& dir) {
  const auto shards = data::list_shards(dir);
  if (shards.empty()) throw DataError("no record shards in " + dir.string());
  return data::read_records(shards);
}

// --- synth-data ------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int count = 10;
  std::uint64_t seed = 1;
  std::string vocab;
  int min_words = 1;
  int max_words = 8;
  double snr_db = std::numeric_limits<double>::infinity();
};

void cmd_synth(const SynthArgs& a) {
  if (a.count < 1) throw InvalidArgument("--count must be >= 1");
  const auto vocab = a.vocab.empty() ? data::default_vocabulary() : data::read_vocabulary(a.vocab);
  data::SynthConfig cfg;
  cfg.utterance_count = a.count;
  cfg.seed = a.seed;
  cfg.min_words = a.min_words;
  cfg.max_words = a.max_words;
  cfg.snr_db = a.snr_db;
  const auto corpus = data::synth_corpus(vocab, cfg);
  data::write_corpus(a.out, corpus);
  std::printf("wrote %zu utterances to %s\n", corpus.size(), a.out.c_str());
}

// --- extract ---------------------------------------------------------------

struct ExtractArgs {
  std::string in;
  std::string out;
};

void cmd_extract(const ExtractArgs& a) {
  const auto report = data::extract_corpus(a.in, a.out);
  std::printf("%lld elements in %zu shards\n", static_cast<long long>(report.elements), report.shards.size());
  if (report.filtered_long > 0)
    std::printf("%lld utterances longer than %d ms left out\n", static_cast<long long>(report.filtered_long),
                data::kMaxDurationMs);
  if (!report.skipped.empty()) {
    std::printf("%zu files skipped (listed in %s)\n", report.skipped.size(), (fs::path(a.out) / "skip.txt").c_str());
    for (const auto& [file, why] : report.skipped) std::fprintf(stderr, "skipped %s: %s\n", file.c_str(), why.c_str());
  }
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string records;
  std::string out;
  std::string validation;
  std::string preset = "desk";
  std::string model = "desk";
  std::optional<int> batch;
  std::optional<int> readers;
  std::optional<int> buffer;
  int workers = 1;
  int beam_width_eval = 256;
  std::string grad_reduce = "mean";
  int max_epochs = 10;
  double max_minutes = std::numeric_limits<double>::infinity();
  std::int64_t max_iterations = 0;
  std::string tta_target;
  int tta_window = 3;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> shuffle_seed;
  int pad_length = data::kPadLength;
  int sentence_interval = 50;
  int checkpoint_interval = 250;
  std::string resume;
  bool no_telemetry = false;
  double telemetry_window_ms = 30;
  bool status = false;
  bool dry_run = false;
};

nlohmann::json describe(const trainer::TrainConfig& c, const TrainArgs& a) {
  return {
      {"records", a.records},
      {"validation", a.validation.empty() ? a.records : a.validation},
      {"preset", a.preset},
      {"model",
       {{"feature_dim", c.model.feature_dim},
        {"conv_width", c.model.conv_width},
        {"conv_stride", c.model.conv_stride},
        {"conv_out", c.model.conv_out},
        {"lstm_size", c.model.lstm_size},
        {"lstm_layers", c.model.n_lstm},
        {"dropout", c.model.dropout},
        {"classes", c.model.n_classes}}},
      {"batch", c.pipeline.batch_size},
      {"readers", c.pipeline.reader_count},
      {"buffer", c.pipeline.buffer_capacity},
      {"pad_length", c.pipeline.pad_length},
      {"workers", c.workers},
      {"grad_reduce", c.reduce == trainer::GradReduce::kMean ? "mean" : "sum"},
      {"beam_width_eval", c.eval_beam_width},
      {"max_epochs", c.max_epochs},
      {"max_minutes", std::isfinite(c.max_minutes) ? nlohmann::json(c.max_minutes) : nlohmann::json(nullptr)},
      {"max_iterations", c.max_iterations},
      {"tta_target", c.tta_target ? nlohmann::json(format_tta_target(*c.tta_target)) : nlohmann::json(nullptr)},
      {"tta_window", c.tta_window},
      {"seed", c.seed},
      {"shuffle_seed", c.pipeline.shuffle_seed},
      {"resume", a.resume},
  };
}

void cmd_train(const TrainArgs& a) {
  trainer::TrainConfig cfg;
  if (a.model == "full") cfg.model = trainer::ModelConfig::full();
  cfg.pipeline = data::apply_preset(cfg.pipeline, data::preset(a.preset));
  if (a.batch) cfg.pipeline.batch_size = *a.batch;
  if (a.readers) cfg.pipeline.reader_count = *a.readers;
  if (a.buffer) cfg.pipeline.buffer_capacity = *a.buffer;
  cfg.pipeline.pad_length = a.pad_length;
  cfg.pipeline.shuffle_seed = a.shuffle_seed.value_or(a.seed);
  cfg.workers = a.workers;
  if (const auto cap = thread_cap(); cap && cfg.workers > *cap) {
    int k = *cap;
    while (k > 1 && cfg.pipeline.batch_size % k != 0) --k;
    std::fprintf(stderr, "ASRBENCH_THREADS=%d: using %d workers instead of %d\n", *cap, k, cfg.workers);
    cfg.workers = k;
  }
  cfg.reduce = a.grad_reduce == "sum" ? trainer::GradReduce::kSum : trainer::GradReduce::kMean;
  cfg.eval_beam_width = a.beam_width_eval;
  cfg.max_epochs = a.max_epochs;
  cfg.max_minutes = a.max_minutes;
  cfg.max_iterations = a.max_iterations;
  if (!a.tta_target.empty()) cfg.tta_target = parse_tta_target(a.tta_target);
  cfg.tta_window = a.tta_window;
  cfg.seed = a.seed;
  cfg.sentence_interval = a.sentence_interval;
  cfg.checkpoint_interval = a.checkpoint_interval;
  cfg.telemetry = !a.no_telemetry;
  cfg.telemetry_window_ms = a.telemetry_window_ms;
  cfg.status_line = a.status;
  cfg.validate();

  const auto shards = data::list_shards(a.records);
  if (shards.empty()) throw DataError("no record shards in " + a.records);
  if (fs::exists(fs::path(a.records) / "manifest.json")) {
    const auto m = data::read_manifest(a.records);
    if (m.feature_dim != cfg.model.feature_dim)
      throw DataError("records have " + std::to_string(m.feature_dim) + " features, model expects " +
                      std::to_string(cfg.model.feature_dim));
  }
  trainer::TrainData td;
  td.train_files = shards;
  const auto train_utts = data::read_records(shards);
  td.dictionary = trainer::dictionary_from(std::span<const data::Utterance>(train_utts));
  td.validation = a.validation.empty() ? train_utts : load_records_dir(a.validation);

  const fs::path out(a.out);
  std::error_code ec;
  fs::create_directories(out / "checkpoints", ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  cfg.checkpoint_dir = out / "checkpoints";
  {
    std::ofstream f(out / "config.json");
    f << describe(cfg, a).dump(2) << '\n';
    if (!f) throw IoError("cannot write " + (out / "config.json").string());
  }
  if (a.dry_run) {
    std::printf("configuration written to %s\n", (out / "config.json").c_str());
    return;
  }

  trainer::EventLog log(out / "events.csv", !a.resume.empty());
  SigintGuard guard;
  cfg.interrupt = &g_interrupted;
  trainer::Trainer t(cfg, std::move(td), log);
  if (!a.resume.empty()) t.resume(fs::path(a.resume));
  const auto r = t.run();

  if (cfg.telemetry) {
    telemetry::UtilizationTrace trace;
    if (!a.resume.empty() && fs::exists(out / "telemetry.csv")) {
      std::ifstream in(out / "telemetry.csv");
      trace = telemetry::parse_trace(in);
    }
    trace.insert(trace.end(), r.trace.begin(), r.trace.end());
    std::ofstream f(out / "telemetry.csv");
    telemetry::emit_trace(trace, f);
    if (!f) throw IoError("cannot write " + (out / "telemetry.csv").string());
  }

  std::printf("stopped: %s after %lld iterations (%d epochs this run)\n", std::string(trainer::to_string(r.reason)).c_str(),
              static_cast<long long>(r.iterations), r.epochs_completed);
  if (!r.accuracy.empty())
    std::printf("last evaluation: epoch %d, CER %.2f%%, WER %.2f%% at %.2f min\n", r.accuracy.back().epoch,
                100 * r.accuracy.back().cer, 100 * r.accuracy.back().wer, r.accuracy.back().minutes);
  if (cfg.tta_target)
    std::printf("TTA %s: %s min\n", format_tta_target(*cfg.tta_target).c_str(), format_cell(r.tta_minutes, 2).c_str());
  std::printf("final checkpoint: %s\n", r.final_checkpoint.c_str());
}

// --- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string records;
  std::vector<int> widths{256};
  std::string dictionary;
  std::string csv;
};

void cmd_evaluate(const EvaluateArgs& a) {
  for (int w : a.widths)
    if (w < 1) throw InvalidArgument("beam width must be >= 1");
  const auto ckpt = trainer::load_checkpoint(a.checkpoint);
  const auto utts = load_records_dir(a.records);
  const auto dict = a.dictionary.empty() ? trainer::dictionary_from(std::span<const data::Utterance>(utts))
                                         : decoder::PrefixTree::build(data::read_vocabulary(a.dictionary));
  std::optional<std::ofstream> csv;
  if (!a.csv.empty()) {
    csv.emplace(a.csv);
    if (!*csv) throw IoError("cannot write " + a.csv);
    *csv << "beam_width,seconds,wer,cer\n";
  }
  std::printf("%10s %10s %8s %8s\n", "beam", "seconds", "WER%", "CER%");
  for (int w : a.widths) {
    const auto r = trainer::evaluate(ckpt.model, utts, dict, w);
    std::printf("%10d %10.3f %8.2f %8.2f\n", w, r.wall_ms / 1000.0, 100 * r.wer, 100 * r.cer);
    if (csv) *csv << w << ',' << r.wall_ms / 1000.0 << ',' << r.wer << ',' << r.cer << '\n';
  }
  if (csv && !*csv) throw IoError("failed writing " + a.csv);
}

// --- report ----------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> logs;
  std::string out;
  std::vector<std::string> targets{"cer=10", "wer=20"};
  std::string baseline;
  int tta_window = 3;
  double sigma = 10.0;
};

void cmd_report(const ReportArgs& a) {
  std::vector<RunLog> runs;
  for (const auto& p : a.logs) runs.push_back(load_run(p));
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (runs[j].name == runs[i].name) runs[i].name += "#" + std::to_string(i);

  ReportOptions opts;
  for (const auto& t : a.targets) opts.targets.push_back(parse_tta_target(t));
  opts.tta_window = a.tta_window;
  opts.sigma = a.sigma;
  if (!a.baseline.empty()) {
    auto it = std::find_if(runs.begin(), runs.end(), [&](const RunLog& r) { return r.name == a.baseline; });
    if (it == runs.end()) throw InvalidArgument("baseline run '" + a.baseline + "' is not among the logs");
    opts.baseline = static_cast<std::size_t>(it - runs.begin());
  }
  const auto files = write_report(runs, a.out, opts);

  std::printf("%-12s", "target");
  for (const auto& r : runs) std::printf(" %18s", r.name.c_str());
  std::printf("\n");
  for (const auto& row : tta_table(runs, opts.targets, opts.tta_window, opts.baseline)) {
    std::printf("%-12s", format_tta_target(row.target).c_str());
    for (const auto& c : row.cells) {
      const std::string cell = format_cell(c.minutes, 2) + " (" + format_cell(c.relative_percent, 0) + "%)";
      std::printf(" %18s", c.minutes ? cell.c_str() : "NA");
    }
    std::printf("\n");
  }
  std::printf("baseline: %s; %zu files in %s\n", runs[opts.baseline].name.c_str(), files.size(), a.out.c_str());
}

int report_error(const char* kind, const std::exception& e, int code) {
  std::fprintf(stderr, "asrbench: %s: %s\n", kind, e.what());
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Desk-scale ASR training benchmark"};
  app.name("asrbench");
  app.require_subcommand(1);
  std::function<void()> action;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-data", "Generate a synthetic tone corpus");
  s->add_option("out", synth.out, "Output directory")->required();
  s->add_option("--count", synth.count, "Number of utterances")->capture_default_str();
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  s->add_option("--vocab", synth.vocab, "Word list, one word per line");
  s->add_option("--min-words", synth.min_words)->capture_default_str();
  s->add_option("--max-words", synth.max_words)->capture_default_str();
  s->add_option("--snr-db", synth.snr_db, "Additive noise level; inf disables noise");
  s->callback([&] { action = [&] { cmd_synth(synth); }; });

  ExtractArgs extract;
  auto* x = app.add_subcommand("extract", "Extract features into record shards");
  x->add_option("in", extract.in, "Corpus directory")->required();
  x->add_option("out", extract.out, "Record directory")->required();
  x->callback([&] { action = [&] { cmd_extract(extract); }; });

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train with the benchmark state machine");
  t->add_option("records", train.records, "Record directory")->required();
  t->add_option("--out", train.out, "Run directory for events, checkpoints and telemetry")->required();
  t->add_option("--validation", train.validation, "Record directory used for evaluation (default: training set)");
  t->add_option("--preset", train.preset, "Platform preset")
      ->check(CLI::IsMember({"desk", "sys1", "sys2", "sys10"}))
      ->capture_default_str();
  t->add_option("--model", train.model, "Model size")->check(CLI::IsMember({"desk", "full"}))->capture_default_str();
  t->add_option("--batch", train.batch, "Elements per iteration across all workers");
  t->add_option("--readers", train.readers, "Reader threads");
  t->add_option("--buffer", train.buffer, "Prefetch buffer size in batches");
  t->add_option("--workers", train.workers, "Data-parallel workers")->capture_default_str();
  t->add_option("--beam-width-eval", train.beam_width_eval, "Beam width for epoch evaluation")->capture_default_str();
  t->add_option("--grad-reduce", train.grad_reduce)->check(CLI::IsMember({"mean", "sum"}))->capture_default_str();
  t->add_option("--max-epochs", train.max_epochs)->capture_default_str();
  t->add_option("--max-minutes", train.max_minutes);
  t->add_option("--max-iterations", train.max_iterations, "0 for no limit")->capture_default_str();
  t->add_option("--tta-target", train.tta_target, "Stop when reached, e.g. cer=10 (percent)");
  t->add_option("--tta-window", train.tta_window)->capture_default_str();
  t->add_option("--seed", train.seed)->capture_default_str();
  t->add_option("--shuffle-seed", train.shuffle_seed, "Defaults to --seed");
  t->add_option("--pad-length", train.pad_length)->capture_default_str();
  t->add_option("--sentence-interval", train.sentence_interval)->capture_default_str();
  t->add_option("--checkpoint-interval", train.checkpoint_interval)->capture_default_str();
  t->add_option("--resume", train.resume, "Checkpoint to continue from");
  t->add_flag("--no-telemetry", train.no_telemetry, "Disable the utilization sampler");
  t->add_option("--telemetry-window-ms", train.telemetry_window_ms)->capture_default_str();
  t->add_flag("--status", train.status, "Live status line on stderr");
  t->add_flag("--dry-run", train.dry_run, "Resolve and write config.json without training");
  t->callback([&] { action = [&] { cmd_train(train); }; });

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "Decode a record set with a checkpoint");
  e->add_option("checkpoint", eval.checkpoint)->required();
  e->add_option("records", eval.records)->required();
  e->add_option("--beam-width", eval.widths, "One or more widths, comma separated")->delimiter(',')->capture_default_str();
  e->add_option("--dictionary", eval.dictionary, "Word list (default: words of the evaluated transcripts)");
  e->add_option("--csv", eval.csv, "Also write results as CSV");
  e->callback([&] { action = [&] { cmd_evaluate(eval); }; });

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Render CSV and SVG reports from event logs");
  r->add_option("logs", rep.logs, "Event logs or run directories")->required();
  r->add_option("--out", rep.out)->required();
  r->add_option("--tta-target", rep.targets, "Targets such as cer=10 (percent)")->capture_default_str();
  r->add_option("--baseline", rep.baseline, "Run name for the relative column (default: first)");
  r->add_option("--tta-window", rep.tta_window)->capture_default_str();
  r->add_option("--sigma", rep.sigma, "Gaussian smoothing width in iterations")->capture_default_str();
  r->callback([&] { action = [&] { cmd_report(rep); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    action();
    if (g_interrupted.load()) std::fprintf(stderr, "asrbench: interrupted; final checkpoint written\n");
    return kExitOk;
  } catch (const InvalidArgument& err) {
    return report_error("usage", err, kExitUsage);
  } catch (const IoError& err) {
    return report_error("i/o", err, kExitIo);
  } catch (const DataError& err) {
    return report_error("data", err, kExitData);
  } catch (const InvalidTranscript& err) {
    return report_error("data", err, kExitData);
  } catch (const InputTooShort& err) {
    return report_error("data", err, kExitData);
  } catch (const InfeasibleLabel& err) {
    return report_error("data", err, kExitData);
  } catch (const std::exception& err) {
    return report_error("error", err, kExitFailure);
  }
}

}  // namespace asrbench::cli
