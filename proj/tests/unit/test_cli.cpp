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

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "asrbench/cli/app.hpp"
#include "asrbench/cli/report.hpp"
#include "asrbench/error.hpp"
#include "asrbench/metrics/metrics.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/tempdir.hpp"

using namespace asrbench;
using namespace asrbench::cli;
using asrbench::testing::TempDir;
using trainer::Event;
using trainer::EventKind;

namespace {

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "asrbench");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

RunLog synthetic_run(std::string name, std::vector<double> minutes, std::vector<double> cer) {
  RunLog r{std::move(name), {}, {}};
  for (std::size_t i = 0; i < cer.size(); ++i) {
    r.events.push_back({0, static_cast<int>(i), 0, EventKind::kEvalCer, cer[i], minutes[i], ""});
    r.events.push_back({0, static_cast<int>(i), 0, EventKind::kEvalWer, cer[i] * 2, minutes[i], ""});
  }
  return r;
}

void write_log(const std::filesystem::path& dir, const RunLog& r) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "events.csv");
  trainer::write_events(out, r.events);
}

}  // namespace

TEST_CASE("tta target parsing") {
  const auto t = parse_tta_target("cer=10");
  CHECK(t.metric == metrics::Metric::kCer);
  CHECK(t.rate == doctest::Approx(0.10));
  CHECK(parse_tta_target("WER=12.5").metric == metrics::Metric::kWer);
  CHECK(format_tta_target(parse_tta_target("wer=12.5")) == "wer=12.5");
  for (const char* bad : {"cer", "cer=", "ter=5", "cer=-1", "cer=5x", "cer=nan"})
    CHECK_THROWS_AS(parse_tta_target(bad), InvalidArgument);
}

TEST_CASE("tta table is relative to the baseline and renders NA") {
  std::vector<RunLog> runs{synthetic_run("sys1", {100, 200, 300, 400, 500}, {0.12, 0.09, 0.10, 0.08, 0.07}),
                           synthetic_run("sys2", {50, 100, 150, 200, 250}, {0.12, 0.09, 0.10, 0.08, 0.07}),
                           synthetic_run("slow", {10, 20, 30}, {0.5, 0.4, 0.3})};
  const auto rows = tta_table(runs, {parse_tta_target("cer=10"), parse_tta_target("cer=1")}, 3, 0);
  REQUIRE(rows.size() == 2);
  CHECK(*rows[0].cells[0].minutes == 300);
  CHECK(*rows[0].cells[0].relative_percent == 100.0);
  CHECK(*rows[0].cells[1].relative_percent == doctest::Approx(50.0));
  CHECK_FALSE(rows[0].cells[2].minutes.has_value());
  CHECK(format_cell(rows[0].cells[2].minutes) == "NA");
  CHECK(format_cell(rows[0].cells[2].relative_percent) == "NA");
  for (const auto& c : rows[1].cells) CHECK_FALSE(c.minutes.has_value());
  CHECK_THROWS_AS(tta_table(runs, {}, 3, 7), InvalidArgument);
}

TEST_CASE("accuracy is rebuilt from paired eval events") {
  const auto r = synthetic_run("a", {1, 2}, {0.5, 0.25});
  const auto log = accuracy_from_events(r.events);
  REQUIRE(log.size() == 2);
  CHECK(log[1].epoch == 2);
  CHECK(log[1].minutes == 2);
  CHECK(log[1].wer == 0.5);
  std::vector<Event> orphan{{0, 0, 0, EventKind::kEvalCer, 0.1, 1, ""}};
  CHECK_THROWS_AS(accuracy_from_events(orphan), DataError);
}

TEST_CASE("smoothed loss is the gaussian filter of the raw series") {
  std::vector<Event> ev;
  for (int i = 1; i <= 60; ++i) ev.push_back({0, 0, i, EventKind::kLoss, 100.0 / i + (i % 3), 8, ""});
  ev.push_back({0, 0, 61, EventKind::kThroughput, 5, 0, ""});
  const auto s = smoothed_loss(ev, 10);
  REQUIRE(s.raw.size() == 60);
  CHECK(s.smoothed == metrics::gaussian_smooth(s.raw, 10));
  CHECK(s.iterations.back() == 60);
}

TEST_CASE("svg output is well formed") {
  const auto svg = render_svg({{"a<b", {0, 1, 2}, {1, 4, 9}}, {"empty", {}, {}}}, {"t & t", "x", "y"});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("a&lt;b") != std::string::npos);
  CHECK(svg.find("t &amp; t") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
}

TEST_CASE("report subcommand writes artifacts") {
  TempDir dir;
  write_log(dir / "sys1", synthetic_run("sys1", {100, 200, 300, 400, 500}, {0.12, 0.09, 0.10, 0.08, 0.07}));
  write_log(dir / "sys2", synthetic_run("sys2", {100, 200, 300}, {0.5, 0.4, 0.3}));
  const auto out = dir / "report";
  CHECK(invoke({"report", (dir / "sys1").string(), (dir / "sys2").string(), "--out", out.string(), "--tta-target",
             "cer=10"}) == kExitOk);
  const auto tta = slurp(out / "tta.csv");
  CHECK(tta.find("cer=10,sys1,300.000,100.0") != std::string::npos);
  CHECK(tta.find("cer=10,sys2,NA,NA") != std::string::npos);
  for (const char* f : {"loss.svg", "accuracy.svg", "throughput.svg", "utilization.svg", "loss.csv"})
    CHECK(std::filesystem::exists(out / f));

  CHECK(invoke({"report", (dir / "sys1").string(), "--out", out.string(), "--baseline", "nope"}) == kExitUsage);
  CHECK(invoke({"report", (dir / "missing").string(), "--out", out.string()}) == kExitIo);
  {
    std::ofstream old(dir / "old.csv");
    old << "# asrbench-events/0\ntimestamp_ms,epoch,iteration,kind,value1,value2,text\n";
  }
  CHECK(invoke({"report", (dir / "old.csv").string(), "--out", out.string()}) == kExitData);
}

TEST_CASE("synth-data, extract, train and evaluate from the command line") {
  TempDir dir;
  const auto corpus = (dir / "corpus").string(), again = (dir / "again").string(), rec = (dir / "rec").string();
  CHECK(invoke({"synth-data", corpus, "--count", "6", "--seed", "4"}) == kExitOk);
  CHECK(invoke({"synth-data", again, "--count", "6", "--seed", "4"}) == kExitOk);
  CHECK(slurp(dir / "corpus" / "utt-00003.wav") == slurp(dir / "again" / "utt-00003.wav"));
  CHECK(slurp(dir / "corpus" / "corpus.json") == slurp(dir / "again" / "corpus.json"));
  CHECK(invoke({"synth-data", (dir / "none").string(), "--count", "0"}) == kExitUsage);
  {
    std::ofstream bad(dir / "vocab.txt");
    bad << "caf\xc3\xa9\n";
  }
  CHECK(invoke({"synth-data", (dir / "v").string(), "--vocab", (dir / "vocab.txt").string()}) != kExitOk);

  CHECK(invoke({"extract", corpus, rec}) == kExitOk);
  CHECK(invoke({"extract", (dir / "nothing").string(), (dir / "r2").string()}) != kExitOk);

  const auto dry = (dir / "dry").string();
  CHECK(invoke({"train", rec, "--out", dry, "--preset", "sys1", "--dry-run"}) == kExitOk);
  const auto cfg = nlohmann::json::parse(slurp(dir / "dry" / "config.json"));
  CHECK(cfg["batch"] == 96);
  CHECK(cfg["readers"] == 8);
  CHECK(cfg["buffer"] == 40);
  CHECK(cfg["beam_width_eval"] == 256);
  CHECK(invoke({"train", rec, "--out", dry, "--preset", "sys10", "--batch", "12", "--dry-run"}) == kExitOk);
  CHECK(nlohmann::json::parse(slurp(dir / "dry" / "config.json"))["batch"] == 12);
  CHECK(invoke({"train", rec, "--out", dry, "--batch", "6", "--workers", "4", "--dry-run"}) == kExitUsage);
  CHECK(invoke({"train", rec, "--out", dry, "--preset", "sys3"}) == kExitUsage);
  CHECK(invoke({"train", rec, "--out", dry, "--tta-target", "bleu=3", "--dry-run"}) == kExitUsage);
  CHECK(invoke({"train", (dir / "missing").string(), "--out", dry}) != kExitOk);

  const auto run = dir / "run";
  CHECK(invoke({"train", rec, "--out", run.string(), "--batch", "3", "--max-epochs", "6", "--beam-width-eval", "4",
             "--tta-target", "cer=1000", "--tta-window", "2"}) == kExitOk);
  const auto events = trainer::read_events(run / "events.csv");
  REQUIRE_FALSE(events.empty());
  CHECK(events.back().text == "stopped:tta_reached");
  CHECK(std::filesystem::exists(run / "telemetry.csv"));
  CHECK(std::filesystem::exists(run / "checkpoints" / "final.ckpt"));

  const auto ckpt = (run / "checkpoints" / "final.ckpt").string();
  CHECK(invoke({"evaluate", ckpt, rec, "--beam-width", "1,4", "--csv", (dir / "eval.csv").string()}) == kExitOk);
  std::istringstream lines(slurp(dir / "eval.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 3);
  CHECK(invoke({"evaluate", ckpt, rec, "--beam-width", "0"}) == kExitUsage);
  CHECK(invoke({"evaluate", (dir / "rec" / "manifest.json").string(), rec}) == kExitData);
  CHECK(invoke({"evaluate", (dir / "nope.ckpt").string(), rec}) == kExitIo);
}

TEST_CASE("usage errors") {
  CHECK(invoke({}) == kExitUsage);
  CHECK(invoke({"bogus"}) == kExitUsage);
  CHECK(invoke({"train"}) == kExitUsage);
  CHECK(invoke({"train", "x", "--out", "y", "--workers", "two"}) == kExitUsage);
  CHECK(invoke({"--help"}) == kExitOk);
}
