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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asrbench/metrics/metrics.hpp"
#include "asrbench/telemetry/telemetry.hpp"
#include "asrbench/trainer/events.hpp"
#include "asrbench/trainer/trainer.hpp"

namespace asrbench::cli {

/// Parses "cer=10" or "wer=12.5"; the value is a percentage.
trainer::TtaTarget parse_tta_target(std::string_view text);
std::string format_tta_target(const trainer::TtaTarget& t);

struct RunLog {
  std::string name;
  std::vector<trainer::Event> events;
  telemetry::UtilizationTrace trace;
};

/// Reads `events.csv` (or the given file) and a sibling `telemetry.csv` when
/// present. The run is named after its directory.
RunLog load_run(const std::filesystem::path& path);

metrics::AccuracyLog accuracy_from_events(const std::vector<trainer::Event>& events);

struct TtaCell {
  std::optional<double> minutes;
  std::optional<double> relative_percent;
};

struct TtaRow {
  trainer::TtaTarget target;
  std::vector<TtaCell> cells;  // one per run
};

std::vector<TtaRow> tta_table(const std::vector<RunLog>& runs, const std::vector<trainer::TtaTarget>& targets,
                              int window, std::size_t baseline);

/// "NA" for an unreached target.
std::string format_cell(const std::optional<double>& value, int precision = 1);

struct SmoothedLoss {
  std::vector<std::int64_t> iterations;
  std::vector<double> raw;
  std::vector<double> smoothed;
};
SmoothedLoss smoothed_loss(const std::vector<trainer::Event>& events, double sigma = 10.0);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  double width = 720;
  double height = 420;
};

std::string render_svg(const std::vector<Series>& series, const PlotSpec& spec);

struct ReportOptions {
  std::vector<trainer::TtaTarget> targets;
  int tta_window = 3;
  std::size_t baseline = 0;
  double sigma = 10.0;
};

/// Writes loss, accuracy, throughput, utilization and TTA artifacts as CSV
/// plus SVG plots. Returns the files written.
std::vector<std::filesystem::path> write_report(const std::vector<RunLog>& runs,
                                                const std::filesystem::path& out_dir,
                                                const ReportOptions& options);

}  // namespace asrbench::cli
