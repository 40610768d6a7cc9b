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

#include "asrbench/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "asrbench/error.hpp"

namespace asrbench::cli {

namespace fs = std::filesystem;
using trainer::Event;
using trainer::EventKind;

trainer::TtaTarget parse_tta_target(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw InvalidArgument("TTA target must look like cer=10 or wer=20");
  std::string metric(text.substr(0, eq));
  std::transform(metric.begin(), metric.end(), metric.begin(), [](unsigned char c) { return std::tolower(c); });
  trainer::TtaTarget t;
  if (metric == "cer") t.metric = metrics::Metric::kCer;
  else if (metric == "wer") t.metric = metrics::Metric::kWer;
  else throw InvalidArgument("unknown TTA metric '" + metric + "'");
  const std::string value(text.substr(eq + 1));
  std::size_t used = 0;
  double percent = 0;
  try {
    percent = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !(percent >= 0) || !std::isfinite(percent))
    throw InvalidArgument("bad TTA target value '" + value + "'");
  t.rate = percent / 100.0;
  return t;
}

std::string format_tta_target(const trainer::TtaTarget& t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%g", t.metric == metrics::Metric::kCer ? "cer" : "wer", t.rate * 100.0);
  return buf;
}

RunLog load_run(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "events.csv" : path;
  if (!fs::exists(file)) throw IoError("event log not found: " + file.string());
  RunLog run;
  const fs::path dir = file.parent_path().empty() ? fs::current_path() : file.parent_path();
  run.name = fs::absolute(dir).lexically_normal().filename().string();
  if (run.name.empty()) run.name = file.stem().string();
  run.events = trainer::read_events(file);
  const fs::path trace = dir / "telemetry.csv";
  if (fs::exists(trace)) {
    std::ifstream in(trace);
    if (!in) throw IoError("cannot read " + trace.string());
    run.trace = telemetry::parse_trace(in);
  }
  return run;
}

metrics::AccuracyLog accuracy_from_events(const std::vector<Event>& events) {
  metrics::AccuracyLog log;
  std::size_t wer_index = 0;
  for (const auto& e : events) {
    if (e.kind == EventKind::kEvalCer) {
      metrics::AccuracyRecord r;
      r.epoch = e.epoch + 1;
      r.minutes = e.value2;
      r.cer = e.value1;
      r.wer = std::numeric_limits<double>::quiet_NaN();
      log.push_back(r);
    } else if (e.kind == EventKind::kEvalWer) {
      if (wer_index >= log.size()) throw DataError("eval_wer event without a preceding eval_cer");
      log[wer_index++].wer = e.value1;
    }
  }
  if (wer_index != log.size()) throw DataError("eval_cer event without a matching eval_wer");
  return log;
}

std::vector<TtaRow> tta_table(const std::vector<RunLog>& runs, const std::vector<trainer::TtaTarget>& targets,
                              int window, std::size_t baseline) {
  if (!runs.empty() && baseline >= runs.size()) throw InvalidArgument("baseline run index out of range");
  std::vector<metrics::AccuracyLog> logs;
  for (const auto& r : runs) logs.push_back(accuracy_from_events(r.events));
  std::vector<TtaRow> rows;
  for (const auto& t : targets) {
    TtaRow row{t, {}};
    for (const auto& log : logs) row.cells.push_back({metrics::tta(log, t.rate, window, t.metric), std::nullopt});
    const auto base = runs.empty() ? std::nullopt : row.cells[baseline].minutes;
    for (auto& c : row.cells)
      if (c.minutes && base && *base > 0) c.relative_percent = *c.minutes / *base * 100.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_cell(const std::optional<double>& value, int precision) {
  if (!value) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, *value);
  return buf;
}

SmoothedLoss smoothed_loss(const std::vector<Event>& events, double sigma) {
  SmoothedLoss s;
  for (const auto& e : events)
    if (e.kind == EventKind::kLoss) {
      s.iterations.push_back(e.iteration);
      s.raw.push_back(e.value1);
    }
  if (!s.raw.empty()) s.smoothed = metrics::gaussian_smooth(s.raw, sigma);
  return s;
}

namespace {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string render_svg(const std::vector<Series>& series, const PlotSpec& spec) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;

  const double left = 64, right = 16, top = 36, bottom = 48;
  const double pw = spec.width - left - right, ph = spec.height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(spec.width) << "\" height=\"" << num(spec.height)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(spec.width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(spec.title) << "</text>\n";
  o << "<g stroke=\"#444\" fill=\"none\"><rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
    << "\" height=\"" << num(ph) << "\"/></g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    o << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 16) << "\" text-anchor=\"middle\">" << tick(xv)
      << "</text>\n";
    o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
    o << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + pw) << "\" y1=\"" << num(py(yv)) << "\" y2=\""
      << num(py(yv)) << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(spec.height - 8) << "\" text-anchor=\"middle\">"
    << xml_escape(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(14," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(spec.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) o << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
    o << "\"/>\n";
    const double ly = top + 14 + 14 * static_cast<double>(k);
    o << "<line x1=\"" << num(left + pw - 150) << "\" x2=\"" << num(left + pw - 130) << "\" y1=\"" << num(ly - 4)
      << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(left + pw - 124) << "\" y=\"" << num(ly) << "\">" << xml_escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<fs::path> write_report(const std::vector<RunLog>& runs, const fs::path& out_dir,
                                   const ReportOptions& options) {
  if (runs.empty()) throw InvalidArgument("report needs at least one event log");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  auto emit_svg = [&](const std::string& name, const std::vector<Series>& series, const PlotSpec& spec) {
    const auto path = out_dir / name;
    auto out = open_out(path);
    out << render_svg(series, spec);
    close_out(out, path);
    written.push_back(path);
  };

  {
    const auto path = out_dir / "loss.csv";
    auto out = open_out(path);
    out << "run,iteration,loss,smoothed\n";
    std::vector<Series> plot;
    for (const auto& r : runs) {
      const auto s = smoothed_loss(r.events, options.sigma);
      Series line{r.name, {}, s.smoothed};
      for (std::size_t i = 0; i < s.raw.size(); ++i) {
        out << r.name << ',' << s.iterations[i] << ',' << s.raw[i] << ',' << s.smoothed[i] << '\n';
        line.x.push_back(static_cast<double>(s.iterations[i]));
      }
      plot.push_back(std::move(line));
    }
    close_out(out, path);
    written.push_back(path);
    emit_svg("loss.svg", plot, {"Training loss (smoothed)", "iteration", "CTC loss"});
  }

  {
    const auto path = out_dir / "accuracy.csv";
    auto out = open_out(path);
    out << "run,epoch,minutes,cer,wer\n";
    std::vector<Series> plot;
    for (const auto& r : runs) {
      Series c{r.name + " CER", {}, {}}, w{r.name + " WER", {}, {}};
      for (const auto& a : accuracy_from_events(r.events)) {
        out << r.name << ',' << a.epoch << ',' << a.minutes << ',' << a.cer << ',' << a.wer << '\n';
        c.x.push_back(a.minutes);
        c.y.push_back(a.cer * 100);
        w.x.push_back(a.minutes);
        w.y.push_back(a.wer * 100);
      }
      plot.push_back(std::move(c));
      plot.push_back(std::move(w));
    }
    close_out(out, path);
    written.push_back(path);
    emit_svg("accuracy.svg", plot, {"Validation error over time", "minutes", "error rate (%)"});
  }

  {
    const auto path = out_dir / "throughput.csv";
    auto out = open_out(path);
    out << "run,iteration,timestamp_ms,elements_per_second,after_evaluation\n";
    std::vector<Series> plot;
    for (const auto& r : runs) {
      Series s{r.name, {}, {}};
      for (const auto& e : r.events)
        if (e.kind == EventKind::kThroughput) {
          out << r.name << ',' << e.iteration << ',' << e.timestamp_ms << ',' << e.value1 << ','
              << (e.value2 != 0 ? 1 : 0) << '\n';
          s.x.push_back(e.timestamp_ms / 1000.0);
          s.y.push_back(e.value1);
        }
      plot.push_back(std::move(s));
    }
    close_out(out, path);
    written.push_back(path);
    emit_svg("throughput.svg", plot, {"Input throughput", "seconds", "elements / s"});
  }

  {
    const auto path = out_dir / "utilization.csv";
    auto out = open_out(path);
    out << "run,timestamp_ms,source,busy_fraction\n";
    std::vector<Series> plot;
    for (const auto& r : runs) {
      std::map<std::string, Series> by_source;
      for (const auto& s : r.trace) {
        out << r.name << ',' << s.timestamp_ms << ',' << s.source << ',' << s.busy_fraction << '\n';
        auto& line = by_source[s.source];
        line.label = r.name + " " + s.source;
        line.x.push_back(s.timestamp_ms / 1000.0);
        line.y.push_back(s.busy_fraction * 100);
      }
      for (auto& [_, line] : by_source) plot.push_back(std::move(line));
    }
    close_out(out, path);
    written.push_back(path);
    emit_svg("utilization.svg", plot, {"Utilization", "seconds", "busy (%)"});
  }

  {
    const auto path = out_dir / "tta.csv";
    auto out = open_out(path);
    out << "target,run,minutes,relative_percent\n";
    for (const auto& row : tta_table(runs, options.targets, options.tta_window, options.baseline))
      for (std::size_t i = 0; i < runs.size(); ++i)
        out << format_tta_target(row.target) << ',' << runs[i].name << ',' << format_cell(row.cells[i].minutes, 3)
            << ',' << format_cell(row.cells[i].relative_percent, 1) << '\n';
    close_out(out, path);
    written.push_back(path);
  }
  return written;
}

}  // namespace asrbench::cli
