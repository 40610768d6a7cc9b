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

#include "asrbench/trainer/events.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "asrbench/error.hpp"

namespace asrbench::trainer {

namespace {

constexpr std::array<std::string_view, 8> kKindNames{"loss",     "throughput", "sentence", "checkpoint",
                                                     "eval_cer", "eval_wer",   "state",    "warning"};
constexpr std::string_view kHeader = "timestamp_ms,epoch,iteration,kind,value1,value2,text";

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

double to_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

}  // namespace

std::string_view to_string(EventKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == text) return static_cast<EventKind>(i);
  return std::nullopt;
}

EventLog::EventLog(const std::filesystem::path& file, bool append) {
  if (append && std::filesystem::exists(file)) {
    events_ = read_events(file);
    out_.emplace(file, std::ios::app);
    if (!*out_) throw IoError("cannot open event log " + file.string());
    return;
  }
  out_.emplace(file, std::ios::trunc);
  if (!*out_) throw IoError("cannot create event log " + file.string());
  write_event_header(*out_);
  out_->flush();
}

void EventLog::append(Event e) {
  if (out_) {
    write_event(*out_, e);
    out_->flush();
    if (!*out_) throw IoError("event log write failed");
  }
  events_.push_back(std::move(e));
}

std::vector<Event> EventLog::of_kind(EventKind kind) const {
  std::vector<Event> out;
  for (const auto& e : events_)
    if (e.kind == kind) out.push_back(e);
  return out;
}

void write_event_header(std::ostream& out) { out << "# " << kEventLogVersion << '\n' << kHeader << '\n'; }

void write_event(std::ostream& out, const Event& e) {
  out << number(e.timestamp_ms) << ',' << e.epoch << ',' << e.iteration << ',' << to_string(e.kind) << ','
      << number(e.value1) << ',' << number(e.value2) << ',' << quote(e.text) << '\n';
}

void write_events(std::ostream& out, const std::vector<Event>& events) {
  write_event_header(out);
  for (const auto& e : events) write_event(out, e);
  if (!out) throw IoError("event log write failed");
}

std::vector<Event> read_events(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "# " + std::string(kEventLogVersion))
    throw UnsupportedFormat("event log version mismatch: expected '" + std::string(kEventLogVersion) + "'");
  if (!std::getline(in, line) || line != kHeader) throw DataError("event log has an unexpected header");
  std::vector<Event> events;
  std::size_t row = 2;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw DataError("event log row " + std::to_string(row) + " has " + std::to_string(f.size()) + " fields");
    Event e;
    try {
      e.timestamp_ms = to_double(f[0]);
      e.epoch = std::stoi(f[1]);
      e.iteration = std::stoll(f[2]);
      e.value1 = to_double(f[4]);
      e.value2 = to_double(f[5]);
    } catch (const std::exception&) {
      throw DataError("event log row " + std::to_string(row) + " is malformed");
    }
    const auto kind = parse_event_kind(f[3]);
    if (!kind) throw DataError("event log row " + std::to_string(row) + " has unknown kind '" + f[3] + "'");
    e.kind = *kind;
    e.text = f[6];
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<Event> read_events(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open event log " + file.string());
  return read_events(in);
}

}  // namespace asrbench::trainer
