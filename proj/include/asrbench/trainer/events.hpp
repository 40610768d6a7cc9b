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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace asrbench::trainer {

inline constexpr std::string_view kEventLogVersion = "asrbench-events/1";

enum class EventKind { kLoss, kThroughput, kSentence, kCheckpoint, kEvalCer, kEvalWer, kState, kWarning };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

/// One CSV row: timestamp_ms,epoch,iteration,kind,value1,value2,text.
///   loss        value1 mean CTC loss, value2 elements used
///   throughput  value1 elements/s since the previous batch, value2 1 when
///               that interval contained a model swap for evaluation
///   sentence    value1 CER of the greedy transcript, text the transcript
///   checkpoint  value1 iteration, text file name
///   eval_cer / eval_wer  value1 rate, value2 minutes since model creation
///   state       value1 state code, text state name
///   warning     text message
struct Event {
  double timestamp_ms = 0;
  int epoch = 0;
  std::int64_t iteration = 0;
  EventKind kind = EventKind::kState;
  double value1 = 0;
  double value2 = 0;
  std::string text;
};

/// Append-only event log kept in memory and, optionally, mirrored to a
/// CSV file that is flushed after every row.
class EventLog {
 public:
  EventLog() = default;
  /// Mirrors every event to `file`. With `append`, an existing log is
  /// version-checked and extended instead of replaced.
  explicit EventLog(const std::filesystem::path& file, bool append = false);

  void append(Event e);
  const std::vector<Event>& events() const { return events_; }
  std::vector<Event> of_kind(EventKind kind) const;

 private:
  std::vector<Event> events_;
  std::optional<std::ofstream> out_;
};

void write_event_header(std::ostream& out);
void write_event(std::ostream& out, const Event& e);
void write_events(std::ostream& out, const std::vector<Event>& events);

/// Rejects logs whose version line differs from kEventLogVersion.
std::vector<Event> read_events(std::istream& in);
std::vector<Event> read_events(const std::filesystem::path& file);

}  // namespace asrbench::trainer
