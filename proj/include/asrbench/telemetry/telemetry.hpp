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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace asrbench::telemetry {

using Clock = std::chrono::steady_clock;

/// Busy-time counter for one execution context. begin/end are wait-free;
/// a section still open when the sampler looks is counted up to "now".
class BusySource {
 public:
  explicit BusySource(std::string name) : name_(std::move(name)) {}

  BusySource(const BusySource&) = delete;
  BusySource& operator=(const BusySource&) = delete;

  const std::string& name() const { return name_; }

  void begin();
  void end();

  /// Cumulative busy nanoseconds including any open section.
  std::uint64_t busy_ns(Clock::time_point now = Clock::now()) const;

 private:
  std::string name_;
  std::atomic<std::uint64_t> sequence_{0};
  std::atomic<std::uint64_t> closed_ns_{0};
  std::atomic<std::int64_t> open_since_ns_{-1};
};

class BusyScope {
 public:
  explicit BusyScope(BusySource* s) : s_(s) {
    if (s_) s_->begin();
  }
  ~BusyScope() {
    if (s_) s_->end();
  }
  BusyScope(const BusyScope&) = delete;
  BusyScope& operator=(const BusyScope&) = delete;

 private:
  BusySource* s_;
};

inline constexpr const char* kProcessSource = "cpu";

struct TelemetrySample {
  double timestamp_ms = 0;
  std::string source;
  double busy_fraction = 0;
  double window_ms = 30;
};

using UtilizationTrace = std::vector<TelemetrySample>;

struct UtilizationSummary {
  std::size_t samples = 0;
  double mean = 0;
  double p95 = 0;
};

UtilizationSummary summarize(const UtilizationTrace& trace, const std::string& source);

struct SamplerOptions {
  double window_ms = 30;
  bool process_cpu = true;
  Clock::time_point origin = Clock::now();
  /// When set, a one-line status is written to stderr about once a second.
  std::function<std::string()> status;
};

/// Emits one sample per source per window from a background thread.
/// Fractions are busy-time deltas over the elapsed wall time, clamped to
/// [0, 1]; the process source is CPU time over (wall time * cores).
class Sampler {
 public:
  Sampler(std::vector<const BusySource*> sources, SamplerOptions options = {});
  ~Sampler();

  Sampler(const Sampler&) = delete;
  Sampler& operator=(const Sampler&) = delete;

  void start();
  void stop();

  UtilizationTrace trace() const;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  void run();
  void sample(Clock::time_point now);

  std::vector<const BusySource*> sources_;
  SamplerOptions options_;
  std::vector<std::string> warnings_;
  std::vector<std::uint64_t> last_busy_;
  double last_cpu_s_ = 0;
  Clock::time_point last_tick_;
  Clock::time_point last_status_;
  mutable std::mutex mu_;
  UtilizationTrace trace_;
  std::thread thread_;
  std::atomic<bool> running_{false};
};

/// Process user+system CPU seconds, or a negative value if unavailable.
double process_cpu_seconds();

void emit_trace(const UtilizationTrace& trace, std::ostream& out);
UtilizationTrace parse_trace(std::istream& in);

}  // namespace asrbench::telemetry
