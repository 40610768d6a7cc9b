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

#include "asrbench/telemetry/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#if defined(__unix__) || defined(__APPLE__)
#include <sys/resource.h>
#define ASRBENCH_HAVE_RUSAGE 1
#endif

#include "asrbench/error.hpp"

namespace asrbench::telemetry {

namespace {

std::int64_t to_ns(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(t.time_since_epoch()).count();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// Writers bump the sequence to an odd value, update, then make it even
// again; readers retry while it is odd or changed under them.
void BusySource::begin() {
  sequence_.fetch_add(1, std::memory_order_acq_rel);
  open_since_ns_.store(to_ns(Clock::now()), std::memory_order_release);
  sequence_.fetch_add(1, std::memory_order_acq_rel);
}

void BusySource::end() {
  const std::int64_t now = to_ns(Clock::now());
  sequence_.fetch_add(1, std::memory_order_acq_rel);
  const std::int64_t since = open_since_ns_.load(std::memory_order_acquire);
  if (since >= 0 && now > since) closed_ns_.fetch_add(static_cast<std::uint64_t>(now - since), std::memory_order_release);
  open_since_ns_.store(-1, std::memory_order_release);
  sequence_.fetch_add(1, std::memory_order_acq_rel);
}

std::uint64_t BusySource::busy_ns(Clock::time_point now) const {
  const std::int64_t t = to_ns(now);
  for (;;) {
    const auto s0 = sequence_.load(std::memory_order_acquire);
    if (s0 & 1) {
      std::this_thread::yield();
      continue;
    }
    std::uint64_t busy = closed_ns_.load(std::memory_order_acquire);
    const std::int64_t since = open_since_ns_.load(std::memory_order_acquire);
    if (since >= 0 && t > since) busy += static_cast<std::uint64_t>(t - since);
    if (sequence_.load(std::memory_order_acquire) == s0) return busy;
  }
}

double process_cpu_seconds() {
#ifdef ASRBENCH_HAVE_RUSAGE
  rusage u{};
  if (getrusage(RUSAGE_SELF, &u) != 0) return -1;
  return static_cast<double>(u.ru_utime.tv_sec + u.ru_stime.tv_sec) +
         1e-6 * static_cast<double>(u.ru_utime.tv_usec + u.ru_stime.tv_usec);
#else
  return -1;
#endif
}

UtilizationSummary summarize(const UtilizationTrace& trace, const std::string& source) {
  std::vector<double> v;
  for (const auto& s : trace)
    if (s.source == source) v.push_back(s.busy_fraction);
  UtilizationSummary out;
  out.samples = v.size();
  if (v.empty()) return out;
  double sum = 0;
  for (double x : v) sum += x;
  out.mean = sum / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
  out.p95 = v[std::min(k, v.size() - 1)];
  return out;
}

Sampler::Sampler(std::vector<const BusySource*> sources, SamplerOptions options)
    : sources_(std::move(sources)), options_(std::move(options)) {
  if (!(options_.window_ms >= 1)) throw InvalidArgument("sampler window must be at least 1 ms");
  if (options_.process_cpu && process_cpu_seconds() < 0) {
    options_.process_cpu = false;
    warnings_.push_back("process CPU accounting unavailable; sampling worker instrumentation only");
  }
}

Sampler::~Sampler() { stop(); }

void Sampler::start() {
  if (running_.exchange(true)) return;
  last_tick_ = Clock::now();
  last_status_ = last_tick_;
  last_busy_.clear();
  for (const auto* s : sources_) last_busy_.push_back(s->busy_ns(last_tick_));
  last_cpu_s_ = options_.process_cpu ? process_cpu_seconds() : 0;
  thread_ = std::thread([this] { run(); });
}

void Sampler::stop() {
  if (!running_.exchange(false)) return;
  if (thread_.joinable()) thread_.join();
  if (options_.status) std::cerr << '\n';
}

void Sampler::run() {
  const auto window = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double, std::milli>(options_.window_ms));
  auto next = last_tick_ + window;
  while (running_.load(std::memory_order_acquire)) {
    std::this_thread::sleep_until(next);
    const auto now = Clock::now();
    sample(now);
    next += window;
    if (next < now) next = now + window;
  }
}

void Sampler::sample(Clock::time_point now) {
  const double elapsed_ns = static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(now - last_tick_).count());
  if (elapsed_ns <= 0) return;
  const double stamp = std::chrono::duration<double, std::milli>(now - options_.origin).count();
  const double window = elapsed_ns / 1e6;
  std::vector<TelemetrySample> batch;
  for (std::size_t i = 0; i < sources_.size(); ++i) {
    const auto busy = sources_[i]->busy_ns(now);
    const double delta = busy >= last_busy_[i] ? static_cast<double>(busy - last_busy_[i]) : 0.0;
    last_busy_[i] = busy;
    batch.push_back({stamp, sources_[i]->name(), std::clamp(delta / elapsed_ns, 0.0, 1.0), window});
  }
  if (options_.process_cpu) {
    const double cpu = process_cpu_seconds();
    const double cores = std::max(1u, std::thread::hardware_concurrency());
    batch.push_back({stamp, kProcessSource, std::clamp((cpu - last_cpu_s_) * 1e9 / (elapsed_ns * cores), 0.0, 1.0), window});
    last_cpu_s_ = cpu;
  }
  last_tick_ = now;
  {
    std::lock_guard lock(mu_);
    trace_.insert(trace_.end(), batch.begin(), batch.end());
  }
  if (options_.status && now - last_status_ >= std::chrono::seconds(1)) {
    last_status_ = now;
    std::cerr << '\r' << options_.status() << "\x1b[K" << std::flush;
  }
}

UtilizationTrace Sampler::trace() const {
  std::lock_guard lock(mu_);
  return trace_;
}

void emit_trace(const UtilizationTrace& trace, std::ostream& out) {
  out << "timestamp_ms,source,busy_fraction\n";
  for (const auto& s : trace)
    out << format_double(s.timestamp_ms) << ',' << s.source << ',' << format_double(s.busy_fraction) << '\n';
  if (!out) throw IoError("failed to write utilization trace");
}

UtilizationTrace parse_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "timestamp_ms,source,busy_fraction")
    throw DataError("utilization trace has an unexpected header");
  UtilizationTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.rfind(',');
    if (a == std::string::npos || a == b) throw DataError("malformed trace row: " + line);
    TelemetrySample s;
    try {
      s.timestamp_ms = std::stod(line.substr(0, a));
      s.busy_fraction = std::stod(line.substr(b + 1));
    } catch (const std::exception&) {
      throw DataError("malformed trace row: " + line);
    }
    s.source = line.substr(a + 1, b - a - 1);
    s.window_ms = 0;
    trace.push_back(std::move(s));
  }
  return trace;
}

}  // namespace asrbench::telemetry
