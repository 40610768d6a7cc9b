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

#include "asrbench/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "asrbench/error.hpp"

namespace asrbench::metrics {

namespace {

// Lexicographic cost: total edits first, then insertions + deletions, so
// substitutions win ties.
struct Cell {
  long dist = 0;
  long indels = 0;
  long ins = 0;
  long del = 0;
  long sub = 0;
  bool operator<(const Cell& o) const {
    return dist != o.dist ? dist < o.dist : indels < o.indels;
  }
};

}  // namespace

template <typename Token>
EditSummary edit_summary(std::span<const Token> hyp, std::span<const Token> ref) {
  const std::size_t n = hyp.size();
  const std::size_t m = ref.size();
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 1; j <= m; ++j) {
    prev[j] = prev[j - 1];
    ++prev[j].dist, ++prev[j].indels, ++prev[j].del;
  }
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = prev[0];
    ++cur[0].dist, ++cur[0].indels, ++cur[0].ins;
    for (std::size_t j = 1; j <= m; ++j) {
      Cell diag = prev[j - 1];
      if (!(hyp[i - 1] == ref[j - 1])) ++diag.dist, ++diag.sub;
      Cell up = prev[j];
      ++up.dist, ++up.indels, ++up.ins;
      Cell left = cur[j - 1];
      ++left.dist, ++left.indels, ++left.del;
      Cell best = diag;
      if (up < best) best = up;
      if (left < best) best = left;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  const Cell& c = prev[m];
  return {c.ins, c.del, c.sub};
}

template EditSummary edit_summary<std::string>(std::span<const std::string>, std::span<const std::string>);
template EditSummary edit_summary<char>(std::span<const char>, std::span<const char>);
template EditSummary edit_summary<int>(std::span<const int>, std::span<const int>);

EditSummary edit_summary(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  return edit_summary<std::string>(std::span(hyp), std::span(ref));
}

EditSummary edit_summary(std::string_view hyp, std::string_view ref) {
  return edit_summary<char>(std::span(hyp.data(), hyp.size()), std::span(ref.data(), ref.size()));
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(std::move(w));
  return out;
}

double wer(std::string_view hyp, std::string_view ref) {
  const auto r = tokenize_words(ref);
  if (r.empty()) throw InvalidArgument("wer: reference has no words");
  return static_cast<double>(edit_summary(tokenize_words(hyp), r).distance()) /
         static_cast<double>(r.size());
}

double cer(std::string_view hyp, std::string_view ref) {
  const std::size_t denom = std::max(hyp.size(), ref.size());
  if (denom == 0) throw InvalidArgument("cer: both strings are empty");
  return static_cast<double>(edit_summary(hyp, ref).distance()) / static_cast<double>(denom);
}

void ErrorRateAccumulator::add(std::string_view hyp, std::string_view ref) {
  const auto r = tokenize_words(ref);
  word_edits_ += edit_summary(tokenize_words(hyp), r).distance();
  words_ += static_cast<long>(r.size());
  char_edits_ += edit_summary(hyp, ref).distance();
  chars_ += static_cast<long>(std::max(hyp.size(), ref.size()));
  ++sentences_;
}

double ErrorRateAccumulator::wer() const {
  if (words_ == 0) throw InvalidArgument("wer: no reference words accumulated");
  return static_cast<double>(word_edits_) / static_cast<double>(words_);
}

double ErrorRateAccumulator::cer() const {
  if (chars_ == 0) throw InvalidArgument("cer: no characters accumulated");
  return static_cast<double>(char_edits_) / static_cast<double>(chars_);
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("lower_median: empty input");
  const auto k = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(k), values.end());
  return values[k];
}

std::optional<double> tta(const AccuracyLog& log, double target, int window, Metric metric) {
  if (window < 1) throw InvalidArgument("tta: window must be at least 1");
  const auto e = static_cast<std::size_t>(window);
  for (std::size_t k = e; k <= log.size(); ++k) {
    std::vector<double> w;
    w.reserve(e);
    for (std::size_t i = k - e; i < k; ++i) w.push_back(log[i].value(metric));
    if (lower_median(std::move(w)) <= target) return log[k - 1].minutes;
  }
  return std::nullopt;
}

ThroughputSample throughput(double batch_elements, double seconds) {
  if (!(seconds > 0)) throw InvalidArgument("throughput: duration must be positive");
  return {batch_elements, seconds, batch_elements / seconds};
}

std::vector<double> gaussian_smooth(std::span<const double> series, double sigma) {
  if (series.empty()) throw InvalidArgument("gaussian_smooth: empty series");
  if (!(sigma > 0)) throw InvalidArgument("gaussian_smooth: sigma must be positive");
  const long radius = static_cast<long>(4.0 * sigma + 0.5);
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (long k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const long n = static_cast<long>(series.size());
  auto reflect = [n](long i) {
    const long period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  };
  std::vector<double> out(series.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    double acc = 0;
    for (long k = -radius; k <= radius; ++k)
      acc += kernel[static_cast<std::size_t>(k + radius)] * series[static_cast<std::size_t>(reflect(i + k))];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

}  // namespace asrbench::metrics
