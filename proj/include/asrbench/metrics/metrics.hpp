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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asrbench::metrics {

struct EditSummary {
  long insertions = 0;
  long deletions = 0;
  long substitutions = 0;
  long distance() const { return insertions + deletions + substitutions; }
};

/// Unit-cost Levenshtein alignment of `hyp` against `ref`. Tokens present
/// only in `hyp` count as insertions, tokens missing from `hyp` as
/// deletions. Among minimal alignments the one with the most substitutions
/// is reported.
template <typename Token>
EditSummary edit_summary(std::span<const Token> hyp, std::span<const Token> ref);

EditSummary edit_summary(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);
EditSummary edit_summary(std::string_view hyp, std::string_view ref);

std::vector<std::string> tokenize_words(std::string_view text);

double wer(std::string_view hyp, std::string_view ref);
double cer(std::string_view hyp, std::string_view ref);

/// Accumulates edits and denominators over many sentences so the reported
/// rate is sum(e) / sum(W) rather than a mean of per-sentence rates.
class ErrorRateAccumulator {
 public:
  void add(std::string_view hyp, std::string_view ref);
  double wer() const;
  double cer() const;
  long sentences() const { return sentences_; }

 private:
  long word_edits_ = 0;
  long words_ = 0;
  long char_edits_ = 0;
  long chars_ = 0;
  long sentences_ = 0;
};

enum class Metric { kCer, kWer };

struct AccuracyRecord {
  int epoch = 0;
  double minutes = 0;
  double cer = 0;
  double wer = 0;
  double value(Metric m) const { return m == Metric::kCer ? cer : wer; }
};

using AccuracyLog = std::vector<AccuracyRecord>;

/// Lower median: element floor((n-1)/2) of the sorted values.
double lower_median(std::vector<double> values);

/// Minutes at the first epoch whose trailing `window` epochs have a median
/// metric at or below `target`; nullopt if never reached.
std::optional<double> tta(const AccuracyLog& log, double target, int window, Metric metric);

struct ThroughputSample {
  double batch_elements = 0;
  double seconds = 0;
  double elements_per_second = 0;
};

ThroughputSample throughput(double batch_elements, double seconds);

/// Gaussian filter with reflect boundary handling ("d c b a | a b c d"),
/// the kernel truncated at 4 sigma and renormalised.
std::vector<double> gaussian_smooth(std::span<const double> series, double sigma = 10.0);

}  // namespace asrbench::metrics
