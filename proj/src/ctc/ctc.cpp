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

#include "asrbench/ctc/ctc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "asrbench/error.hpp"

namespace asrbench::ctc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

Alphabet::Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
  lookup_.fill(-1);
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto c = static_cast<unsigned char>(symbols_[i]);
    if (lookup_[c] != -1) throw InvalidArgument("Alphabet: duplicate symbol");
    lookup_[c] = static_cast<int>(i);
    if (symbols_[i] == kSeparatorChar) separator_ = static_cast<int>(i);
  }
}

const Alphabet& Alphabet::standard() {
  static const Alphabet a(" abcdefghijklmnopqrstuvwxyz'_");
  return a;
}

std::optional<int> Alphabet::index_of(char c) const {
  const int i = lookup_[static_cast<unsigned char>(c)];
  if (i < 0) return std::nullopt;
  return i;
}

bool Alphabet::is_word_symbol(int index) const {
  if (index < 0 || index >= blank()) return false;
  const char c = symbols_[static_cast<std::size_t>(index)];
  return c != ' ' && c != kSeparatorChar;
}

LabelSequence encode_label(std::string_view transcript, const Alphabet& alphabet) {
  LabelSequence out;
  out.reserve(transcript.size() * 2);
  std::string bad;
  for (char raw : transcript) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    const auto idx = alphabet.index_of(c);
    if (!idx || alphabet.is_separator(*idx)) {
      if (bad.find(raw) == std::string::npos) bad.push_back(raw);
      continue;
    }
    if (!out.empty() && out.back() == *idx) {
      if (!alphabet.separator()) throw InvalidTranscript("alphabet has no separator for doubled symbols");
      out.push_back(*alphabet.separator());
    }
    out.push_back(*idx);
  }
  if (!bad.empty()) throw InvalidTranscript("characters outside the alphabet: '" + bad + "'");
  return out;
}

std::string decode_alignment(std::span<const int> path, const Alphabet& alphabet) {
  std::string text;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != alphabet.blank() && !alphabet.is_separator(s)) text.push_back(alphabet.symbol(s));
    prev = s;
  }
  return text;
}

std::string label_text(std::span<const int> label, const Alphabet& alphabet) {
  std::string text;
  for (int s : label) {
    if (s != alphabet.blank() && !alphabet.is_separator(s)) text.push_back(alphabet.symbol(s));
  }
  return text;
}

int min_frames(std::span<const int> label) {
  int n = static_cast<int>(label.size());
  for (std::size_t i = 1; i < label.size(); ++i) n += label[i] == label[i - 1];
  return n;
}

CtcResult ctc_loss(const Matrix& probs, std::span<const int> label, int blank) {
  const auto frames = static_cast<int>(probs.rows());
  const auto symbols = static_cast<int>(probs.cols());
  if (blank < 0 || blank >= symbols) throw InvalidArgument("ctc_loss: blank index out of range");
  for (int s : label) {
    if (s < 0 || s >= symbols || s == blank) throw InvalidArgument("ctc_loss: invalid label symbol");
  }
  if (frames < min_frames(label) || frames == 0) {
    throw InfeasibleLabel("ctc_loss: " + std::to_string(label.size()) + " label symbols need at least " +
                          std::to_string(std::max(1, min_frames(label))) + " frames, have " +
                          std::to_string(frames));
  }

  const Matrix log_y = probs.array().max(kProbabilityFloor).log().matrix();
  const int states = 2 * static_cast<int>(label.size()) + 1;
  auto sym = [&](int s) { return s % 2 == 0 ? blank : label[static_cast<std::size_t>(s / 2)]; };
  auto can_skip = [&](int s) { return s >= 2 && sym(s) != blank && sym(s) != sym(s - 2); };

  Matrix alpha = Matrix::Constant(frames, states, kNegInf);
  Matrix beta = Matrix::Constant(frames, states, kNegInf);
  alpha(0, 0) = log_y(0, blank);
  if (states > 1) alpha(0, 1) = log_y(0, sym(1));
  for (int t = 1; t < frames; ++t) {
    for (int s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, alpha(t - 1, s - 2));
      if (acc != kNegInf) alpha(t, s) = acc + log_y(t, sym(s));
    }
  }
  beta(frames - 1, states - 1) = log_y(frames - 1, blank);
  if (states > 1) beta(frames - 1, states - 2) = log_y(frames - 1, sym(states - 2));
  for (int t = frames - 2; t >= 0; --t) {
    for (int s = 0; s < states; ++s) {
      double acc = beta(t + 1, s);
      if (s + 1 < states) acc = log_add(acc, beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) acc = log_add(acc, beta(t + 1, s + 2));
      if (acc != kNegInf) beta(t, s) = acc + log_y(t, sym(s));
    }
  }

  double log_p = alpha(frames - 1, states - 1);
  if (states > 1) log_p = log_add(log_p, alpha(frames - 1, states - 2));
  if (log_p == kNegInf) throw InfeasibleLabel("ctc_loss: label has zero probability");

  CtcResult result;
  result.loss = -log_p;
  result.grad = probs;
  Eigen::RowVectorXd occupancy(symbols);
  for (int t = 0; t < frames; ++t) {
    occupancy.setConstant(kNegInf);
    for (int s = 0; s < states; ++s) {
      const int k = sym(s);
      occupancy[k] = log_add(occupancy[k], alpha(t, s) + beta(t, s));
    }
    for (int k = 0; k < symbols; ++k) {
      if (occupancy[k] != kNegInf) result.grad(t, k) -= std::exp(occupancy[k] - log_y(t, k) - log_p);
    }
  }
  return result;
}

double ctc_loss_bruteforce(const Matrix& probs, std::span<const int> label, int blank) {
  const auto frames = static_cast<int>(probs.rows());
  const auto symbols = static_cast<int>(probs.cols());
  if (std::pow(double(symbols), double(frames)) > 1e7) {
    throw InvalidArgument("ctc_loss_bruteforce: instance too large to enumerate");
  }
  std::vector<int> path(static_cast<std::size_t>(frames), 0);
  std::vector<int> collapsed;
  double total = 0.0;
  while (true) {
    collapsed.clear();
    int prev = -1;
    double p = 1.0;
    for (int t = 0; t < frames; ++t) {
      const int s = path[static_cast<std::size_t>(t)];
      p *= probs(t, s);
      if (s != prev && s != blank) collapsed.push_back(s);
      prev = s;
    }
    if (std::equal(collapsed.begin(), collapsed.end(), label.begin(), label.end())) total += p;
    int t = frames - 1;
    while (t >= 0 && ++path[static_cast<std::size_t>(t)] == symbols) path[static_cast<std::size_t>(t--)] = 0;
    if (t < 0) break;
  }
  return -std::log(total);
}

}  // namespace asrbench::ctc
