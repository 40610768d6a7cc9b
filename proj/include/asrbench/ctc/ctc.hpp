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

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asrbench/nn/tensor.hpp"

namespace asrbench::ctc {

using nn::Matrix;

/// Printable stand-in for the separation symbol ("cool" -> "co_ol").
inline constexpr char kSeparatorChar = '_';

/// Output symbol inventory. The blank is always the last index and has no
/// printable character.
class Alphabet {
 public:
  /// `symbols` lists every non-blank symbol in index order. A '_' entry is
  /// the separator.
  explicit Alphabet(std::string symbols);

  /// The 30-symbol set {space, a..z, ', separator, blank}.
  static const Alphabet& standard();

  int size() const { return static_cast<int>(symbols_.size()) + 1; }
  int blank() const { return static_cast<int>(symbols_.size()); }
  std::optional<int> separator() const { return separator_; }
  std::optional<int> index_of(char c) const;
  char symbol(int index) const { return symbols_.at(static_cast<std::size_t>(index)); }

  /// Letters and apostrophe: everything that may appear inside a word.
  bool is_word_symbol(int index) const;
  bool is_separator(int index) const { return separator_ && *separator_ == index; }

 private:
  std::string symbols_;
  std::optional<int> separator_;
  std::array<int, 256> lookup_{};
};

using LabelSequence = std::vector<int>;

/// Lower-cases, validates and maps a transcript to symbol indices, placing
/// a separator between every pair of equal adjacent characters.
LabelSequence encode_label(std::string_view transcript, const Alphabet& alphabet = Alphabet::standard());

/// Collapses repeats, then drops blanks and separators.
std::string decode_alignment(std::span<const int> path, const Alphabet& alphabet = Alphabet::standard());

/// Label symbols back to text with separators removed.
std::string label_text(std::span<const int> label, const Alphabet& alphabet = Alphabet::standard());

/// Fewest frames that can carry `label`: one per symbol plus one blank
/// between each pair of equal neighbours.
int min_frames(std::span<const int> label);

struct CtcResult {
  double loss = 0;  // -ln P(label | Y)
  Matrix grad;      // d loss / d logits, T x alphabet
};

inline constexpr double kProbabilityFloor = 1e-30;

/// Forward-backward over the blank-interleaved label in log space. `probs`
/// holds softmax rows; the gradient is taken w.r.t. the pre-softmax logits.
CtcResult ctc_loss(const Matrix& probs, std::span<const int> label, int blank);

/// Test oracle: sums the probability of every frame path whose collapsed,
/// blank-free form equals `label`. Refuses more than 1e7 paths.
double ctc_loss_bruteforce(const Matrix& probs, std::span<const int> label, int blank);

}  // namespace asrbench::ctc
