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

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "asrbench/ctc/ctc.hpp"

namespace asrbench::decoder {

using ctc::Alphabet;
using nn::Matrix;

/// Character trie over dictionary words. Node 0 is the root; children are
/// kept sorted by symbol index so iteration order is deterministic.
class PrefixTree {
 public:
  static constexpr int kNoNode = -1;

  PrefixTree();
  static PrefixTree build(std::span<const std::string> words,
                          const Alphabet& alphabet = Alphabet::standard());

  bool empty() const { return words_ == 0; }
  std::size_t word_count() const { return words_; }
  std::size_t node_count() const { return nodes_.size(); }
  bool contains(std::string_view word) const;

  int root() const { return 0; }
  int child(int node, int symbol) const;
  bool is_word_end(int node) const { return nodes_[static_cast<std::size_t>(node)].word_end; }
  const std::vector<std::pair<int, int>>& children(int node) const {
    return nodes_[static_cast<std::size_t>(node)].children;
  }
  /// Fewest symbols (separators included) that take `node` to a word end.
  int min_completion(int node) const { return nodes_[static_cast<std::size_t>(node)].to_word_end; }

 private:
  struct Node {
    std::vector<std::pair<int, int>> children;  // (symbol, node)
    int symbol = -1;  // label on the incoming edge
    int to_word_end = 0;
    bool word_end = false;
  };

  const Alphabet* alphabet_;
  std::vector<Node> nodes_;
  std::size_t words_ = 0;
};

struct DecodeResult {
  std::string text;
  double log_probability = 0;
  int beam_width = 1;
  double wall_time_ms = 0;
};

/// Per-frame argmax (ties to the lowest index) collapsed by decode_alignment.
DecodeResult greedy_decode(const Matrix& probs, const Alphabet& alphabet = Alphabet::standard());

/// CTC prefix beam search keeping `width` prefixes per frame. With a
/// non-empty trie, word symbols may only follow trie edges, a word closes
/// (by space or end of input) only at a word-end node, and the separator is
/// only admitted between two equal letters of a dictionary word. An empty
/// trie gives the unconstrained search.
DecodeResult word_beam_search(const Matrix& probs, const PrefixTree& trie, int width,
                              const Alphabet& alphabet = Alphabet::standard());

}  // namespace asrbench::decoder
