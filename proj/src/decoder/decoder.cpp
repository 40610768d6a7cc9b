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

#include "asrbench/decoder/decoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "asrbench/error.hpp"

namespace asrbench::decoder {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// PrefixTree

PrefixTree::PrefixTree() : alphabet_(&Alphabet::standard()), nodes_(1) {}

PrefixTree PrefixTree::build(std::span<const std::string> words, const Alphabet& alphabet) {
  PrefixTree tree;
  tree.alphabet_ = &alphabet;
  for (const auto& word : words) {
    if (word.empty()) continue;
    int node = 0;
    for (char c : word) {
      const auto sym = alphabet.index_of(c);
      if (!sym || !alphabet.is_word_symbol(*sym)) {
        throw InvalidTranscript("dictionary word '" + word + "' has a character outside a-z and '");
      }
      int next = tree.child(node, *sym);
      if (next == kNoNode) {
        next = static_cast<int>(tree.nodes_.size());
        auto& kids = tree.nodes_[static_cast<std::size_t>(node)].children;
        kids.insert(std::lower_bound(kids.begin(), kids.end(), std::pair{*sym, 0}), {*sym, next});
        tree.nodes_.emplace_back();
        tree.nodes_.back().symbol = *sym;
      }
      node = next;
    }
    auto& end = tree.nodes_[static_cast<std::size_t>(node)];
    if (!end.word_end) {
      end.word_end = true;
      ++tree.words_;
    }
  }
  // children always have larger indices than their parent
  constexpr int kUnreachable = std::numeric_limits<int>::max() / 2;
  for (auto it = tree.nodes_.rbegin(); it != tree.nodes_.rend(); ++it) {
    it->to_word_end = it->word_end ? 0 : kUnreachable;
    for (const auto& [symbol, child] : it->children) {
      const int doubled = symbol == it->symbol ? 1 : 0;
      it->to_word_end = std::min(it->to_word_end,
                                 1 + doubled + tree.nodes_[static_cast<std::size_t>(child)].to_word_end);
    }
  }
  return tree;
}

int PrefixTree::child(int node, int symbol) const {
  const auto& kids = nodes_[static_cast<std::size_t>(node)].children;
  auto it = std::lower_bound(kids.begin(), kids.end(), std::pair{symbol, std::numeric_limits<int>::min()});
  return it != kids.end() && it->first == symbol ? it->second : kNoNode;
}

bool PrefixTree::contains(std::string_view word) const {
  if (word.empty()) return false;
  int node = 0;
  for (char c : word) {
    const auto sym = alphabet_->index_of(c);
    if (!sym) return false;
    node = child(node, *sym);
    if (node == kNoNode) return false;
  }
  return is_word_end(node);
}

// ---------------------------------------------------------------------------
// Greedy

DecodeResult greedy_decode(const Matrix& probs, const Alphabet& alphabet) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<int> path(static_cast<std::size_t>(probs.rows()));
  double log_p = 0.0;
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    int best = 0;
    for (Eigen::Index k = 1; k < probs.cols(); ++k) {
      if (probs(t, k) > probs(t, best)) best = static_cast<int>(k);
    }
    path[static_cast<std::size_t>(t)] = best;
    log_p += std::log(std::max(probs(t, best), ctc::kProbabilityFloor));
  }
  DecodeResult r;
  r.text = ctc::decode_alignment(path, alphabet);
  r.log_probability = log_p;
  r.beam_width = 1;
  r.wall_time_ms = elapsed_ms(start);
  return r;
}

// ---------------------------------------------------------------------------
// Word beam search

namespace {

// One kept label prefix. Prefixes form a tree through `parent`.
struct PrefixNode {
  int parent;
  int symbol;     // -1 for the empty prefix
  int trie_node;  // current word's trie node, kNoNode outside a word
  int depth;
};

struct Candidate {
  int id;  // arena id, or -1 while the prefix is not yet materialised
  int parent;
  int symbol;
  double blank = kNegInf;      // log P(prefix, path ends in blank)
  double non_blank = kNegInf;  // log P(prefix, path ends in last symbol)
  double total() const { return log_add(blank, non_blank); }
};

class BeamSearch {
 public:
  BeamSearch(const Matrix& probs, const PrefixTree& trie, int width, const Alphabet& alphabet)
      : log_y_(probs.array().max(ctc::kProbabilityFloor).log().matrix()),
        trie_(trie),
        width_(width),
        alphabet_(alphabet) {
    arena_.push_back({-1, -1, PrefixTree::kNoNode, 0});
  }

  DecodeResult run() {
    std::vector<Candidate> beams{{0, -1, -1, 0.0, kNegInf}};
    for (Eigen::Index t = 0; t < log_y_.rows(); ++t) beams = step(beams, t);

    const Candidate* best = nullptr;
    for (const auto& c : beams) {
      if (!word_complete(c.id)) continue;
      if (!best || better(c, *best)) best = &c;
    }
    DecodeResult r;
    r.beam_width = width_;
    if (!best) {
      r.log_probability = kNegInf;
      return r;
    }
    r.log_probability = best->total();
    const auto label = labels(best->id);
    r.text = ctc::label_text(label, alphabet_);
    return r;
  }

 private:
  std::vector<Candidate> step(const std::vector<Candidate>& beams, Eigen::Index t) {
    candidates_.clear();
    slot_.clear();
    const double p_blank = log_y_(t, alphabet_.blank());
    for (const auto& beam : beams) {
      const double total = beam.total();
      const PrefixNode& node = arena_[static_cast<std::size_t>(beam.id)];

      Candidate& stay = find(beam.id, beam.id, node.symbol);
      stay.blank = log_add(stay.blank, total + p_blank);
      if (node.symbol >= 0) stay.non_blank = log_add(stay.non_blank, beam.non_blank + log_y_(t, node.symbol));

      for_each_extension(beam.id, [&](int symbol) {
        const double p = log_y_(t, symbol);
        const double from = symbol == node.symbol ? beam.blank : total;
        if (from == kNegInf) return;
        const auto existing = child_.find(key(beam.id, symbol));
        const int id = existing == child_.end() ? -1 : existing->second;
        Candidate& next = find(id, beam.id, symbol);
        next.non_blank = log_add(next.non_blank, from + p);
      });
    }

    // a prefix whose word cannot be finished in the remaining frames is dead
    const auto remaining = static_cast<int>(log_y_.rows() - 1 - t);
    std::erase_if(candidates_, [&](const Candidate& c) { return symbols_to_word_end(c) > remaining; });

    const auto keep = std::min<std::size_t>(static_cast<std::size_t>(width_), candidates_.size());
    std::partial_sort(candidates_.begin(), candidates_.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates_.end(), [&](const Candidate& a, const Candidate& b) { return better(a, b); });
    candidates_.resize(keep);
    for (auto& c : candidates_) {
      if (c.id < 0) c.id = materialise(c.parent, c.symbol);
    }
    return candidates_;
  }

  template <class Fn>
  void for_each_extension(int id, Fn&& fn) const {
    const PrefixNode& node = arena_[static_cast<std::size_t>(id)];
    const int blank = alphabet_.blank();
    if (trie_.empty()) {
      for (int s = 0; s < blank; ++s) fn(s);
      return;
    }
    if (node.symbol >= 0 && alphabet_.is_separator(node.symbol)) {
      // only the doubled letter may follow a separator
      const int letter = arena_[static_cast<std::size_t>(node.parent)].symbol;
      if (trie_.child(node.trie_node, letter) != PrefixTree::kNoNode) fn(letter);
      return;
    }
    const bool in_word = node.trie_node != PrefixTree::kNoNode;
    const int from = in_word ? node.trie_node : trie_.root();
    for (const auto& [symbol, child] : trie_.children(from)) fn(symbol);
    if (in_word && alphabet_.separator() && trie_.child(node.trie_node, node.symbol) != PrefixTree::kNoNode) {
      fn(*alphabet_.separator());
    }
    if (!in_word || trie_.is_word_end(node.trie_node)) {
      for (int s = 0; s < blank; ++s) {
        if (!alphabet_.is_word_symbol(s) && !alphabet_.is_separator(s)) fn(s);
      }
    }
  }

  int next_trie_node(const PrefixNode& p, int symbol) const {
    if (trie_.empty()) return PrefixTree::kNoNode;
    if (alphabet_.is_separator(symbol)) return p.trie_node;
    if (alphabet_.is_word_symbol(symbol)) {
      return trie_.child(p.trie_node == PrefixTree::kNoNode ? trie_.root() : p.trie_node, symbol);
    }
    return PrefixTree::kNoNode;
  }

  int materialise(int parent, int symbol) {
    const PrefixNode& p = arena_[static_cast<std::size_t>(parent)];
    const int trie_node = next_trie_node(p, symbol);
    const int id = static_cast<int>(arena_.size());
    arena_.push_back({parent, symbol, trie_node, p.depth + 1});
    child_.emplace(key(parent, symbol), id);
    return id;
  }

  Candidate& find(int id, int parent, int symbol) {
    const std::uint64_t k = id >= 0 ? static_cast<std::uint64_t>(id) : (1ULL << 63) | key(parent, symbol);
    auto [it, inserted] = slot_.try_emplace(k, candidates_.size());
    if (inserted) candidates_.push_back({id, parent, symbol});
    return candidates_[it->second];
  }

  static std::uint64_t key(int parent, int symbol) {
    return static_cast<std::uint64_t>(parent) << 8 | static_cast<std::uint64_t>(symbol);
  }

  int symbols_to_word_end(const Candidate& c) const {
    if (trie_.empty()) return 0;
    if (c.id >= 0) return symbols_to_word_end(arena_[static_cast<std::size_t>(c.id)]);
    const PrefixNode& parent = arena_[static_cast<std::size_t>(c.parent)];
    return symbols_to_word_end(PrefixNode{c.parent, c.symbol, next_trie_node(parent, c.symbol), parent.depth + 1});
  }

  int symbols_to_word_end(const PrefixNode& n) const {
    if (n.trie_node == PrefixTree::kNoNode) return 0;
    if (alphabet_.is_separator(n.symbol)) {
      const int letter = arena_[static_cast<std::size_t>(n.parent)].symbol;
      return 1 + trie_.min_completion(trie_.child(n.trie_node, letter));
    }
    return trie_.min_completion(n.trie_node);
  }

  bool word_complete(int id) const {
    if (trie_.empty()) return true;
    const PrefixNode& n = arena_[static_cast<std::size_t>(id)];
    if (n.trie_node == PrefixTree::kNoNode) return true;
    return !alphabet_.is_separator(n.symbol) && trie_.is_word_end(n.trie_node);
  }

  std::vector<int> labels(int id) const {
    std::vector<int> out;
    for (int at = id; at > 0; at = arena_[static_cast<std::size_t>(at)].parent) {
      out.push_back(arena_[static_cast<std::size_t>(at)].symbol);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  std::vector<int> candidate_labels(const Candidate& c) const {
    if (c.id >= 0) return labels(c.id);
    auto out = labels(c.parent);
    out.push_back(c.symbol);
    return out;
  }

  // Higher probability first; equal scores fall back to label order.
  bool better(const Candidate& a, const Candidate& b) const {
    const double ta = a.total(), tb = b.total();
    if (ta != tb) return ta > tb;
    return candidate_labels(a) < candidate_labels(b);
  }

  Matrix log_y_;
  const PrefixTree& trie_;
  int width_;
  const Alphabet& alphabet_;
  std::vector<PrefixNode> arena_;
  std::unordered_map<std::uint64_t, int> child_;
  std::vector<Candidate> candidates_;
  std::unordered_map<std::uint64_t, std::size_t> slot_;
};

}  // namespace

DecodeResult word_beam_search(const Matrix& probs, const PrefixTree& trie, int width,
                              const Alphabet& alphabet) {
  if (width < 1) throw InvalidArgument("word_beam_search: beam width must be >= 1");
  if (probs.cols() != alphabet.size()) throw InvalidArgument("word_beam_search: alphabet size mismatch");
  const auto start = std::chrono::steady_clock::now();
  DecodeResult r = BeamSearch(probs, trie, width, alphabet).run();
  r.wall_time_ms = elapsed_ms(start);
  return r;
}

}  // namespace asrbench::decoder
